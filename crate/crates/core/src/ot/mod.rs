//! Entropic optimal transport between point clouds.

mod duals;
mod kernel;
mod options;
mod sinkhorn;

pub use duals::{log_sum_exp, DualPotentials};
pub use kernel::{kernel_evaluate, kernel_matrix, EntropicKernel, EvalMode, Scalar};
pub use options::{SolverConfig, SolverOptions};
pub use sinkhorn::{solve_self_transport, solve_self_transport_warm, solve_sinkhorn, solve_sinkhorn_warm};

#[cfg(test)]
mod tests;
