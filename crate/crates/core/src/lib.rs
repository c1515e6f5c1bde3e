//! Entropic transfer operators for stochastic dynamical systems.
//!
//! Transition pairs `(x_i, y_i)` are turned into a compact operator by
//! sandwiching the empirical transfer operator between two entropic blur
//! kernels obtained from Sinkhorn self-transport. The crate covers the
//! transport solver, operator assembly (dense and matrix-free), dominant
//! spectra, out-of-sample extension of eigenfunctions, an Ulam baseline,
//! synthetic systems with known ground truth, and convergence diagnostics.

pub mod baselines;
pub mod cloud;
pub mod cost;
pub mod data;
pub mod error;
pub mod exec;
pub mod linalg;
pub mod metrics;
pub mod oos;
pub mod operator;
pub mod ot;
pub mod spectral;
pub mod synth;

pub use cloud::PointCloud;
pub use cost::CostSpec;
pub use data::TransitionData;
pub use error::{Error, Result};
pub use operator::{build_operator, TransferOperatorEstimate, Variant};
