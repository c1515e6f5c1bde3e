//! Empirical entropic transfer operators `T = G_left ∘ T_N ∘ G_right`.
//!
//! Functions are stored as value vectors at the samples. The middle operator
//! `T_N` maps the value at `x_i` to the value at `y_i`; since the clouds are
//! stored pair-aligned it is the identity on vectors and is never formed.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::cost::CostSpec;
use crate::data::TransitionData;
use crate::error::{Error, Result};
use crate::ot::{
    solve_self_transport, solve_self_transport_warm, solve_sinkhorn, solve_sinkhorn_warm, DualPotentials,
    EntropicKernel, EvalMode, Scalar, SolverOptions,
};

/// Up to this many samples the blur kernels are materialized by default.
pub const DEFAULT_DENSE_MAX: usize = 5000;

/// Marginal tolerance used for operator blurs; tight enough that `T 1 = 1` holds to 1e-8 in max-norm.
pub const OPERATOR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// `G_{νμ} ∘ T_N ∘ G_{μμ}`, an endomorphism of `L²(μ_N)`.
    Stationary,
    /// `G_{νν} ∘ T_N ∘ G_{μμ}`, mapping `L²(μ_N)` to `L²(ν_N)`.
    Nonstationary,
}

#[derive(Debug, Clone)]
pub struct OperatorOptions {
    pub solver: SolverOptions,
    /// `None` picks dense up to `dense_max` samples and lazy above.
    pub representation: Option<EvalMode>,
    pub dense_max: usize,
}

impl Default for OperatorOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default().with_tol(OPERATOR_TOL),
            representation: None,
            dense_max: DEFAULT_DENSE_MAX,
        }
    }
}

impl OperatorOptions {
    pub fn with_representation(mut self, mode: EvalMode) -> Self {
        self.representation = Some(mode);
        self
    }

    pub fn with_solver(mut self, solver: SolverOptions) -> Self {
        self.solver = solver;
        self
    }

    fn mode_for(&self, n: usize) -> EvalMode {
        self.representation
            .unwrap_or(if n <= self.dense_max.min(self.solver.dense_threshold) {
                EvalMode::Dense
            } else {
                EvalMode::Lazy
            })
    }
}

#[derive(Debug, Clone)]
pub struct TransferOperatorEstimate {
    variant: Variant,
    left: EntropicKernel,
    right: EntropicKernel,
    data: TransitionData,
    epsilon: f64,
}

/// Solves the two blur problems and assembles the operator.
pub fn build_operator(
    data: &TransitionData,
    cost: &CostSpec,
    epsilon: f64,
    variant: Variant,
    opts: &OperatorOptions,
) -> Result<TransferOperatorEstimate> {
    check_data(data, cost)?;
    let s = &opts.solver;
    let right = solve_self_transport(data.x().clone(), cost, epsilon, s)?;
    let left = match variant {
        Variant::Stationary => solve_sinkhorn(data.y().clone(), data.x().clone(), cost, epsilon, s)?,
        Variant::Nonstationary => solve_self_transport(data.y().clone(), cost, epsilon, s)?,
    };
    assemble(data, variant, epsilon, left, right, opts)
}

/// Rebuilds at a new `ε`, warm-starting both Sinkhorn problems from `previous`.
pub fn build_operator_warm(
    previous: &TransferOperatorEstimate,
    epsilon: f64,
    opts: &OperatorOptions,
) -> Result<TransferOperatorEstimate> {
    let s = &opts.solver;
    let right = solve_self_transport_warm(previous.right.duals(), epsilon, s)?;
    let left = match previous.variant {
        Variant::Stationary => solve_sinkhorn_warm(previous.left.duals(), epsilon, s)?,
        Variant::Nonstationary => solve_self_transport_warm(previous.left.duals(), epsilon, s)?,
    };
    assemble(&previous.data, previous.variant, epsilon, left, right, opts)
}

fn check_data(data: &TransitionData, cost: &CostSpec) -> Result<()> {
    if data.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 transition pairs, got {}",
            data.len()
        )));
    }
    if !cost.check_dim(data.dim()) {
        return Err(Error::InvalidInput(format!(
            "cost {} does not fit dimension {}",
            cost.description(),
            data.dim()
        )));
    }
    Ok(())
}

fn assemble(
    data: &TransitionData,
    variant: Variant,
    epsilon: f64,
    left: DualPotentials,
    right: DualPotentials,
    opts: &OperatorOptions,
) -> Result<TransferOperatorEstimate> {
    let mode = opts.mode_for(data.len());
    let threshold = opts.solver.dense_threshold.max(opts.dense_max);
    let left = EntropicKernel::new(Arc::new(left), mode, threshold)?;
    let right = EntropicKernel::new(Arc::new(right), mode, threshold)?;
    Ok(TransferOperatorEstimate {
        variant,
        left,
        right,
        data: data.clone(),
        epsilon,
    })
}

impl TransferOperatorEstimate {
    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn data(&self) -> &TransitionData {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn representation(&self) -> EvalMode {
        self.right.mode()
    }

    /// `G_{μμ}`.
    pub fn right_blur(&self) -> &EntropicKernel {
        &self.right
    }

    /// `G_{νμ}` (stationary) or `G_{νν}` (non-stationary).
    pub fn left_blur(&self) -> &EntropicKernel {
        &self.left
    }

    pub fn cost(&self) -> &CostSpec {
        self.right.duals().cost()
    }

    /// Samples on which input functions live.
    pub fn input_cloud(&self) -> &Arc<PointCloud> {
        self.data.x()
    }

    /// Samples on which output functions live.
    pub fn output_cloud(&self) -> &Arc<PointCloud> {
        self.left.duals().target_arc()
    }

    /// Sinkhorn iterations spent in the final stage of (right, left).
    pub fn sinkhorn_iterations(&self) -> (usize, usize) {
        (self.right.duals().iterations(), self.left.duals().iterations())
    }

    /// `T u`, value vector at input samples to value vector at output samples.
    pub fn apply<S: Scalar>(&self, u: &[S]) -> Result<Vec<S>> {
        let v = self.right.apply(u)?;
        self.left.apply(&v)
    }

    /// Adjoint with respect to the weighted inner products on both sides.
    pub fn apply_adjoint<S: Scalar>(&self, v: &[S]) -> Result<Vec<S>> {
        let w = self.left.apply_adjoint(v)?;
        self.right.apply_adjoint(&w)
    }

    /// `G_{μμ} u`, the first half of [`apply`](Self::apply).
    pub fn apply_right<S: Scalar>(&self, u: &[S]) -> Result<Vec<S>> {
        self.right.apply(u)
    }

    /// Matrix acting on value vectors, `M[j][i] = t_N(x_i, z_j)/N`.
    pub fn dense_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let l = DMatrix::from_fn(self.left.n_target(), n, |j, i| {
            self.left.duals().source().weight(i) * self.left.entry(i, j)
        });
        let r = DMatrix::from_fn(n, n, |j, i| {
            self.right.duals().source().weight(i) * self.right.entry(i, j)
        });
        l * r
    }

    /// Continuous kernel `t_N(x, y) = Σ_i π_i k_{μμ}(x, x_i) k_left(y_i, y)` at arbitrary points.
    pub fn kernel_evaluate(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let (_, a) = self.right.duals().kernel_to_targets(x)?;
        let (_, b) = self.left.duals().kernel_from_sources(y)?;
        let w = self.data.x().weights();
        Ok(a.iter().zip(&b).zip(w).map(|((a, b), w)| w * a * b).sum())
    }

    /// `(T̃ v)(y) = Σ_i w_i k_left(y_i, y) v_i` for a vector `v = G_{μμ} u` at the pair samples,
    /// together with `log Σ_i w_i exp((α_i − c(y_i, y))/ε)`, the log-mass the left kernel
    /// places near `y`.
    pub fn extend_blurred<S: Scalar>(&self, blurred: &[S], y: &[f64]) -> Result<(S, f64)> {
        let d = self.left.duals();
        let (beta, col) = d.kernel_from_sources(y)?;
        let w = d.source().weights();
        let mut acc = S::zero();
        for ((&k, &wi), &v) in col.iter().zip(w).zip(blurred) {
            acc += v * (wi * k);
        }
        Ok((acc, -beta / d.epsilon()))
    }
}

/// Free-function form of [`TransferOperatorEstimate::kernel_evaluate`].
pub fn operator_kernel_evaluate(op: &TransferOperatorEstimate, x: &[f64], y: &[f64]) -> Result<f64> {
    op.kernel_evaluate(x, y)
}
