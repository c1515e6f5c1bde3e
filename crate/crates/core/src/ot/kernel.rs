use std::ops::{AddAssign, Mul};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;

use super::duals::DualPotentials;

/// Field element a kernel can act on.
pub trait Scalar: Copy + Send + Sync + Zero + AddAssign + Mul<f64, Output = Self> {}

impl Scalar for f64 {}
impl Scalar for Complex64 {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    /// Kernel values materialized once as a dense matrix.
    Dense,
    /// Kernel values recomputed from the potentials on every application.
    Lazy,
}

/// Entropic transport kernel `k(x, y) = exp((α(x) + β(y) − c(x, y))/ε)` from
/// the source cloud to the target cloud, together with the blur operator it
/// induces, `(G u)(y) = ∫ u(x) k(x, y) dμ(x)`.
#[derive(Debug, Clone)]
pub struct EntropicKernel {
    duals: Arc<DualPotentials>,
    mode: EvalMode,
    /// `m[j * n_source + i] = k(x_i, y_j)`
    matrix: Option<Vec<f64>>,
}

impl EntropicKernel {
    pub fn new(duals: Arc<DualPotentials>, mode: EvalMode, dense_threshold: usize) -> Result<Self> {
        let matrix = match mode {
            EvalMode::Dense => Some(materialize(&duals, dense_threshold)?),
            EvalMode::Lazy => None,
        };
        Ok(Self { duals, mode, matrix })
    }

    pub fn lazy(duals: Arc<DualPotentials>) -> Self {
        Self {
            duals,
            mode: EvalMode::Lazy,
            matrix: None,
        }
    }

    pub fn duals(&self) -> &DualPotentials {
        &self.duals
    }

    pub fn duals_arc(&self) -> &Arc<DualPotentials> {
        &self.duals
    }

    pub fn mode(&self) -> EvalMode {
        self.mode
    }

    pub fn n_source(&self) -> usize {
        self.duals.source.len()
    }

    pub fn n_target(&self) -> usize {
        self.duals.target.len()
    }

    /// Kernel value at arbitrary points.
    pub fn evaluate(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.duals.kernel(x, y)
    }

    /// In-sample value `k(x_i, y_j)`.
    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match &self.matrix {
            Some(m) => m[j * self.n_source() + i],
            None => self.duals.log_kernel_in_sample(i, j).exp(),
        }
    }

    /// `(G u)_j = Σ_i w_i k(x_i, y_j) u_i`, mapping source functions to target functions.
    pub fn apply<S: Scalar>(&self, u: &[S]) -> Result<Vec<S>> {
        let ns = self.n_source();
        if u.len() != ns {
            return Err(Error::DimensionMismatch {
                expected: ns,
                found: u.len(),
            });
        }
        let w = self.duals.source.weights();
        let wu: Vec<S> = u.iter().zip(w).map(|(&ui, &wi)| ui * wi).collect();
        let nt = self.n_target();
        let out = match &self.matrix {
            Some(m) => exec::map_indices(nt, |j| {
                let row = &m[j * ns..(j + 1) * ns];
                let mut acc = S::zero();
                for (&k, &v) in row.iter().zip(&wu) {
                    acc += v * k;
                }
                acc
            }),
            None => exec::map_indices(nt, |j| {
                let mut acc = S::zero();
                for (i, &v) in wu.iter().enumerate() {
                    acc += v * self.duals.log_kernel_in_sample(i, j).exp();
                }
                acc
            }),
        };
        Ok(out)
    }

    /// Adjoint with respect to the weighted inner products:
    /// `(G* v)_i = Σ_j τ_j k(x_i, y_j) v_j`.
    pub fn apply_adjoint<S: Scalar>(&self, v: &[S]) -> Result<Vec<S>> {
        let nt = self.n_target();
        if v.len() != nt {
            return Err(Error::DimensionMismatch {
                expected: nt,
                found: v.len(),
            });
        }
        let tau = self.duals.target.weights();
        let tv: Vec<S> = v.iter().zip(tau).map(|(&vj, &tj)| vj * tj).collect();
        let ns = self.n_source();
        let mut out = vec![S::zero(); ns];
        match &self.matrix {
            Some(m) => {
                const BLOCK: usize = 256;
                exec::for_each_chunk_mut(&mut out, BLOCK, |c, block| {
                    let lo = c * BLOCK;
                    for (j, &s) in tv.iter().enumerate() {
                        let row = &m[j * ns + lo..j * ns + lo + block.len()];
                        for (o, &k) in block.iter_mut().zip(row) {
                            *o += s * k;
                        }
                    }
                });
            }
            None => exec::fill_indexed(&mut out, |i| {
                let mut acc = S::zero();
                for (j, &s) in tv.iter().enumerate() {
                    acc += s * self.duals.log_kernel_in_sample(i, j).exp();
                }
                acc
            }),
        }
        Ok(out)
    }

    /// Dense `M[j][i] = k(x_i, y_j)`.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let (ns, nt) = (self.n_source(), self.n_target());
        DMatrix::from_fn(nt, ns, |j, i| self.entry(i, j))
    }
}

fn materialize(duals: &DualPotentials, threshold: usize) -> Result<Vec<f64>> {
    let (ns, nt) = (duals.source.len(), duals.target.len());
    let n = ns.max(nt);
    if n > threshold {
        return Err(Error::AllocationRefused { n, threshold });
    }
    let mut m = vec![0.0; ns * nt];
    exec::for_each_chunk_mut(&mut m, ns, |j, row| {
        for (i, v) in row.iter_mut().enumerate() {
            *v = duals.log_kernel_in_sample(i, j).exp();
        }
    });
    Ok(m)
}

/// Materializes `M[j][i] = k(x_i, y_j)`; each row and column sums to one
/// after weighting by the cloud weights.
pub fn kernel_matrix(duals: &DualPotentials, dense_threshold: usize) -> Result<DMatrix<f64>> {
    let (ns, nt) = (duals.source.len(), duals.target.len());
    let m = materialize(duals, dense_threshold)?;
    Ok(DMatrix::from_fn(nt, ns, |j, i| m[j * ns + i]))
}

/// Single kernel value at arbitrary points (in-sample values come from the stored potentials).
pub fn kernel_evaluate(duals: &DualPotentials, x: &[f64], y: &[f64]) -> Result<f64> {
    duals.kernel(x, y)
}
