use std::collections::HashMap;
use std::sync::Arc;

use crate::cloud::PointCloud;
use crate::cost::CostSpec;
use crate::error::{Error, Result};

/// Exact-coordinate lookup of stored sample points.
#[derive(Debug, Clone, Default)]
pub(crate) struct PointIndex {
    map: HashMap<Vec<u64>, usize>,
}

impl PointIndex {
    pub fn build(cloud: &PointCloud) -> Self {
        let mut map = HashMap::with_capacity(cloud.len());
        for (i, p) in cloud.points().enumerate() {
            map.entry(key(p)).or_insert(i);
        }
        Self { map }
    }

    pub fn find(&self, p: &[f64]) -> Option<usize> {
        self.map.get(&key(p)).copied()
    }
}

fn key(p: &[f64]) -> Vec<u64> {
    // +0.0 and -0.0 are the same point
    p.iter().map(|c| (c + 0.0).to_bits()).collect()
}

/// Sinkhorn dual pair `(α, β)` between a source and a target cloud.
///
/// `α` lives on source points and `β` on target points. Every entropic kernel
/// value is derived from these together with `ε` and the cost; off-sample
/// values are obtained through the Sinkhorn fixed-point formula.
#[derive(Debug, Clone)]
pub struct DualPotentials {
    pub(crate) alpha: Vec<f64>,
    pub(crate) beta: Vec<f64>,
    pub(crate) epsilon: f64,
    pub(crate) cost: CostSpec,
    pub(crate) source: Arc<PointCloud>,
    pub(crate) target: Arc<PointCloud>,
    pub(crate) symmetric: bool,
    pub(crate) iterations: usize,
    pub(crate) residual: f64,
    source_index: PointIndex,
    target_index: PointIndex,
    log_w_source: Vec<f64>,
    log_w_target: Vec<f64>,
}

impl DualPotentials {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        alpha: Vec<f64>,
        beta: Vec<f64>,
        epsilon: f64,
        cost: CostSpec,
        source: Arc<PointCloud>,
        target: Arc<PointCloud>,
        symmetric: bool,
        iterations: usize,
        residual: f64,
    ) -> Self {
        let source_index = PointIndex::build(&source);
        let target_index = if symmetric {
            source_index.clone()
        } else {
            PointIndex::build(&target)
        };
        let log_w_source = source.weights().iter().map(|w| w.ln()).collect();
        let log_w_target = target.weights().iter().map(|w| w.ln()).collect();
        Self {
            alpha,
            beta,
            epsilon,
            cost,
            source,
            target,
            symmetric,
            iterations,
            residual,
            source_index,
            target_index,
            log_w_source,
            log_w_target,
        }
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn cost(&self) -> &CostSpec {
        &self.cost
    }

    pub fn source(&self) -> &PointCloud {
        &self.source
    }

    pub fn target(&self) -> &PointCloud {
        &self.target
    }

    pub fn source_arc(&self) -> &Arc<PointCloud> {
        &self.source
    }

    pub fn target_arc(&self) -> &Arc<PointCloud> {
        &self.target
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Iterations spent in the final ε-stage.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Max of source/target relative L¹ marginal residuals at termination.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Returns a copy with `t` added to `α` and subtracted from `β`.
    pub fn shifted(&self, t: f64) -> Self {
        let mut out = self.clone();
        out.alpha.iter_mut().for_each(|a| *a += t);
        out.beta.iter_mut().for_each(|b| *b -= t);
        out.symmetric = self.symmetric && t == 0.0;
        out
    }

    fn check_dim(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.source.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.source.dim(),
                found: p.len(),
            });
        }
        Ok(())
    }

    /// In-sample log-kernel `(α_i + β_j − c(x_i, y_j))/ε`.
    #[inline]
    pub(crate) fn log_kernel_in_sample(&self, i: usize, j: usize) -> f64 {
        let c = self.cost.eval(self.source.point(i), self.target.point(j));
        (self.alpha[i] + self.beta[j] - c) / self.epsilon
    }

    /// `α(x)`: stored value for a source sample, otherwise the soft-min over the target cloud.
    pub fn source_potential_at(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        if let Some(i) = self.source_index.find(x) {
            return Ok(self.alpha[i]);
        }
        Ok(self.extend_source(x))
    }

    /// `β(y)`: stored value for a target sample, otherwise the soft-min over the source cloud.
    pub fn target_potential_at(&self, y: &[f64]) -> Result<f64> {
        self.check_dim(y)?;
        if let Some(j) = self.target_index.find(y) {
            return Ok(self.beta[j]);
        }
        Ok(self.extend_target(y))
    }

    fn extend_source(&self, x: &[f64]) -> f64 {
        let eps = self.epsilon;
        let lse = log_sum_exp(
            (0..self.target.len())
                .map(|j| self.log_w_target[j] + (self.beta[j] - self.cost.eval(x, self.target.point(j))) / eps),
        );
        -eps * lse
    }

    fn extend_target(&self, y: &[f64]) -> f64 {
        let eps = self.epsilon;
        let lse = log_sum_exp(
            (0..self.source.len())
                .map(|i| self.log_w_source[i] + (self.alpha[i] - self.cost.eval(self.source.point(i), y)) / eps),
        );
        -eps * lse
    }

    /// `k(x, y) = exp((α(x) + β(y) − c(x, y))/ε)` at arbitrary points.
    pub fn kernel(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let a = self.source_potential_at(x)?;
        let b = self.target_potential_at(y)?;
        Ok(((a + b - self.cost.eval(x, y)) / self.epsilon).exp())
    }

    /// `k(x, y_j)` for every target sample `y_j`, plus `α(x)`.
    pub fn kernel_to_targets(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_dim(x)?;
        let eps = self.epsilon;
        if let Some(i) = self.source_index.find(x) {
            let row = (0..self.target.len())
                .map(|j| self.log_kernel_in_sample(i, j).exp())
                .collect();
            return Ok((self.alpha[i], row));
        }
        // k(x, y_j) = exp(e_j) / Σ_l τ_l exp(e_l) with e_j = (β_j − c(x, y_j))/ε
        let e: Vec<f64> = (0..self.target.len())
            .map(|j| (self.beta[j] - self.cost.eval(x, self.target.point(j))) / eps)
            .collect();
        let lse = log_sum_exp(e.iter().zip(&self.log_w_target).map(|(a, b)| a + b));
        Ok((-eps * lse, e.into_iter().map(|v| (v - lse).exp()).collect()))
    }

    /// `k(x_i, y)` for every source sample `x_i`, plus `β(y)`.
    pub fn kernel_from_sources(&self, y: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_dim(y)?;
        let eps = self.epsilon;
        if let Some(j) = self.target_index.find(y) {
            let col = (0..self.source.len())
                .map(|i| self.log_kernel_in_sample(i, j).exp())
                .collect();
            return Ok((self.beta[j], col));
        }
        let e: Vec<f64> = (0..self.source.len())
            .map(|i| (self.alpha[i] - self.cost.eval(self.source.point(i), y)) / eps)
            .collect();
        let lse = log_sum_exp(e.iter().zip(&self.log_w_source).map(|(a, b)| a + b));
        Ok((-eps * lse, e.into_iter().map(|v| (v - lse).exp()).collect()))
    }

    /// Weighted marginal sums `Σ_j τ_j k(x_i, y_j)` (per source) and `Σ_i w_i k(x_i, y_j)` (per target).
    pub fn marginal_sums(&self) -> (Vec<f64>, Vec<f64>) {
        let (ns, nt) = (self.source.len(), self.target.len());
        let row = crate::exec::map_indices(ns, |i| {
            (0..nt)
                .map(|j| self.target.weight(j) * self.log_kernel_in_sample(i, j).exp())
                .sum()
        });
        let col = crate::exec::map_indices(nt, |j| {
            (0..ns)
                .map(|i| self.source.weight(i) * self.log_kernel_in_sample(i, j).exp())
                .sum()
        });
        (row, col)
    }

    /// Relative L¹ residuals of both marginals, computed from scratch.
    pub fn marginal_residuals(&self) -> (f64, f64) {
        let (row, col) = self.marginal_sums();
        let rs = row
            .iter()
            .zip(self.source.weights())
            .map(|(r, w)| w * (r - 1.0).abs())
            .sum();
        let cs = col
            .iter()
            .zip(self.target.weights())
            .map(|(c, w)| w * (c - 1.0).abs())
            .sum();
        (rs, cs)
    }

    /// Log soft-min mass `Σ_i w_i exp((α_i − c(x_i, y))/ε)` at an arbitrary point, in log form.
    /// Equals `−β(y)/ε`; small values flag points far from the source support.
    pub fn log_source_mass(&self, y: &[f64]) -> Result<f64> {
        Ok(-self.target_potential_at(y)? / self.epsilon)
    }
}

/// Numerically stable `log Σ exp(v)`.
pub fn log_sum_exp<I>(vals: I) -> f64
where
    I: Iterator<Item = f64> + Clone,
{
    let m = vals.clone().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + vals.map(|v| (v - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_matches_naive_and_handles_large_values() {
        let v = [0.1, -2.0, 3.0];
        let naive = v.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(v.iter().copied()) - naive).abs() < 1e-14);
        let big = [1000.0, 1000.0];
        assert!((log_sum_exp(big.iter().copied()) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn point_index_treats_signed_zero_as_equal() {
        let c = PointCloud::uniform(1, vec![0.0, 1.0]).unwrap();
        let idx = PointIndex::build(&c);
        assert_eq!(idx.find(&[-0.0]), Some(0));
        assert_eq!(idx.find(&[0.5]), None);
    }
}
