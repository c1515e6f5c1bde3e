//! Log-domain Sinkhorn iterations with geometric ε-scaling.

use std::sync::Arc;

use crate::cloud::PointCloud;
use crate::cost::CostSpec;
use crate::error::{Error, Result};
use crate::exec;

use super::duals::DualPotentials;
use super::options::SolverOptions;

/// Cost matrices with at most this many entries are cached between iterations.
const COST_CACHE_LIMIT: usize = 1 << 24;
/// Residual accepted before moving on from an intermediate ε-stage.
const STAGE_TOL: f64 = 1e-3;

struct Problem<'a> {
    source: &'a PointCloud,
    target: &'a PointCloud,
    cost: &'a CostSpec,
    log_w_source: Vec<f64>,
    log_w_target: Vec<f64>,
    /// `c(x_i, y_j)` row-major over sources.
    cache: Option<Vec<f64>>,
    /// Transposed copy, only when source and target differ.
    cache_t: Option<Vec<f64>>,
}

impl<'a> Problem<'a> {
    fn new(source: &'a PointCloud, target: &'a PointCloud, cost: &'a CostSpec, same: bool) -> Self {
        let (ns, nt) = (source.len(), target.len());
        let cache = (ns * nt <= COST_CACHE_LIMIT).then(|| {
            let mut c = vec![0.0; ns * nt];
            exec::for_each_chunk_mut(&mut c, nt, |i, row| {
                let x = source.point(i);
                for (j, v) in row.iter_mut().enumerate() {
                    *v = cost.eval(x, target.point(j));
                }
            });
            c
        });
        let cache_t = match (&cache, same) {
            (Some(c), false) => {
                let mut t = vec![0.0; ns * nt];
                exec::for_each_chunk_mut(&mut t, ns, |j, row| {
                    for (i, v) in row.iter_mut().enumerate() {
                        *v = c[i * nt + j];
                    }
                });
                Some(t)
            }
            _ => None,
        };
        Self {
            source,
            target,
            cost,
            log_w_source: source.weights().iter().map(|w| w.ln()).collect(),
            log_w_target: target.weights().iter().map(|w| w.ln()).collect(),
            cache,
            cache_t,
        }
    }

    /// `out_i = −ε log Σ_j τ_j exp((β_j − c(x_i, y_j))/ε)`
    fn softmin_over_targets(&self, eps: f64, beta: &[f64], out: &mut [f64]) {
        let inv = 1.0 / eps;
        let shifts: Vec<f64> = beta
            .iter()
            .zip(&self.log_w_target)
            .map(|(b, lw)| lw + b * inv)
            .collect();
        let nt = self.target.len();
        match &self.cache {
            Some(c) => exec::fill_indexed(out, |i| -eps * lse_row(&shifts, &c[i * nt..(i + 1) * nt], inv)),
            None => exec::fill_indexed(out, |i| {
                let x = self.source.point(i);
                -eps * lse_row_with(&shifts, inv, |j| self.cost.eval(x, self.target.point(j)))
            }),
        }
    }

    /// `out_j = −ε log Σ_i w_i exp((α_i − c(x_i, y_j))/ε)`
    fn softmin_over_sources(&self, eps: f64, alpha: &[f64], out: &mut [f64]) {
        let inv = 1.0 / eps;
        let shifts: Vec<f64> = alpha
            .iter()
            .zip(&self.log_w_source)
            .map(|(a, lw)| lw + a * inv)
            .collect();
        let ns = self.source.len();
        match self.cache_t.as_ref().or(self.cache.as_ref()) {
            Some(c) => exec::fill_indexed(out, |j| -eps * lse_row(&shifts, &c[j * ns..(j + 1) * ns], inv)),
            None => exec::fill_indexed(out, |j| {
                let y = self.target.point(j);
                -eps * lse_row_with(&shifts, inv, |i| self.cost.eval(self.source.point(i), y))
            }),
        }
    }
}

#[inline]
fn lse_row(shifts: &[f64], cost_row: &[f64], inv_eps: f64) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for (s, c) in shifts.iter().zip(cost_row) {
        m = m.max(s - c * inv_eps);
    }
    let mut acc = 0.0;
    for (s, c) in shifts.iter().zip(cost_row) {
        acc += (s - c * inv_eps - m).exp();
    }
    m + acc.ln()
}

#[inline]
fn lse_row_with(shifts: &[f64], inv_eps: f64, cost: impl Fn(usize) -> f64) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for (j, s) in shifts.iter().enumerate() {
        m = m.max(s - cost(j) * inv_eps);
    }
    let mut acc = 0.0;
    for (j, s) in shifts.iter().enumerate() {
        acc += (s - cost(j) * inv_eps - m).exp();
    }
    m + acc.ln()
}

/// `Σ_i w_i |exp((a_i − b_i)/ε) − 1|`: relative L¹ marginal error of the
/// potential `a` given its soft-min update `b`.
fn residual(weights: &[f64], a: &[f64], b: &[f64], eps: f64) -> f64 {
    weights
        .iter()
        .zip(a.iter().zip(b))
        .map(|(w, (x, y))| w * (((x - y) / eps).exp() - 1.0).abs())
        .sum()
}

struct StageOutcome {
    converged: bool,
    iterations: usize,
    residual: f64,
}

/// Plain iterations observed before the contraction rate is estimated.
const RELAX_WARMUP: usize = 16;
/// Window over which contraction rates are measured.
const RATE_WINDOW: usize = 8;
/// Relaxed iterations between re-estimates of the plain rate.
const RELAX_WINDOW: usize = 50;
const MAX_OMEGA: f64 = 1.95;
/// Consecutive residual increases after which over-relaxation is abandoned.
const MAX_RISES: usize = 25;

fn relax(x: &mut [f64], target: &[f64], omega: f64) {
    for (v, t) in x.iter_mut().zip(target) {
        *v += omega * (t - *v);
    }
}

fn optimal_omega(rate: f64) -> f64 {
    (2.0 / (1.0 + (1.0 - rate.clamp(0.0, 1.0)).sqrt())).min(MAX_OMEGA)
}

/// Plain rate implied by the rate `r` observed at step `ω` below the optimum,
/// from `√r = (ω√η + √(ω²η − 4(ω − 1)))/2`.
fn implied_plain_rate(r: f64, omega: f64) -> f64 {
    ((r + omega - 1.0) / (omega * r.sqrt())).powi(2)
}

/// Alternating soft-min updates. With `overrelax`, the step becomes
/// `α ← α + ω (S(β) − α)` with `ω = 2 / (1 + √(1 − η))` for the plain rate `η`,
/// first measured on plain iterations and raised whenever the relaxed rate shows
/// it was underestimated. Convergence is always confirmed on a plain pair.
fn alternate(
    p: &Problem,
    eps: f64,
    alpha: &mut Vec<f64>,
    beta: &mut [f64],
    tol: f64,
    max_iter: usize,
    overrelax: bool,
) -> StageOutcome {
    let mut next = vec![0.0; alpha.len()];
    let mut b = vec![0.0; beta.len()];
    p.softmin_over_targets(eps, beta, alpha);
    let mut res = f64::INFINITY;
    let mut omega = 1.0;
    let mut warmup = Vec::with_capacity(RELAX_WARMUP + 1);
    let mut window = (0, f64::NAN);
    let mut rises = 0;
    for it in 1..=max_iter {
        p.softmin_over_sources(eps, alpha, &mut b);
        if omega > 1.0 {
            relax(beta, &b, omega);
        } else {
            beta.copy_from_slice(&b);
        }
        p.softmin_over_targets(eps, beta, &mut next);
        let prev = res;
        res = residual(p.source.weights(), alpha, &next, eps);
        if !res.is_finite() {
            break;
        }
        if res < tol {
            if omega > 1.0 {
                p.softmin_over_sources(eps, alpha, beta);
                p.softmin_over_targets(eps, beta, &mut next);
                res = residual(p.source.weights(), alpha, &next, eps);
            }
            if res < tol {
                return StageOutcome {
                    converged: true,
                    iterations: it,
                    residual: res,
                };
            }
        }
        if overrelax && omega == 1.0 && warmup.len() <= RELAX_WARMUP {
            warmup.push(res);
            if warmup.len() > RELAX_WARMUP {
                let rate = (res / warmup[RELAX_WARMUP - RATE_WINDOW]).powf(1.0 / RATE_WINDOW as f64);
                if rate > 0.0 && rate < 1.0 {
                    omega = optimal_omega(rate);
                    window = (it, res);
                }
            }
        } else if omega > 1.0 {
            rises = if res > prev { rises + 1 } else { 0 };
            if rises > MAX_RISES {
                omega = 1.0;
            } else if it - window.0 == RELAX_WINDOW {
                let r = (res / window.1).powf(1.0 / RELAX_WINDOW as f64);
                if r > omega - 1.0 && r < 1.0 {
                    omega = omega.max(optimal_omega(implied_plain_rate(r, omega)));
                }
                window = (it, res);
            }
        }
        if omega > 1.0 {
            relax(alpha, &next, omega);
        } else {
            std::mem::swap(alpha, &mut next);
        }
    }
    StageOutcome {
        converged: false,
        iterations: max_iter,
        residual: res,
    }
}

fn symmetric_average(p: &Problem, eps: f64, alpha: &mut [f64], tol: f64, max_iter: usize) -> StageOutcome {
    let mut s = vec![0.0; alpha.len()];
    let mut res = f64::INFINITY;
    for it in 1..=max_iter {
        p.softmin_over_targets(eps, alpha, &mut s);
        res = residual(p.source.weights(), alpha, &s, eps);
        if !res.is_finite() {
            break;
        }
        if res < tol {
            return StageOutcome {
                converged: true,
                iterations: it,
                residual: res,
            };
        }
        for (a, si) in alpha.iter_mut().zip(&s) {
            *a = 0.5 * (*a + si);
        }
    }
    StageOutcome {
        converged: false,
        iterations: max_iter,
        residual: res,
    }
}

fn check_inputs(
    source: &PointCloud,
    target: &PointCloud,
    cost: &CostSpec,
    epsilon: f64,
    opts: &SolverOptions,
) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    if source.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: source.dim(),
            found: target.dim(),
        });
    }
    if !cost.check_dim(source.dim()) {
        return Err(Error::InvalidInput(format!(
            "cost {} does not match dimension {}",
            cost.description(),
            source.dim()
        )));
    }
    opts.validate()
}

fn stages(p: &Problem, epsilon: f64, opts: &SolverOptions, warm: bool) -> Vec<f64> {
    if warm {
        return vec![epsilon];
    }
    let eps0 = p.cost.max_cost_bound(p.source, p.target);
    opts.schedule(eps0, epsilon)
}

/// Entropic OT between two clouds. The returned potentials satisfy both
/// marginal constraints to `opts.tol` in relative L¹ and are gauge-fixed so
/// that `Σ w_i α_i = Σ τ_j β_j`.
pub fn solve_sinkhorn(
    source: Arc<PointCloud>,
    target: Arc<PointCloud>,
    cost: &CostSpec,
    epsilon: f64,
    opts: &SolverOptions,
) -> Result<DualPotentials> {
    solve_sinkhorn_impl(source, target, cost, epsilon, opts, None)
}

/// As [`solve_sinkhorn`], initialized from potentials of a previous solve on
/// the same clouds (usually at a larger ε). No ε-scaling is applied.
pub fn solve_sinkhorn_warm(warm: &DualPotentials, epsilon: f64, opts: &SolverOptions) -> Result<DualPotentials> {
    solve_sinkhorn_impl(
        warm.source.clone(),
        warm.target.clone(),
        &warm.cost.clone(),
        epsilon,
        opts,
        Some((&warm.alpha, &warm.beta)),
    )
}

fn solve_sinkhorn_impl(
    source: Arc<PointCloud>,
    target: Arc<PointCloud>,
    cost: &CostSpec,
    epsilon: f64,
    opts: &SolverOptions,
    init: Option<(&[f64], &[f64])>,
) -> Result<DualPotentials> {
    check_inputs(&source, &target, cost, epsilon, opts)?;
    let p = Problem::new(&source, &target, cost, Arc::ptr_eq(&source, &target));
    let (mut alpha, mut beta) = match init {
        Some((a, b)) => (a.to_vec(), b.to_vec()),
        None => (vec![0.0; source.len()], vec![0.0; target.len()]),
    };
    let schedule = stages(&p, epsilon, opts, init.is_some());
    let mut outcome = None;
    for (s, &eps) in schedule.iter().enumerate() {
        let last = s + 1 == schedule.len();
        let tol = if last { opts.tol } else { opts.tol.max(STAGE_TOL) };
        outcome = Some(alternate(
            &p,
            eps,
            &mut alpha,
            &mut beta,
            tol,
            opts.max_iter,
            opts.overrelax,
        ));
    }
    let outcome = outcome.expect("schedule is never empty");
    if !outcome.converged {
        return Err(Error::NonConvergence {
            iterations: outcome.iterations,
            residual: outcome.residual,
        });
    }
    let t = 0.5 * (dot(source.weights(), &alpha) - dot(target.weights(), &beta));
    alpha.iter_mut().for_each(|a| *a -= t);
    beta.iter_mut().for_each(|b| *b += t);
    drop(p);
    Ok(DualPotentials::from_parts(
        alpha,
        beta,
        epsilon,
        cost.clone(),
        source,
        target,
        false,
        outcome.iterations,
        outcome.residual,
    ))
}

/// Symmetric entropic self-transport of a cloud onto itself.
///
/// Runs the averaging iteration `α ← ½(α + S(α))`; if that fails to meet the
/// tolerance, solves the asymmetric problem and symmetrizes it by the shift
/// `ᾱ = α − t/2` with `β = α − t`.
pub fn solve_self_transport(
    cloud: Arc<PointCloud>,
    cost: &CostSpec,
    epsilon: f64,
    opts: &SolverOptions,
) -> Result<DualPotentials> {
    solve_self_impl(cloud, cost, epsilon, opts, None)
}

/// Warm-started variant of [`solve_self_transport`].
pub fn solve_self_transport_warm(warm: &DualPotentials, epsilon: f64, opts: &SolverOptions) -> Result<DualPotentials> {
    if !warm.symmetric {
        return Err(Error::InvalidInput("warm start requires symmetric potentials".into()));
    }
    solve_self_impl(
        warm.source.clone(),
        &warm.cost.clone(),
        epsilon,
        opts,
        Some(&warm.alpha),
    )
}

fn solve_self_impl(
    cloud: Arc<PointCloud>,
    cost: &CostSpec,
    epsilon: f64,
    opts: &SolverOptions,
    init: Option<&[f64]>,
) -> Result<DualPotentials> {
    check_inputs(&cloud, &cloud, cost, epsilon, opts)?;
    let p = Problem::new(&cloud, &cloud, cost, true);
    let mut alpha = init.map_or_else(|| vec![0.0; cloud.len()], <[f64]>::to_vec);
    let schedule = stages(&p, epsilon, opts, init.is_some());
    let mut outcome = None;
    for (s, &eps) in schedule.iter().enumerate() {
        let last = s + 1 == schedule.len();
        let tol = if last { opts.tol } else { opts.tol.max(STAGE_TOL) };
        outcome = Some(symmetric_average(&p, eps, &mut alpha, tol, opts.max_iter));
    }
    let mut outcome = outcome.expect("schedule is never empty");
    if !outcome.converged {
        let mut a = alpha.clone();
        let mut b = alpha.clone();
        let alt = alternate(&p, epsilon, &mut a, &mut b, opts.tol, opts.max_iter, opts.overrelax);
        if !alt.converged {
            return Err(Error::NonConvergence {
                iterations: outcome.iterations + alt.iterations,
                residual: alt.residual.min(outcome.residual),
            });
        }
        let t = dot(cloud.weights(), &a) - dot(cloud.weights(), &b);
        alpha = a.iter().map(|v| v - 0.5 * t).collect();
        let mut s = vec![0.0; alpha.len()];
        p.softmin_over_targets(epsilon, &alpha, &mut s);
        let res = residual(cloud.weights(), &alpha, &s, epsilon);
        if !(res < opts.tol) {
            return Err(Error::NonConvergence {
                iterations: outcome.iterations + alt.iterations,
                residual: res,
            });
        }
        outcome = StageOutcome {
            converged: true,
            iterations: outcome.iterations + alt.iterations,
            residual: res,
        };
    }
    drop(p);
    Ok(DualPotentials::from_parts(
        alpha.clone(),
        alpha,
        epsilon,
        cost.clone(),
        cloud.clone(),
        cloud,
        true,
        outcome.iterations,
        outcome.residual,
    ))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
