//! Kernel distances, convergence slopes and spectral diagnostics.

use std::fmt;
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::cost::{wrap_delta, CostSpec};
use crate::error::{Error, Result};
use crate::exec;
use crate::operator::{build_operator, OperatorOptions, Variant};
use crate::ot::EvalMode;
use crate::spectral::Spectrum;
use crate::synth::{chunk_rng, sample_torus_shift, wrapped_gaussian_density, TorusShiftSpec, CHUNK};

type C = Complex64;

/// Smallest grid resolution accepted by [`l2_distance_grid`].
pub const MIN_GRID: usize = 64;
/// Smallest sample count accepted by [`l2_distance_mc`].
pub const MIN_MC: usize = 1000;
pub const DEFAULT_MC: usize = 100_000;
/// Resolution of the population regularized kernel proxy.
pub const PROXY_RESOLUTION: usize = 512;

/// `sqrt(∫∫ (f − g)² dx dy)` over `[0,1)²` by the midpoint rule on a `resolution²` grid.
pub fn l2_distance_grid<F, G>(f: F, g: G, resolution: usize) -> Result<f64>
where
    F: Fn(f64, f64) -> f64 + Sync + Send,
    G: Fn(f64, f64) -> f64 + Sync + Send,
{
    if resolution < MIN_GRID {
        return Err(Error::InvalidInput(format!(
            "grid resolution {resolution} below {MIN_GRID}"
        )));
    }
    let h = 1.0 / resolution as f64;
    let rows = exec::map_indices(resolution, |i| {
        let x = (i as f64 + 0.5) * h;
        (0..resolution)
            .map(|j| {
                let y = (j as f64 + 0.5) * h;
                let d = f(x, y) - g(x, y);
                d * d
            })
            .sum::<f64>()
    });
    Ok((rows.iter().sum::<f64>() * h * h).sqrt())
}

/// Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
}

/// Jackknife estimate of `sqrt(mean(s))` for non-negative samples `s`.
pub fn jackknife_sqrt_mean(s: &[f64]) -> McEstimate {
    let m = s.len();
    let total: f64 = s.iter().sum();
    let value = (total / m as f64).sqrt();
    if m < 2 {
        return McEstimate {
            value,
            stderr: f64::NAN,
        };
    }
    let loo: Vec<f64> = s
        .iter()
        .map(|v| ((total - v) / (m - 1) as f64).max(0.0).sqrt())
        .collect();
    let mean = loo.iter().sum::<f64>() / m as f64;
    let var = loo.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() * (m - 1) as f64 / m as f64;
    McEstimate {
        value,
        stderr: var.sqrt(),
    }
}

/// `sqrt(E (f − g)²)` under pairs drawn by `sampler`, with jackknife standard error.
pub fn l2_distance_mc<F, G, S>(f: F, g: G, sampler: S, m: usize, seed: u64) -> Result<McEstimate>
where
    F: Fn(&[f64], &[f64]) -> f64 + Sync + Send,
    G: Fn(&[f64], &[f64]) -> f64 + Sync + Send,
    S: Fn(&mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) + Sync + Send,
{
    if m < MIN_MC {
        return Err(Error::InvalidInput(format!(
            "need at least {MIN_MC} Monte-Carlo samples, got {m}"
        )));
    }
    let sq: Vec<f64> = exec::map_indices(m.div_ceil(CHUNK), |c| {
        let mut rng = chunk_rng(seed, c as u64);
        let len = CHUNK.min(m - c * CHUNK);
        (0..len)
            .map(|_| {
                let (x, y) = sampler(&mut rng);
                let d = f(&x, &y) - g(&x, &y);
                d * d
            })
            .collect::<Vec<f64>>()
    })
    .into_iter()
    .flatten()
    .collect();
    Ok(jackknife_sqrt_mean(&sq))
}

/// Draws `(x, y)` uniformly from the `d`-torus squared.
pub fn uniform_torus_pairs(d: usize) -> impl Fn(&mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) + Sync + Send {
    move |rng| {
        let x = (0..d).map(|_| rng.random::<f64>()).collect();
        let y = (0..d).map(|_| rng.random::<f64>()).collect();
        (x, y)
    }
}

/// Population regularized kernel `t^ε = k^ε * t * k^ε` of a torus shift system,
/// tabulated on a uniform grid of the displacement `y₀ − x₀`.
///
/// On an equispaced grid the entropic self-transport potentials are constant, so
/// the blur kernel is `exp(−d(δ)²/ε)` normalized to unit grid mass.
#[derive(Debug, Clone)]
pub struct RegularizedTorusKernel {
    epsilon: f64,
    profile: Vec<f64>,
}

impl RegularizedTorusKernel {
    pub fn new(spec: &TorusShiftSpec, epsilon: f64, resolution: usize) -> Result<Self> {
        spec.validate()?;
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidEpsilon(epsilon));
        }
        if resolution < MIN_GRID {
            return Err(Error::InvalidInput(format!(
                "proxy resolution {resolution} below {MIN_GRID}"
            )));
        }
        let m = resolution;
        let h = 1.0 / m as f64;
        let raw = |delta: f64| {
            let d = wrap_delta(delta, 1.0);
            (-d * d / epsilon).exp()
        };
        let z: f64 = (0..m).map(|a| raw(a as f64 * h)).sum::<f64>() * h;
        let blur = |delta: f64| raw(delta) / z;
        let p = |delta: f64| -> f64 {
            spec.shifts
                .iter()
                .zip(&spec.weights)
                .map(|(s, w)| w * wrapped_gaussian_density(delta - s, spec.sigma))
                .sum()
        };
        let grid: Vec<f64> = (0..m).map(|j| j as f64 * h).collect();
        let once: Vec<f64> = if spec.sigma == 0.0 {
            grid.iter()
                .map(|d| {
                    spec.shifts
                        .iter()
                        .zip(&spec.weights)
                        .map(|(s, w)| w * blur(d - s))
                        .sum()
                })
                .collect()
        } else {
            exec::map_indices(m, |j| grid.iter().map(|a| blur(grid[j] - a) * p(*a)).sum::<f64>() * h)
        };
        let profile = exec::map_indices(m, |j| {
            grid.iter().zip(&once).map(|(a, v)| v * blur(grid[j] - a)).sum::<f64>() * h
        });
        Ok(Self { epsilon, profile })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn resolution(&self) -> usize {
        self.profile.len()
    }

    /// Kernel as a function of the displacement, by periodic linear interpolation.
    pub fn at_delta(&self, delta: f64) -> f64 {
        let m = self.profile.len();
        let s = delta.rem_euclid(1.0) * m as f64;
        let j = (s.floor() as usize).min(m - 1);
        let t = s - j as f64;
        (1.0 - t) * self.profile[j] + t * self.profile[(j + 1) % m]
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        self.at_delta(y[0] - x[0])
    }
}

/// Which pair of kernels a distance compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelPair {
    TrueVsRegularized,
    RegularizedVsEmpirical,
    TrueVsEmpirical,
}

impl KernelPair {
    pub fn label(&self) -> &'static str {
        match self {
            Self::TrueVsRegularized => "t~t_eps",
            Self::RegularizedVsEmpirical => "t_eps~t_eps_N",
            Self::TrueVsEmpirical => "t~t_eps_N",
        }
    }
}

impl fmt::Display for KernelPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum DistanceMethod {
    GridQuadrature { resolution: usize },
    MonteCarlo { samples: usize },
}

/// One row of a convergence study; `value` and `stderr` aggregate `seed_count` replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelDistanceReport {
    pub pair: KernelPair,
    pub dim: usize,
    pub epsilon: f64,
    pub sigma: f64,
    pub n: Option<usize>,
    pub value: f64,
    pub stderr: f64,
    pub seed_count: usize,
    pub method: DistanceMethod,
}

impl KernelDistanceReport {
    /// Pair column of the CSV; torus dimensions above one are appended as `/d=<d>`.
    pub fn pair_label(&self) -> String {
        if self.dim <= 1 {
            self.pair.label().to_owned()
        } else {
            format!("{}/d={}", self.pair.label(), self.dim)
        }
    }
}

pub fn write_reports_csv<W: Write>(w: W, reports: &[KernelDistanceReport]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["pair", "epsilon", "sigma", "N", "value", "stderr", "seed_count"])?;
    for r in reports {
        out.write_record([
            r.pair_label(),
            r.epsilon.to_string(),
            r.sigma.to_string(),
            r.n.map(|n| n.to_string()).unwrap_or_default(),
            r.value.to_string(),
            r.stderr.to_string(),
            r.seed_count.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Grid-quadrature `‖t − t^ε‖` for a one-dimensional torus shift system.
pub fn true_vs_regularized(spec: &TorusShiftSpec, epsilon: f64, resolution: usize) -> Result<f64> {
    if spec.sigma == 0.0 {
        return Err(Error::InvalidInput("the true kernel is singular for sigma = 0".into()));
    }
    let reg = RegularizedTorusKernel::new(spec, epsilon, PROXY_RESOLUTION.max(resolution))?;
    l2_distance_grid(
        |x, y| crate::synth::true_kernel_torus(spec, &[x], &[y]),
        |x, y| reg.at_delta(y - x),
        resolution,
    )
}

/// Monte-Carlo `‖t^ε − t^ε_N‖` for one sample of `n` pairs drawn with `seed`.
pub fn regularized_vs_empirical(
    spec: &TorusShiftSpec,
    reg: &RegularizedTorusKernel,
    n: usize,
    seed: u64,
    samples: usize,
    opts: &OperatorOptions,
) -> Result<McEstimate> {
    let data = sample_torus_shift(spec, n, seed)?;
    let opts = opts.clone().with_representation(EvalMode::Lazy);
    let op = build_operator(
        &data,
        &CostSpec::unit_torus(spec.d),
        reg.epsilon(),
        Variant::Stationary,
        &opts,
    )?;
    l2_distance_mc(
        |x, y| reg.eval(x, y),
        |x, y| op.kernel_evaluate(x, y).unwrap_or(f64::NAN),
        uniform_torus_pairs(spec.d),
        samples,
        seed ^ 0x6d63_5f73_616d_706c,
    )
}

/// Least-squares fit of `log v = a + b log n` with a 95% interval on the slope `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

pub fn loglog_slope(n: &[f64], v: &[f64]) -> Result<SlopeFit> {
    if n.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: n.len(),
            found: v.len(),
        });
    }
    if n.len() < 3 {
        return Err(Error::InvalidInput("slope fit needs at least three points".into()));
    }
    if n.iter().chain(v).any(|a| !(*a > 0.0 && a.is_finite())) {
        return Err(Error::InvalidInput("slope fit needs positive finite values".into()));
    }
    let x: Vec<f64> = n.iter().map(|a| a.ln()).collect();
    let y: Vec<f64> = v.iter().map(|a| a.ln()).collect();
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let stderr = (rss / (k - 2.0) / sxx).sqrt();
    let q = StudentsT::new(0.0, 1.0, k - 2.0)
        .map_err(|e| Error::InvalidInput(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(SlopeFit {
        slope,
        intercept,
        stderr,
        ci_low: slope - q * stderr,
        ci_high: slope + q * stderr,
    })
}

/// Mean and 95% t-interval half width of replicate values.
pub fn mean_ci95(values: &[f64]) -> (f64, f64) {
    let k = values.len();
    let mean = values.iter().sum::<f64>() / k as f64;
    if k < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1) as f64;
    let q = StudentsT::new(0.0, 1.0, (k - 1) as f64)
        .map(|t| t.inverse_cdf(0.975))
        .unwrap_or(f64::NAN);
    (mean, q * (var / k as f64).sqrt())
}

/// `|arg λ₂| / lag`, the rotation per unit lag read off the subdominant eigenvalue.
///
/// The absolute value picks the member of a conjugate pair with non-negative
/// imaginary part.
pub fn phase_of_subdominant(spectrum: &Spectrum, lag: usize, floor: f64) -> Result<f64> {
    if lag == 0 {
        return Err(Error::InvalidInput("lag must be at least 1".into()));
    }
    let l2 = *spectrum.eigenvalues.get(1).ok_or(Error::IndexOutOfRange {
        index: 2,
        len: spectrum.eigenvalues.len(),
    })?;
    if !(l2.norm() > floor) {
        return Err(Error::EigenvalueTooSmall {
            modulus: l2.norm(),
            floor,
        });
    }
    Ok(l2.arg().abs() / lag as f64)
}

/// Norm of the `L²(μ_N)` projection of `u` onto `span{e_k, e_{−k}}`, relative to `‖u‖`,
/// where `e_k(x) = exp(2πikx)` on the samples `x ∈ [0,1)`.
pub fn fourier_mode_match(u: &[C], x: &[f64], k: i64) -> Result<f64> {
    if u.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: u.len(),
        });
    }
    if u.is_empty() {
        return Err(Error::NoData);
    }
    let n = u.len() as f64;
    let mode = |kk: i64| -> Vec<C> {
        x.iter()
            .map(|t| C::from_polar(1.0, std::f64::consts::TAU * kk as f64 * t))
            .collect()
    };
    let inner = |a: &[C], b: &[C]| -> C { a.iter().zip(b).map(|(p, q)| p.conj() * q).sum::<C>() / n };
    let unorm2 = inner(u, u).re;
    if unorm2 == 0.0 {
        return Ok(0.0);
    }
    let ep = mode(k);
    if k == 0 {
        return Ok(inner(&ep, u).norm() / unorm2.sqrt());
    }
    let em = mode(-k);
    // Gram matrix of the two modes and the projection energy b^H G^{-1} b
    let g01 = inner(&ep, &em);
    let (b0, b1) = (inner(&ep, u), inner(&em, u));
    let det = 1.0 - g01.norm_sqr();
    let energy = if det < 1e-12 {
        b0.norm_sqr()
    } else {
        let inv = [C::new(1.0, 0.0) / det, -g01 / det, -g01.conj() / det];
        (b0.conj() * (inv[0] * b0 + inv[1] * b1) + b1.conj() * (inv[2] * b0 + inv[0] * b1)).re
    };
    Ok((energy.max(0.0) / unorm2).sqrt().min(1.0))
}

/// Largest circular correlation `|mean exp(i(a ∓ b))|` between two angle samples,
/// maximized over orientation.
pub fn circular_association(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()) as f64;
    let same: C = a.iter().zip(b).map(|(p, q)| C::from_polar(1.0, p - q)).sum::<C>() / n;
    let flip: C = a.iter().zip(b).map(|(p, q)| C::from_polar(1.0, p + q)).sum::<C>() / n;
    same.norm().max(flip.norm())
}

/// Least-squares fit `u(x) ≈ A cos(2πkx − φ)`; returns `(A, φ)`.
pub fn fit_mode(u: &[f64], x: &[f64], k: i64) -> (f64, f64) {
    let w = std::f64::consts::TAU * k as f64;
    let (mut cc, mut ss, mut cs, mut uc, mut us) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (v, t) in u.iter().zip(x) {
        let (s, c) = (w * t).sin_cos();
        cc += c * c;
        ss += s * s;
        cs += c * s;
        uc += v * c;
        us += v * s;
    }
    let det = cc * ss - cs * cs;
    let a = (uc * ss - us * cs) / det;
    let b = (us * cc - uc * cs) / det;
    (a.hypot(b), b.atan2(a))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_trivial_values() {
        assert_eq!(l2_distance_grid(|_, _| 1.0, |_, _| 1.0, 64).unwrap(), 0.0);
        assert!((l2_distance_grid(|_, _| 1.0, |_, _| 0.0, 64).unwrap() - 1.0).abs() < 1e-14);
        assert!(l2_distance_grid(|_, _| 1.0, |_, _| 0.0, 32).is_err());
    }

    #[test]
    fn grid_matches_closed_form() {
        // ∫∫ (x − y)² = 1/6
        let v = l2_distance_grid(|x, _| x, |_, y| y, 256).unwrap();
        assert!((v - (1.0f64 / 6.0).sqrt()).abs() < 1e-4);
    }

    #[test]
    fn mc_of_equal_kernels_is_zero() {
        let e = l2_distance_mc(|_, _| 0.5, |_, _| 0.5, uniform_torus_pairs(1), 2000, 1).unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.stderr, 0.0);
        assert!(l2_distance_mc(|_, _| 0.5, |_, _| 0.5, uniform_torus_pairs(1), 10, 1).is_err());
    }

    #[test]
    fn jackknife_matches_delta_method() {
        // for sqrt of a mean the jackknife agrees with sd(s) / (2 sqrt(mean) sqrt(m))
        let s: Vec<f64> = (0..4000).map(|i| ((i * 7919) % 1000) as f64 / 1000.0).collect();
        let e = jackknife_sqrt_mean(&s);
        let m = s.len() as f64;
        let mean = s.iter().sum::<f64>() / m;
        let sd = (s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
        let delta = sd / (2.0 * mean.sqrt() * m.sqrt());
        assert!((e.stderr - delta).abs() < 0.01 * delta);
    }

    #[test]
    fn slope_recovers_power_law() {
        let n = [100.0, 200.0, 400.0, 800.0, 1600.0];
        let v: Vec<f64> = n.iter().map(|a: &f64| 3.0 * a.powf(-0.5)).collect();
        let fit = loglog_slope(&n, &v).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!((fit.intercept - 3.0f64.ln()).abs() < 1e-12);
        assert!(fit.ci_low <= fit.slope && fit.slope <= fit.ci_high);
    }

    #[test]
    fn fourier_match_trivial_cases() {
        let x: Vec<f64> = (0..600)
            .map(|i| ((i * 389) % 600) as f64 / 600.0 + 1e-4 * (i % 7) as f64)
            .collect();
        let u: Vec<C> = x
            .iter()
            .map(|t| C::from_polar(1.0, std::f64::consts::TAU * t))
            .collect();
        assert!((fourier_mode_match(&u, &x, 1).unwrap() - 1.0).abs() < 1e-10);
        assert!(fourier_mode_match(&u, &x, 2).unwrap() < 0.05);
        let c: Vec<C> = x
            .iter()
            .map(|t| C::new((std::f64::consts::TAU * (t + 0.13)).cos(), 0.0))
            .collect();
        assert!((fourier_mode_match(&c, &x, 1).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn shift_operator_phase() {
        let s = Spectrum::from_values(vec![
            C::new(1.0, 0.0),
            C::from_polar(0.9, -1.2),
            C::from_polar(0.9, 1.2),
        ]);
        assert!((phase_of_subdominant(&s, 1, 1e-3).unwrap() - 1.2).abs() < 1e-14);
        assert!((phase_of_subdominant(&s, 2, 1e-3).unwrap() - 0.6).abs() < 1e-14);
        let id = Spectrum::from_values(vec![C::new(1.0, 0.0), C::new(1.0, 0.0)]);
        assert_eq!(phase_of_subdominant(&id, 1, 1e-3).unwrap(), 0.0);
        let tiny = Spectrum::from_values(vec![C::new(1.0, 0.0), C::new(1e-5, 0.0)]);
        assert!(matches!(
            phase_of_subdominant(&tiny, 1, 1e-3),
            Err(Error::EigenvalueTooSmall { .. })
        ));
    }

    #[test]
    fn proxy_preserves_mass_and_converges_in_resolution() {
        let spec = TorusShiftSpec::mixture(0.05);
        let a = RegularizedTorusKernel::new(&spec, 0.01, 512).unwrap();
        let b = RegularizedTorusKernel::new(&spec, 0.01, 1024).unwrap();
        let mass: f64 = a.profile.iter().sum::<f64>() / 512.0;
        assert!((mass - 1.0).abs() < 1e-10);
        let diff = l2_distance_grid(|x, y| a.at_delta(y - x), |x, y| b.at_delta(y - x), 256).unwrap();
        assert!(diff < 1e-3, "{diff}");
    }

    #[test]
    fn mode_fit_recovers_amplitude_and_phase() {
        let x: Vec<f64> = (0..50).map(|i| i as f64 / 50.0).collect();
        let u: Vec<f64> = x
            .iter()
            .map(|t| 1.5 * (std::f64::consts::TAU * 2.0 * t - 0.4).cos())
            .collect();
        let (a, phi) = fit_mode(&u, &x, 2);
        assert!((a - 1.5).abs() < 1e-12 && (phi - 0.4).abs() < 1e-12);
    }

    #[test]
    fn circular_association_is_orientation_free() {
        let a: Vec<f64> = (0..100).map(|i| i as f64 * 0.0628).collect();
        let b: Vec<f64> = a.iter().map(|t| 0.7 - t).collect();
        assert!((circular_association(&a, &b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn report_csv_layout() {
        let r = KernelDistanceReport {
            pair: KernelPair::RegularizedVsEmpirical,
            dim: 2,
            epsilon: 0.1,
            sigma: 0.05,
            n: Some(100),
            value: 0.3,
            stderr: 0.01,
            seed_count: 20,
            method: DistanceMethod::MonteCarlo { samples: 1000 },
        };
        let mut buf = Vec::new();
        write_reports_csv(&mut buf, &[r]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(
            s,
            "pair,epsilon,sigma,N,value,stderr,seed_count\nt_eps~t_eps_N/d=2,0.1,0.05,100,0.3,0.01,20\n"
        );
    }
}
