//! Synthetic systems with known ground truth.
//!
//! Samplers split the work into chunks of [`CHUNK`] pairs, each driven by its own
//! ChaCha8 stream seeded by a splitmix64 step from `(seed, chunk index)`, so the
//! output depends only on the seed and never on the number of threads.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::data::{LabelColumn, TransitionData};
use crate::error::{Error, Result};
use crate::exec;

/// Pairs drawn per independent random stream.
pub const CHUNK: usize = 4096;

/// Periods summed on each side when evaluating the wrapped Gaussian density.
pub const WRAP_TERMS: i32 = 10;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Random stream for chunk `c` of a run seeded with `seed`.
pub fn chunk_rng(seed: u64, c: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(c)))
}

fn chunked<T, F>(n: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> T + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    exec::map_indices(chunks, |c| {
        let mut rng = chunk_rng(seed, c as u64);
        let len = CHUNK.min(n - c * CHUNK);
        (0..len).map(|_| f(&mut rng)).collect::<Vec<T>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Draw from `Ñ(m, σ²)`, the Gaussian pushed to `[0, 1)` by reduction mod 1.
pub fn wrapped_gaussian(rng: &mut ChaCha8Rng, m: f64, sigma: f64) -> f64 {
    (m + sigma * normal(rng)).rem_euclid(1.0)
}

/// Density of `Ñ(0, σ²)` at `delta` on the unit circle, truncated at ±[`WRAP_TERMS`] periods.
pub fn wrapped_gaussian_density(delta: f64, sigma: f64) -> f64 {
    let d = delta - delta.round();
    if sigma == 0.0 {
        return if d == 0.0 { f64::INFINITY } else { 0.0 };
    }
    let c = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    (-WRAP_TERMS..=WRAP_TERMS)
        .map(|k| {
            let z = (d + k as f64) / sigma;
            c * (-0.5 * z * z).exp()
        })
        .sum()
}

/// Shift-and-blur dynamics on the `d`-torus: the first coordinate moves by a
/// mixture of wrapped Gaussians, the remaining ones are redrawn uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorusShiftSpec {
    pub d: usize,
    pub shifts: Vec<f64>,
    pub weights: Vec<f64>,
    pub sigma: f64,
}

impl TorusShiftSpec {
    /// `Y | X = x ~ ½ Ñ(x, σ²) + ½ Ñ(x + 0.3, σ²)`.
    pub fn mixture(sigma: f64) -> Self {
        Self {
            d: 1,
            shifts: vec![0.0, 0.3],
            weights: vec![0.5, 0.5],
            sigma,
        }
    }

    /// `Y | X = x ~ Ñ(x + shift, σ²)`.
    pub fn single(shift: f64, sigma: f64) -> Self {
        Self {
            d: 1,
            shifts: vec![shift],
            weights: vec![1.0],
            sigma,
        }
    }

    pub fn with_dim(mut self, d: usize) -> Self {
        self.d = d;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidInput("torus dimension must be at least 1".into()));
        }
        if self.shifts.is_empty() || self.shifts.len() != self.weights.len() {
            return Err(Error::InvalidInput("need one weight per shift".into()));
        }
        if self.shifts.iter().any(|s| !(0.0..1.0).contains(s)) {
            return Err(Error::InvalidInput("shifts must lie in [0, 1)".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidInput(format!("invalid sigma {}", self.sigma)));
        }
        let total: f64 = self.weights.iter().sum();
        if self.weights.iter().any(|w| *w < 0.0) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidWeights(
                "mixture weights must be non-negative and sum to 1".into(),
            ));
        }
        Ok(())
    }

    fn component(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (m, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return m;
            }
        }
        self.weights.len() - 1
    }
}

pub fn sample_torus_shift(spec: &TorusShiftSpec, n: usize, seed: u64) -> Result<TransitionData> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::NoData);
    }
    let d = spec.d;
    let pairs = chunked(n, seed, |rng| {
        let mut x = Vec::with_capacity(d);
        let mut y = Vec::with_capacity(d);
        let x0 = rng.random::<f64>();
        let m = spec.component(rng.random::<f64>());
        x.push(x0);
        y.push(wrapped_gaussian(rng, x0 + spec.shifts[m], spec.sigma));
        for _ in 1..d {
            x.push(rng.random::<f64>());
            y.push(rng.random::<f64>());
        }
        (x, y)
    });
    let mut xs = Vec::with_capacity(n * d);
    let mut ys = Vec::with_capacity(n * d);
    for (x, y) in pairs {
        xs.extend(x);
        ys.extend(y);
    }
    TransitionData::new(d, xs, ys)
}

/// Transition density of the torus system w.r.t. `μ ⊗ ν` (both uniform).
pub fn true_kernel_torus(spec: &TorusShiftSpec, x: &[f64], y: &[f64]) -> f64 {
    spec.shifts
        .iter()
        .zip(&spec.weights)
        .map(|(s, w)| w * wrapped_gaussian_density(y[0] - x[0] - s, spec.sigma))
        .sum()
}

/// A shift by `shift` on the circle seen through a random distorted, rotated
/// embedding into `R^d`, observed with isotropic Gaussian noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddedRingSpec {
    pub d: usize,
    pub tau: f64,
    pub sigma: f64,
    #[serde(default = "default_ring_shift")]
    pub shift: f64,
    /// Seed for the Fourier coefficients and the rotation; the sample seed is used when absent.
    #[serde(default)]
    pub geometry_seed: Option<u64>,
}

fn default_ring_shift() -> f64 {
    0.2
}

/// Number of Fourier modes in each distortion component.
pub const RING_MODES: usize = 10;

impl EmbeddedRingSpec {
    pub fn new(d: usize, sigma: f64) -> Self {
        Self {
            d,
            tau: 0.2,
            sigma,
            shift: default_ring_shift(),
            geometry_seed: None,
        }
    }
}

/// Fixed geometry of an [`EmbeddedRingSpec`].
#[derive(Debug, Clone)]
pub struct RingEmbedding {
    d: usize,
    tau: f64,
    /// `a[n][k-1]` and `b[n][k-1]`, already divided by `k`.
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    rotation: DMatrix<f64>,
}

impl RingEmbedding {
    pub fn new(spec: &EmbeddedRingSpec, seed: u64) -> Result<Self> {
        if spec.d < 2 {
            return Err(Error::InvalidInput("ring embedding needs d ≥ 2".into()));
        }
        let d = spec.d;
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(spec.geometry_seed.unwrap_or(seed) ^ 0x52_49_4e_47));
        let mut coeffs = || -> Vec<Vec<f64>> {
            (0..d)
                .map(|_| (1..=RING_MODES).map(|k| normal(&mut rng) / k as f64).collect())
                .collect()
        };
        let a = coeffs();
        let b = coeffs();
        let rotation = random_rotation(d, &mut rng);
        Ok(Self {
            d,
            tau: spec.tau,
            a,
            b,
            rotation,
        })
    }

    pub fn rotation(&self) -> &DMatrix<f64> {
        &self.rotation
    }

    pub fn embed(&self, theta: f64) -> Vec<f64> {
        let tau2 = self.tau * self.tau;
        let two_pi = std::f64::consts::TAU;
        let raw: Vec<f64> = (0..self.d)
            .map(|n| {
                let f: f64 = (0..RING_MODES)
                    .map(|k| {
                        let w = two_pi * (k + 1) as f64 * theta;
                        self.a[n][k] * w.cos() + self.b[n][k] * w.sin()
                    })
                    .sum();
                let base = match n {
                    0 => (two_pi * theta).cos(),
                    1 => (two_pi * theta).sin(),
                    _ => 0.0,
                };
                base + if n < 2 { tau2 * f } else { self.tau * f }
            })
            .collect();
        (0..self.d)
            .map(|r| (0..self.d).map(|c| self.rotation[(r, c)] * raw[c]).sum())
            .collect()
    }
}

/// Haar-distributed rotation: QR of a Gaussian matrix with sign-fixed diagonal, reflected into `SO(d)`.
pub fn random_rotation(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| normal(rng));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for c in 0..d {
        if r[(c, c)] < 0.0 {
            q.column_mut(c).neg_mut();
        }
    }
    if q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    q
}

/// Latent label names attached by [`sample_embedded_ring`].
pub const LATENT_X: &str = "latent_x";
pub const LATENT_Y: &str = "latent_y";

/// Ring samples; the latent circle coordinates travel as `latent_x`, `latent_y` labels.
pub fn sample_embedded_ring(spec: &EmbeddedRingSpec, n: usize, seed: u64) -> Result<TransitionData> {
    if n == 0 {
        return Err(Error::NoData);
    }
    if !(spec.sigma >= 0.0) || !(spec.tau >= 0.0) {
        return Err(Error::InvalidInput("sigma and tau must be non-negative".into()));
    }
    let emb = RingEmbedding::new(spec, seed)?;
    let d = spec.d;
    let rows = chunked(n, seed, |rng| {
        let tx = rng.random::<f64>();
        let ty = (tx + spec.shift).rem_euclid(1.0);
        let mut x = emb.embed(tx);
        let mut y = emb.embed(ty);
        x.iter_mut().for_each(|v| *v += spec.sigma * normal(rng));
        y.iter_mut().for_each(|v| *v += spec.sigma * normal(rng));
        (x, y, tx, ty)
    });
    let mut xs = Vec::with_capacity(n * d);
    let mut ys = Vec::with_capacity(n * d);
    let mut lx = Vec::with_capacity(n);
    let mut ly = Vec::with_capacity(n);
    for (x, y, tx, ty) in rows {
        xs.extend(x);
        ys.extend(y);
        lx.push(tx);
        ly.push(ty);
    }
    TransitionData::new(d, xs, ys)?.with_labels(vec![
        LabelColumn {
            name: LATENT_X.into(),
            values: lx,
        },
        LabelColumn {
            name: LATENT_Y.into(),
            values: ly,
        },
    ])
}

/// Noisy rotation `z_{t+1} = z_t + shift + σ ξ_t (mod 1)` on the circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotatingShiftSpec {
    pub shift: f64,
    pub sigma: f64,
}

/// Trajectory of `len` states, one per row, starting from a uniform draw.
pub fn sample_rotating_trajectory(spec: &RotatingShiftSpec, len: usize, seed: u64) -> Result<PointCloud> {
    if len == 0 {
        return Err(Error::NoData);
    }
    let mut rng = chunk_rng(seed, 0);
    let mut z = rng.random::<f64>();
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(z);
        z = wrapped_gaussian(&mut rng, z + spec.shift, spec.sigma);
    }
    PointCloud::uniform(1, out)
}
