//! Reference methods: Ulam's box discretization, 1-D quantile transport and the
//! single- versus double-blur counterexample.

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cloud::PointCloud;
use crate::cost::CostSpec;
use crate::data::TransitionData;
use crate::error::{Error, Result};
use crate::linalg;
use crate::operator::{build_operator, OperatorOptions, Variant};

/// Equal-sized hypercubes of side `h` anchored at `origin`; only occupied cells are indexed.
#[derive(Debug, Clone)]
pub struct BoxPartition {
    origin: Vec<f64>,
    h: f64,
    index: HashMap<Vec<i64>, usize>,
    keys: Vec<Vec<i64>>,
}

impl BoxPartition {
    fn new(origin: Vec<f64>, h: f64) -> Self {
        Self {
            origin,
            h,
            index: HashMap::new(),
            keys: Vec::new(),
        }
    }

    pub fn key(&self, p: &[f64]) -> Vec<i64> {
        p.iter()
            .zip(&self.origin)
            .map(|(x, o)| ((x - o) / self.h).floor() as i64)
            .collect()
    }

    fn insert(&mut self, p: &[f64]) -> usize {
        let k = self.key(p);
        if let Some(&i) = self.index.get(&k) {
            return i;
        }
        let i = self.keys.len();
        self.index.insert(k.clone(), i);
        self.keys.push(k);
        i
    }

    pub fn cell_of(&self, p: &[f64]) -> Option<usize> {
        self.index.get(&self.key(p)).copied()
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn side(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn center(&self, cell: usize) -> Vec<f64> {
        self.keys[cell]
            .iter()
            .zip(&self.origin)
            .map(|(&k, o)| o + (k as f64 + 0.5) * self.h)
            .collect()
    }
}

/// Transition counts between partition cells.
///
/// Rows are the cells hit by some `x_i`, columns all occupied cells (cells of
/// `x` first, in the same order, then cells hit only by `y`). Every row sums to one.
#[derive(Debug, Clone)]
pub struct UlamOperator {
    partition: BoxPartition,
    rows: usize,
    matrix: DMatrix<f64>,
}

impl UlamOperator {
    pub fn partition(&self) -> &BoxPartition {
        &self.partition
    }

    /// `M[a][b]`, rectangular (`x`-cells × all cells).
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Restriction to transitions between `x`-cells; sub-stochastic where mass leaves them.
    pub fn square_block(&self) -> DMatrix<f64> {
        self.matrix.columns(0, self.rows).into_owned()
    }

    pub fn cell_count(&self) -> usize {
        self.rows
    }

    pub fn centers(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|c| self.partition.center(c)).collect()
    }

    /// The `k` eigenvalues of largest modulus of the square block.
    pub fn eigenvalues(&self, k: usize) -> Vec<Complex64> {
        let mut v = linalg::dense_eigenvalues(&self.square_block());
        v.truncate(k);
        v
    }
}

/// Ulam's estimate with cells of side `h`, grid anchored at the data bounding-box minimum.
pub fn build_ulam(data: &TransitionData, h: f64) -> Result<UlamOperator> {
    if data.is_empty() {
        return Err(Error::NoData);
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!("cell side must be positive, got {h}")));
    }
    let (x, y) = (data.x(), data.y());
    let origin: Vec<f64> = x
        .bounding_box()
        .iter()
        .zip(y.bounding_box())
        .map(|(a, b)| a.0.min(b.0))
        .collect();
    let mut part = BoxPartition::new(origin, h);
    let from: Vec<usize> = x.points().map(|p| part.insert(p)).collect();
    let rows = part.len();
    let to: Vec<usize> = y.points().map(|p| part.insert(p)).collect();
    let mut m = DMatrix::<f64>::zeros(rows, part.len());
    let mut counts = vec![0usize; rows];
    for (&a, &b) in from.iter().zip(&to) {
        m[(a, b)] += 1.0;
        counts[a] += 1;
    }
    for (a, &c) in counts.iter().enumerate() {
        m.row_mut(a).iter_mut().for_each(|v| *v /= c as f64);
    }
    Ok(UlamOperator {
        partition: part,
        rows,
        matrix: m,
    })
}

/// Target interval of one source atom under monotone transport onto `U[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileCell {
    pub index: usize,
    pub lo: f64,
    pub hi: f64,
}

impl QuantileCell {
    /// Density of the optimal plan w.r.t. `U[0,1] ⊗ μ_N`, `1/w_i` on the interval.
    pub fn density(&self, x: f64) -> f64 {
        if x > self.lo && x < self.hi {
            1.0 / (self.hi - self.lo)
        } else {
            0.0
        }
    }
}

/// Monotone (quantile) assignment of a 1-D weighted cloud to intervals of `[0, 1]`.
/// Entry `i` belongs to sample `i`; ties keep input order.
pub fn ot_1d_quantile(source: &PointCloud) -> Result<Vec<QuantileCell>> {
    if source.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: source.dim(),
        });
    }
    let mut order: Vec<usize> = (0..source.len()).collect();
    order.sort_by(|&a, &b| source.point(a)[0].total_cmp(&source.point(b)[0]));
    let mut out = vec![
        QuantileCell {
            index: 0,
            lo: 0.0,
            hi: 0.0
        };
        source.len()
    ];
    let mut acc = 0.0;
    let last = order.len().saturating_sub(1);
    for (rank, &i) in order.iter().enumerate() {
        let lo = acc;
        acc += source.weight(i);
        let hi = if rank == last { 1.0 } else { acc };
        out[i] = QuantileCell { index: i, lo, hi };
    }
    Ok(out)
}

/// Blur weight of the two-point self-transport kernel, `1/(1 + e^{1/ε})`.
pub fn varsigma(epsilon: f64) -> f64 {
    1.0 / (1.0 + (1.0 / epsilon).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterexampleResult {
    pub l2_error: f64,
    pub sigma_const: f64,
}

/// Samples of the system `X ~ U[0,1]`, `Y ~ ½(δ₀ + δ₁)` independent of `X`.
pub fn counterexample_data(n: usize, seed: u64) -> Result<TransitionData> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        x.push(rng.random::<f64>());
        y.push(if rng.random::<bool>() { 1.0 } else { 0.0 });
    }
    TransitionData::new(1, x, y)
}

/// Piecewise-constant single-blur kernel: `2(1−ς)` where `y` equals the label of the
/// sample owning `x`'s quantile interval, `2ς` elsewhere.
pub fn single_blur_kernel(data: &TransitionData, cells: &[QuantileCell], epsilon: f64, x: f64, y: f64) -> f64 {
    let s = varsigma(epsilon);
    let owner = cells
        .iter()
        .find(|c| x >= c.lo && x < c.hi)
        .or_else(|| cells.iter().max_by(|a, b| a.hi.total_cmp(&b.hi)))
        .map(|c| c.index)
        .unwrap_or(0);
    if data.y().point(owner)[0] == y {
        2.0 * (1.0 - s)
    } else {
        2.0 * s
    }
}

/// `‖1 − t̃^A_N‖` in `L²(μ⊗ν)` for the single-blur estimate, integrated exactly over
/// the quantile intervals (with `ν_N = ν`, so the blur of `ν` is the two-point kernel).
pub fn single_blur_counterexample(n: usize, epsilon: f64, seed: u64) -> Result<CounterexampleResult> {
    if n == 0 {
        return Err(Error::NoData);
    }
    let data = counterexample_data(n, seed)?;
    let cells = ot_1d_quantile(data.x())?;
    let s = varsigma(epsilon);
    let mut acc = 0.0;
    for c in &cells {
        let yi = data.y().point(c.index)[0];
        let sq: f64 = [0.0, 1.0]
            .iter()
            .map(|&y| {
                let t = if y == yi { 2.0 * (1.0 - s) } else { 2.0 * s };
                0.5 * (1.0 - t) * (1.0 - t)
            })
            .sum();
        acc += (c.hi - c.lo) * sq;
    }
    Ok(CounterexampleResult {
        l2_error: acc.sqrt(),
        sigma_const: s,
    })
}

/// Monte-Carlo check of [`single_blur_counterexample`]: mean of `(1 − t̃^A_N)²` over
/// `m` draws from `μ⊗ν`, square-rooted.
pub fn single_blur_error_mc(n: usize, epsilon: f64, seed: u64, m: usize) -> Result<f64> {
    let data = counterexample_data(n, seed)?;
    let cells = ot_1d_quantile(data.x())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut acc = 0.0;
    for _ in 0..m {
        let x = rng.random::<f64>();
        let y = if rng.random::<bool>() { 1.0 } else { 0.0 };
        let t = single_blur_kernel(&data, &cells, epsilon, x, y);
        acc += (1.0 - t) * (1.0 - t);
    }
    Ok((acc / m as f64).sqrt())
}

/// `‖1 − t_N‖` in `L²(μ⊗ν)` for the double-blur (non-stationary) estimate on the
/// same system, with a midpoint rule of `grid` nodes in `x` and the two atoms of `ν`.
pub fn double_blur_error(n: usize, epsilon: f64, seed: u64, grid: usize, opts: &OperatorOptions) -> Result<f64> {
    let data = counterexample_data(n, seed)?;
    let op = build_operator(
        &data,
        &CostSpec::SquaredEuclidean,
        epsilon,
        Variant::Nonstationary,
        opts,
    )?;
    let mut acc = 0.0;
    for g in 0..grid {
        let x = (g as f64 + 0.5) / grid as f64;
        for y in [0.0, 1.0] {
            let t = op.kernel_evaluate(&[x], &[y])?;
            acc += 0.5 * (1.0 - t) * (1.0 - t);
        }
    }
    Ok((acc / grid as f64).sqrt())
}
