//! Dominant eigenpairs of real, possibly non-normal, linear maps.
//!
//! The iterative path is a Krylov–Schur restarted Arnoldi method in complex
//! arithmetic. Small problems are handled by a full Schur decomposition of
//! the explicitly assembled matrix.

use nalgebra::{ComplexField, DMatrix, Dyn, Schur};
use num_complex::Complex64;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec;

type C = Complex64;

/// A square real operator applied to complex vectors.
pub trait LinearMap: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[C]) -> Result<Vec<C>>;
}

/// Dense real matrix as a [`LinearMap`].
#[derive(Debug, Clone)]
pub struct DenseMap(pub DMatrix<f64>);

impl LinearMap for DenseMap {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn apply(&self, x: &[C]) -> Result<Vec<C>> {
        let m = &self.0;
        if x.len() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.ncols(),
                found: x.len(),
            });
        }
        Ok(exec::map_indices(m.nrows(), |r| {
            let mut acc = C::zero();
            for (c, v) in x.iter().enumerate() {
                acc += v * m[(r, c)];
            }
            acc
        }))
    }
}

#[derive(Debug, Clone)]
pub struct EigOptions {
    /// Krylov subspace dimension; default `max(2k + 10, 40)`.
    pub subspace: Option<usize>,
    pub max_restarts: usize,
    /// Convergence threshold on the Krylov–Schur residual coupling.
    pub tol: f64,
    /// Largest acceptable explicit residual `‖A x − λ x‖₂` of a unit eigenvector.
    pub residual_tol: f64,
    pub seed: u64,
}

impl Default for EigOptions {
    fn default() -> Self {
        Self {
            subspace: None,
            max_restarts: 300,
            tol: 1e-12,
            residual_tol: 1e-8,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigPairs {
    /// Sorted by descending modulus, conjugate pairs adjacent with `Im ≥ 0` first.
    pub values: Vec<C>,
    /// Unit Euclidean norm.
    pub vectors: Vec<Vec<C>>,
    pub residuals: Vec<f64>,
    pub restarts: usize,
}

/// The `k` eigenvalues of largest modulus (one more if `k` would split a conjugate pair).
pub fn top_eigenpairs<A: LinearMap>(a: &A, k: usize, opts: &EigOptions) -> Result<EigPairs> {
    let n = a.dim();
    if k == 0 || n == 0 {
        return Err(Error::InvalidInput("need k ≥ 1 and a non-empty operator".into()));
    }
    let k = k.min(n);
    let m = opts.subspace.unwrap_or((2 * k + 10).max(40)).min(n);
    if m >= n || m < k + 2 {
        return finish(a, k, dense_path(a, k)?, opts);
    }
    match finish(a, k, krylov_schur(a, k, m, opts)?, opts) {
        // clustered moduli can outlast the restart budget
        Err(Error::EigensolverFailure { .. }) if n <= DENSE_FALLBACK_MAX => finish(a, k, dense_path(a, k)?, opts),
        Err(Error::EigensolverFailure { .. }) if 2 * m < n => {
            let wider = EigOptions {
                max_restarts: 2 * opts.max_restarts,
                ..opts.clone()
            };
            finish(a, k, krylov_schur(a, k, 2 * m, &wider)?, opts)
        }
        other => other,
    }
}

/// Largest dimension assembled densely when the Krylov iteration fails.
const DENSE_FALLBACK_MAX: usize = 2000;

fn finish<A: LinearMap>(a: &A, k: usize, found: (Vec<C>, Vec<Vec<C>>, usize), opts: &EigOptions) -> Result<EigPairs> {
    let (values, vectors, restarts) = found;
    let (values, vectors) = realify(values, vectors);
    let (values, vectors) = truncate_sorted(values, vectors, k);
    let residuals = explicit_residuals(a, &values, &vectors)?;
    if residuals.iter().any(|r| !(*r <= opts.residual_tol)) {
        return Err(Error::EigensolverFailure { residuals });
    }
    Ok(EigPairs {
        values,
        vectors,
        residuals,
        restarts,
    })
}

/// All eigenvalues of a real matrix, sorted like [`EigPairs::values`].
pub fn dense_eigenvalues(m: &DMatrix<f64>) -> Vec<C> {
    let mut v: Vec<C> = capped_schur(m.clone())
        .1
        .complex_eigenvalues()
        .iter()
        .copied()
        .collect();
    sort_values(&mut v);
    v
}

pub(crate) fn sort_values(v: &mut [C]) {
    v.sort_by(|a, b| order(*a, *b));
}

fn order(a: C, b: C) -> std::cmp::Ordering {
    let (ma, mb) = (a.norm(), b.norm());
    if (ma - mb).abs() > 1e-10 * ma.max(mb).max(1e-300) {
        return mb.partial_cmp(&ma).unwrap_or(std::cmp::Ordering::Equal);
    }
    b.im.partial_cmp(&a.im).unwrap_or(std::cmp::Ordering::Equal)
}

fn dense_path<A: LinearMap>(a: &A, k: usize) -> Result<(Vec<C>, Vec<Vec<C>>, usize)> {
    let n = a.dim();
    let mut mat = DMatrix::<C>::zeros(n, n);
    let mut e = vec![C::zero(); n];
    for i in 0..n {
        e[i] = C::new(1.0, 0.0);
        let col = a.apply(&e)?;
        e[i] = C::zero();
        for (r, v) in col.into_iter().enumerate() {
            mat[(r, i)] = v;
        }
    }
    let (mut q, mut t) = schur(mat);
    reorder(&mut t, &mut q);
    let want = wanted_count(&t, k);
    let y = triangular_eigenvectors(&t, want);
    let z = q.columns(0, want) * y;
    let values = (0..want).map(|i| t[(i, i)]).collect();
    let vectors = (0..want)
        .map(|i| normalized(z.column(i).iter().copied().collect()))
        .collect();
    Ok((values, vectors, 0))
}

fn krylov_schur<A: LinearMap>(a: &A, k: usize, m: usize, opts: &EigOptions) -> Result<(Vec<C>, Vec<Vec<C>>, usize)> {
    let n = a.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut basis: Vec<Vec<C>> = Vec::with_capacity(m + 1);
    basis.push(normalized(random_vector(&mut rng, n)));
    let mut h = DMatrix::<C>::zeros(m + 1, m);
    let mut p = 0;
    let mut restart = 0;
    loop {
        for j in p..m {
            let mut w = a.apply(&basis[j])?;
            let coeff = orthogonalize(&basis[..=j], &mut w);
            let beta = norm(&w);
            let scale = (coeff.iter().map(|c| c.norm_sqr()).sum::<f64>() + beta * beta).sqrt();
            for (i, c) in coeff.into_iter().enumerate() {
                h[(i, j)] = c;
            }
            if beta <= 1e-13 * scale.max(1e-300) {
                // invariant subspace: continue with a fresh orthogonal direction
                let mut r = random_vector(&mut rng, n);
                orthogonalize(&basis[..=j], &mut r);
                w = normalized(r);
                h[(j + 1, j)] = C::zero();
            } else {
                w.iter_mut().for_each(|x| *x /= beta);
                h[(j + 1, j)] = C::new(beta, 0.0);
            }
            if basis.len() > j + 1 {
                basis[j + 1] = w;
            } else {
                basis.push(w);
            }
        }

        let (mut q, mut t) = schur(h.view((0, 0), (m, m)).into_owned());
        reorder(&mut t, &mut q);
        let hm = h[(m, m - 1)];
        let b: Vec<C> = (0..m).map(|i| hm * q[(m - 1, i)]).collect();
        let want = wanted_count(&t, k);
        let coupling = b[..want].iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let scale = t[(0, 0)].norm().max(1.0);

        if coupling <= opts.tol * scale || restart >= opts.max_restarts {
            let y = triangular_eigenvectors(&t, want);
            let z = q.columns(0, want) * y;
            let values = (0..want).map(|i| t[(i, i)]).collect();
            let vectors = (0..want)
                .map(|i| normalized(combine(&basis[..m], z.column(i).iter().copied())))
                .collect();
            return Ok((values, vectors, restart));
        }

        let mut keep = (want + (m - want) / 2).clamp(want, m - 1);
        if splits_pair(&t, keep) {
            keep = if keep + 1 < m { keep + 1 } else { keep - 1 };
        }
        let new_basis: Vec<Vec<C>> = (0..keep)
            .map(|i| combine(&basis[..m], q.column(i).iter().copied()))
            .collect();
        let last = basis[m].clone();
        basis.clear();
        basis.extend(new_basis);
        basis.push(last);
        h.fill(C::zero());
        for c in 0..keep {
            for r in 0..=c {
                h[(r, c)] = t[(r, c)];
            }
            h[(keep, c)] = b[c];
        }
        p = keep;
        restart += 1;
    }
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<C> {
    (0..n).map(|_| C::new(rng.random::<f64>() - 0.5, 0.0)).collect()
}

fn norm(x: &[C]) -> f64 {
    x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn normalized(mut x: Vec<C>) -> Vec<C> {
    let s = norm(&x);
    if s > 0.0 {
        x.iter_mut().for_each(|c| *c /= s);
    }
    x
}

fn dot(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Classical Gram–Schmidt with one re-orthogonalization pass; returns the projection coefficients.
fn orthogonalize(basis: &[Vec<C>], w: &mut [C]) -> Vec<C> {
    let mut coeff = vec![C::zero(); basis.len()];
    for _ in 0..2 {
        let c: Vec<C> = basis.iter().map(|v| dot(v, w)).collect();
        for (v, ci) in basis.iter().zip(&c) {
            for (x, y) in w.iter_mut().zip(v) {
                *x -= ci * y;
            }
        }
        for (a, b) in coeff.iter_mut().zip(c) {
            *a += b;
        }
    }
    coeff
}

fn combine(basis: &[Vec<C>], coeffs: impl Iterator<Item = C>) -> Vec<C> {
    let mut out = vec![C::zero(); basis[0].len()];
    for (v, c) in basis.iter().zip(coeffs) {
        if c == C::zero() {
            continue;
        }
        for (o, x) in out.iter_mut().zip(v) {
            *o += c * x;
        }
    }
    out
}

/// Complex Schur form `S = Q T Q^H`.
/// QR sweeps allowed per row before a decomposition counts as stalled.
const SCHUR_SWEEPS_PER_ROW: usize = 30;
const SCHUR_ATTEMPTS: u64 = 4;

/// Schur decomposition with an iteration cap. Francis QR can stall on
/// permutation-like matrices; a stalled attempt is restarted on `p* m p` for a
/// random orthogonal `p`, which keeps the spectrum. Returns `p` when used.
fn capped_schur<T>(m: DMatrix<T>) -> (Option<DMatrix<T>>, Schur<T, Dyn>)
where
    T: ComplexField<RealField = f64>,
{
    let n = m.nrows();
    let cap = SCHUR_SWEEPS_PER_ROW * n.max(1);
    if let Some(s) = Schur::try_new(m.clone(), f64::EPSILON, cap) {
        return (None, s);
    }
    for attempt in 1..=SCHUR_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(attempt);
        let g = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        let p = g.qr().q().map(T::from_real);
        let rotated = p.adjoint() * &m * &p;
        // the last attempt runs uncapped
        let s = if attempt == SCHUR_ATTEMPTS {
            Some(Schur::new(rotated))
        } else {
            Schur::try_new(rotated, f64::EPSILON, cap)
        };
        if let Some(s) = s {
            return (Some(p), s);
        }
    }
    unreachable!()
}

fn schur(s: DMatrix<C>) -> (DMatrix<C>, DMatrix<C>) {
    let n = s.nrows();
    let (p, dec) = capped_schur(s);
    let (q, mut t) = dec.unpack();
    let q = match p {
        Some(p) => p * q,
        None => q,
    };
    for c in 0..n {
        for r in c + 1..n {
            t[(r, c)] = C::zero();
        }
    }
    (q, t)
}

fn before(a: C, b: C) -> bool {
    order(a, b) == std::cmp::Ordering::Less
}

/// Sorts the diagonal of `t` by descending modulus with unitary swaps.
fn reorder(t: &mut DMatrix<C>, q: &mut DMatrix<C>) {
    let n = t.nrows();
    for pos in 0..n {
        let mut best = pos;
        for i in pos + 1..n {
            if before(t[(i, i)], t[(best, best)]) {
                best = i;
            }
        }
        for i in (pos..best).rev() {
            swap_adjacent(t, q, i);
        }
    }
}

/// `(c, s)` with `[c s; −s̄ c]·[f; g] = [r; 0]`.
fn givens(f: C, g: C) -> (f64, C) {
    let (af, ag) = (f.norm(), g.norm());
    if ag == 0.0 {
        return (1.0, C::zero());
    }
    if af == 0.0 {
        return (0.0, g.conj() / ag);
    }
    let r = af.hypot(ag);
    (af / r, (f / af) * g.conj() / r)
}

/// Swaps diagonal entries `k` and `k + 1` of upper-triangular `t`.
fn swap_adjacent(t: &mut DMatrix<C>, q: &mut DMatrix<C>, k: usize) {
    let n = t.nrows();
    let (t11, t22) = (t[(k, k)], t[(k + 1, k + 1)]);
    if t11 == t22 {
        return;
    }
    let (c, s) = givens(t[(k, k + 1)], t22 - t11);
    // rows k, k+1 to the right of the block
    for j in k + 2..n {
        let (x, y) = (t[(k, j)], t[(k + 1, j)]);
        t[(k, j)] = x * c + s * y;
        t[(k + 1, j)] = y * c - s.conj() * x;
    }
    // columns k, k+1 above the block
    let sc = s.conj();
    for i in 0..k {
        let (x, y) = (t[(i, k)], t[(i, k + 1)]);
        t[(i, k)] = x * c + sc * y;
        t[(i, k + 1)] = y * c - sc.conj() * x;
    }
    t[(k, k)] = t22;
    t[(k + 1, k + 1)] = t11;
    for i in 0..q.nrows() {
        let (x, y) = (q[(i, k)], q[(i, k + 1)]);
        q[(i, k)] = x * c + sc * y;
        q[(i, k + 1)] = y * c - sc.conj() * x;
    }
}

fn is_conjugate(a: C, b: C) -> bool {
    let s = a.norm().max(1e-300);
    a.im.abs() > 1e-10 * s.max(1.0) && (a - b.conj()).norm() <= 1e-6 * s.max(1.0)
}

/// Whether cutting the sorted diagonal after `p` entries separates a conjugate pair.
fn splits_pair(t: &DMatrix<C>, p: usize) -> bool {
    p > 0 && p < t.nrows() && is_conjugate(t[(p - 1, p - 1)], t[(p, p)])
}

fn wanted_count(t: &DMatrix<C>, k: usize) -> usize {
    if splits_pair(t, k) {
        k + 1
    } else {
        k
    }
}

/// Eigenvectors of the leading `count` diagonal entries of upper-triangular `t`.
fn triangular_eigenvectors(t: &DMatrix<C>, count: usize) -> DMatrix<C> {
    let tnorm = t.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1e-300);
    let mut y = DMatrix::<C>::zeros(count, count);
    for i in 0..count {
        let lambda = t[(i, i)];
        let smin = (f64::EPSILON * lambda.norm()).max(f64::EPSILON * tnorm * 1e-3);
        y[(i, i)] = C::new(1.0, 0.0);
        for l in (0..i).rev() {
            let mut acc = C::zero();
            for j in l + 1..=i {
                acc += t[(l, j)] * y[(j, i)];
            }
            let mut d = t[(l, l)] - lambda;
            if d.norm() < smin {
                d = C::new(smin, 0.0);
            }
            y[(l, i)] = -acc / d;
        }
    }
    y
}

/// Enforces exact conjugate symmetry and returns real vectors for real eigenvalues.
fn realify(values: Vec<C>, vectors: Vec<Vec<C>>) -> (Vec<C>, Vec<Vec<C>>) {
    let n = values.len();
    let mut used = vec![false; n];
    let mut out_v = Vec::with_capacity(n + 1);
    let mut out_x = Vec::with_capacity(n + 1);
    for i in 0..n {
        if used[i] {
            continue;
        }
        used[i] = true;
        let lam = values[i];
        let s = lam.norm().max(1.0);
        let near_real = lam.im.abs() <= 1e-9 * s;
        let partner = (0..n)
            .filter(|&j| !used[j])
            .map(|j| (j, (values[j] - lam.conj()).norm()))
            .filter(|&(_, d)| d <= 1e-6 * s)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(j, _)| j);
        match (near_real, partner) {
            (true, Some(j)) => {
                // nearly double real eigenvalue: keep the spanned real subspace
                used[j] = true;
                let re: Vec<C> = vectors[i].iter().map(|c| C::new(c.re, 0.0)).collect();
                let mut im: Vec<C> = vectors[i].iter().map(|c| C::new(c.im, 0.0)).collect();
                let re = normalized(re);
                let proj = dot(&re, &im);
                im.iter_mut().zip(&re).for_each(|(x, r)| *x -= proj * r);
                let im = if norm(&im) > 1e-8 {
                    normalized(im)
                } else {
                    real_part(&vectors[j])
                };
                out_v.extend([C::new(lam.re, 0.0), C::new(values[j].re, 0.0)]);
                out_x.extend([re, im]);
            }
            (true, None) => {
                out_v.push(C::new(lam.re, 0.0));
                out_x.push(real_part(&vectors[i]));
            }
            (false, p) => {
                if let Some(j) = p {
                    used[j] = true;
                }
                let (lam, x) = if lam.im >= 0.0 {
                    (lam, vectors[i].clone())
                } else {
                    (lam.conj(), vectors[i].iter().map(|c| c.conj()).collect())
                };
                let xc: Vec<C> = x.iter().map(|c| c.conj()).collect();
                out_v.extend([lam, lam.conj()]);
                out_x.extend([x, xc]);
            }
        }
    }
    (out_v, out_x)
}

/// Rotates a (numerically) real eigenvector onto the real axis.
fn real_part(x: &[C]) -> Vec<C> {
    let pivot = x
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or(C::new(1.0, 0.0));
    let phase = if pivot.norm() > 0.0 {
        pivot.conj() / pivot.norm()
    } else {
        C::new(1.0, 0.0)
    };
    normalized(x.iter().map(|c| C::new((c * phase).re, 0.0)).collect())
}

fn truncate_sorted(values: Vec<C>, vectors: Vec<Vec<C>>, k: usize) -> (Vec<C>, Vec<Vec<C>>) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| order(values[a], values[b]));
    let mut keep = k.min(idx.len());
    if keep < idx.len() && keep > 0 && is_conjugate(values[idx[keep - 1]], values[idx[keep]]) {
        keep += 1;
    }
    let v = idx[..keep].iter().map(|&i| values[i]).collect();
    let x = idx[..keep].iter().map(|&i| vectors[i].clone()).collect();
    (v, x)
}

fn explicit_residuals<A: LinearMap>(a: &A, values: &[C], vectors: &[Vec<C>]) -> Result<Vec<f64>> {
    values
        .iter()
        .zip(vectors)
        .map(|(lam, x)| {
            let ax = a.apply(x)?;
            Ok(ax
                .iter()
                .zip(x)
                .map(|(p, q)| (p - lam * q).norm_sqr())
                .sum::<f64>()
                .sqrt())
        })
        .collect()
}
