//! Dominant spectra of transfer operator estimates.

use std::io::{Read, Write};
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cost::CostSpec;
use crate::data::{LabelColumn, TransitionData};
use crate::error::{Error, Result};
use crate::linalg::{self, EigOptions, LinearMap};
use crate::operator::{build_operator, build_operator_warm, OperatorOptions, TransferOperatorEstimate, Variant};

type C = Complex64;

/// Number of dominant pairs extracted when nothing else is requested.
pub const DEFAULT_K: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumKind {
    Eigen,
    Singular,
}

/// Dominant eigenpairs or singular triples.
///
/// `eigenfunctions[k]` holds values at the input samples with unit `L²(μ_N)`
/// norm. For singular spectra these are the right singular functions `φ_k`
/// and `left_functions[k]` holds `ψ_k` at the output samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub kind: SpectrumKind,
    pub epsilon: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub eigenvalues: Vec<C>,
    pub residuals: Vec<f64>,
    pub spurious: Vec<bool>,
    pub eigenfunctions: Vec<Vec<C>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left_functions: Option<Vec<Vec<C>>>,
}

impl Spectrum {
    /// Eigenvalue-only spectrum, e.g. from a dense baseline matrix.
    pub fn from_values(eigenvalues: Vec<C>) -> Self {
        let k = eigenvalues.len();
        Self {
            kind: SpectrumKind::Eigen,
            epsilon: f64::NAN,
            n: 0,
            eigenvalues,
            residuals: vec![0.0; k],
            spurious: vec![false; k],
            eigenfunctions: Vec::new(),
            left_functions: None,
        }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn moduli(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|l| l.norm()).collect()
    }

    pub fn to_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    pub fn from_json<R: Read>(r: R) -> Result<Self> {
        Ok(serde_json::from_reader(r)?)
    }
}

#[derive(Debug, Clone)]
pub struct SpectralOptions {
    pub eig: EigOptions,
    /// Participation ratio below which an eigenfunction is flagged as spurious.
    pub spurious_fraction: f64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            eig: EigOptions::default(),
            spurious_fraction: 0.005,
        }
    }
}

struct Forward<'a>(&'a TransferOperatorEstimate);

impl LinearMap for Forward<'_> {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn apply(&self, x: &[C]) -> Result<Vec<C>> {
        self.0.apply(x)
    }
}

struct Normal<'a>(&'a TransferOperatorEstimate);

impl LinearMap for Normal<'_> {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn apply(&self, x: &[C]) -> Result<Vec<C>> {
        let y = self.0.apply(x)?;
        self.0.apply_adjoint(&y)
    }
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!("need 1 ≤ k ≤ N, got k = {k}, N = {n}")));
    }
    Ok(())
}

fn normalize_weighted(x: &[C], w: &[f64]) -> Vec<C> {
    let s = x.iter().zip(w).map(|(c, w)| w * c.norm_sqr()).sum::<f64>().sqrt();
    if s == 0.0 {
        return x.to_vec();
    }
    x.iter().map(|c| c / s).collect()
}

/// Fraction of samples effectively carrying the function, `(E|u|²)² / E|u|⁴`.
pub fn participation(u: &[C], w: &[f64]) -> f64 {
    let m2: f64 = u.iter().zip(w).map(|(c, w)| w * c.norm_sqr()).sum();
    let m4: f64 = u.iter().zip(w).map(|(c, w)| w * c.norm_sqr().powi(2)).sum();
    if m4 == 0.0 {
        return 0.0;
    }
    m2 * m2 / m4
}

/// `k` eigenpairs of largest modulus of a stationary operator.
pub fn top_eigenpairs(op: &TransferOperatorEstimate, k: usize, opts: &SpectralOptions) -> Result<Spectrum> {
    if op.variant() != Variant::Stationary {
        return Err(Error::InvalidInput(
            "eigendecomposition needs the stationary variant; use singular triples".into(),
        ));
    }
    check_k(k, op.len())?;
    let pairs = linalg::top_eigenpairs(&Forward(op), k, &opts.eig)?;
    let w = op.input_cloud().weights();
    let eigenfunctions: Vec<Vec<C>> = pairs.vectors.iter().map(|x| normalize_weighted(x, w)).collect();
    let spurious = eigenfunctions
        .iter()
        .map(|u| participation(u, w) < opts.spurious_fraction)
        .collect();
    Ok(Spectrum {
        kind: SpectrumKind::Eigen,
        epsilon: op.epsilon(),
        n: op.len(),
        eigenvalues: pairs.values,
        residuals: pairs.residuals,
        spurious,
        eigenfunctions,
        left_functions: None,
    })
}

/// `k` largest singular triples `(σ, φ, ψ)` with `T φ = σ ψ`, via the normal operator `T*T`.
pub fn top_singular_triples(op: &TransferOperatorEstimate, k: usize, opts: &SpectralOptions) -> Result<Spectrum> {
    check_k(k, op.len())?;
    let pairs = linalg::top_eigenpairs(&Normal(op), k, &opts.eig)?;
    let w_in = op.input_cloud().weights();
    let w_out = op.output_cloud().weights();
    let mut values = Vec::with_capacity(pairs.values.len());
    let mut right = Vec::with_capacity(values.capacity());
    let mut left = Vec::with_capacity(values.capacity());
    let mut residuals = Vec::with_capacity(values.capacity());
    for (lam, x) in pairs.values.iter().zip(&pairs.vectors) {
        let sigma = lam.re.max(0.0).sqrt();
        let phi = normalize_weighted(x, w_in);
        let tphi = op.apply(&phi)?;
        let psi: Vec<C> = if sigma > 1e-150 {
            tphi.iter().map(|c| c / sigma).collect()
        } else {
            vec![C::new(0.0, 0.0); tphi.len()]
        };
        let back = op.apply_adjoint(&psi)?;
        let r = back
            .iter()
            .zip(&phi)
            .zip(w_in)
            .map(|((b, p), w)| w * (b - p * sigma).norm_sqr())
            .sum::<f64>()
            .sqrt();
        values.push(C::new(sigma, 0.0));
        residuals.push(r);
        right.push(phi);
        left.push(normalize_weighted(&psi, w_out));
    }
    let spurious = right
        .iter()
        .map(|u| participation(u, w_in) < opts.spurious_fraction)
        .collect();
    Ok(Spectrum {
        kind: SpectrumKind::Singular,
        epsilon: op.epsilon(),
        n: op.len(),
        eigenvalues: values,
        residuals,
        spurious,
        eigenfunctions: right,
        left_functions: Some(left),
    })
}

/// Eigenpairs for stationary operators, singular triples otherwise.
pub fn dominant_spectrum(op: &TransferOperatorEstimate, k: usize, opts: &SpectralOptions) -> Result<Spectrum> {
    match op.variant() {
        Variant::Stationary => top_eigenpairs(op, k, opts),
        Variant::Nonstationary => top_singular_triples(op, k, opts),
    }
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub operator: OperatorOptions,
    pub spectral: SpectralOptions,
    /// Warm-start each ε from the previous entry's potentials.
    pub warm_start: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            operator: OperatorOptions::default(),
            spectral: SpectralOptions::default(),
            warm_start: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub epsilon: f64,
    pub spectrum: std::result::Result<Spectrum, String>,
    pub build_seconds: f64,
    pub spectrum_seconds: f64,
}

impl SweepEntry {
    pub fn seconds(&self) -> f64 {
        self.build_seconds + self.spectrum_seconds
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepResult {
    pub entries: Vec<SweepEntry>,
}

impl SweepResult {
    pub fn failures(&self) -> usize {
        self.entries.iter().filter(|e| e.spectrum.is_err()).count()
    }
}

/// Spectra over a strictly decreasing `ε` grid. A failing entry is recorded and the sweep moves on.
pub fn sweep(
    data: &TransitionData,
    cost: &CostSpec,
    epsilons: &[f64],
    k: usize,
    variant: Variant,
    opts: &SweepOptions,
) -> Result<SweepResult> {
    if epsilons.is_empty() {
        return Err(Error::InvalidInput("empty ε grid".into()));
    }
    if epsilons.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidInput("ε grid must be strictly decreasing".into()));
    }
    let mut out = SweepResult::default();
    let mut previous: Option<TransferOperatorEstimate> = None;
    for &eps in epsilons {
        let t0 = Instant::now();
        let built = match (&previous, opts.warm_start) {
            (Some(p), true) => build_operator_warm(p, eps, &opts.operator),
            _ => build_operator(data, cost, eps, variant, &opts.operator),
        };
        let build_seconds = t0.elapsed().as_secs_f64();
        let t1 = Instant::now();
        let spectrum = match built {
            Ok(op) => {
                let s = dominant_spectrum(&op, k, &opts.spectral).map_err(|e| e.to_string());
                previous = Some(op);
                s
            }
            Err(e) => {
                previous = None;
                Err(e.to_string())
            }
        };
        out.entries.push(SweepEntry {
            epsilon: eps,
            spectrum,
            build_seconds,
            spectrum_seconds: t1.elapsed().as_secs_f64(),
        });
    }
    Ok(out)
}

/// Per-sample spectral coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub names: Vec<String>,
    /// `columns[c][i]` is coordinate `c` of sample `i`.
    pub columns: Vec<Vec<f64>>,
}

impl Embedding {
    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|c| self.columns[c].as_slice())
    }

    /// Rows `index, coords..., labels..., [low_confidence]`.
    pub fn write_csv<W: Write>(&self, w: W, labels: &[LabelColumn], low_confidence: Option<&[bool]>) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        let mut header = vec!["index".to_owned()];
        header.extend(self.names.iter().cloned());
        header.extend(labels.iter().map(|l| l.name.clone()));
        if low_confidence.is_some() {
            header.push("low_confidence".into());
        }
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![i.to_string()];
            rec.extend(self.columns.iter().map(|c| format!("{:e}", c[i])));
            rec.extend(labels.iter().map(|l| format!("{:e}", l.values[i])));
            if let Some(f) = low_confidence {
                rec.push(u8::from(f[i]).to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Coordinate names for the 1-based eigenfunction `index`: `u{index}` for real
/// functions, `u{index}_re` and `u{index}_im` for complex ones.
pub(crate) fn coordinate_names(spectrum: &Spectrum, index: usize) -> Vec<String> {
    let complex = spectrum.eigenvalues[index - 1].im != 0.0;
    if complex {
        vec![format!("u{index}_re"), format!("u{index}_im")]
    } else {
        vec![format!("u{index}")]
    }
}

pub(crate) fn check_indices(spectrum: &Spectrum, indices: &[usize]) -> Result<()> {
    for &i in indices {
        if i == 0 || i > spectrum.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: spectrum.len(),
            });
        }
    }
    Ok(())
}

/// Embeds samples by eigenfunction values, `x_i ↦ (u_k(x_i))_{k ∈ indices}`; indices are 1-based.
pub fn spectral_embedding(spectrum: &Spectrum, indices: &[usize]) -> Result<Embedding> {
    check_indices(spectrum, indices)?;
    let mut names = Vec::new();
    let mut columns = Vec::new();
    for &k in indices {
        let u = &spectrum.eigenfunctions[k - 1];
        let n = coordinate_names(spectrum, k);
        columns.push(u.iter().map(|c| c.re).collect());
        if n.len() == 2 {
            columns.push(u.iter().map(|c| c.im).collect());
        }
        names.extend(n);
    }
    Ok(Embedding { names, columns })
}

/// One row per `(ε, rank)`: `epsilon,rank,re,im,modulus,residual,spurious`.
pub fn write_eigenvalues_csv<W: Write>(w: W, spectra: &[&Spectrum]) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["epsilon", "rank", "re", "im", "modulus", "residual", "spurious"])?;
    for s in spectra {
        for (r, (l, res)) in s.eigenvalues.iter().zip(&s.residuals).enumerate() {
            w.write_record(&[
                format!("{:e}", s.epsilon),
                (r + 1).to_string(),
                format!("{:e}", l.re),
                format!("{:e}", l.im),
                format!("{:e}", l.norm()),
                format!("{res:e}"),
                u8::from(s.spurious[r]).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
