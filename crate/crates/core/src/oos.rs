//! Out-of-sample extension `ũ = (1/λ) T̃ u` of eigen- and singular functions.

use num_complex::Complex64;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::exec;
use crate::operator::TransferOperatorEstimate;
use crate::spectral::{check_indices, coordinate_names, Embedding, Spectrum, SpectrumKind};

type C = Complex64;

/// Smallest `|λ|` for which the `1/λ` extension is attempted.
pub const DEFAULT_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy)]
pub struct ExtensionOptions {
    pub floor: f64,
    /// A query is low-confidence when its log kernel mass falls this far below the
    /// smallest in-sample value.
    pub low_confidence_gap: f64,
}

impl Default for ExtensionOptions {
    fn default() -> Self {
        Self {
            floor: DEFAULT_FLOOR,
            low_confidence_gap: 10.0,
        }
    }
}

fn check_floor(lambda: C, floor: f64) -> Result<()> {
    if !(lambda.norm() > floor) {
        return Err(Error::EigenvalueTooSmall {
            modulus: lambda.norm(),
            floor,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    /// Evaluated through the left blur, at points of the output space.
    Output,
    /// Evaluated through the adjoint of the right blur, at points of the input space.
    Input,
}

/// An in-sample function turned into a continuous one through the operator kernel.
#[derive(Debug, Clone)]
pub struct ExtendedFunction<'a> {
    op: &'a TransferOperatorEstimate,
    scale: C,
    /// Pre-blurred coefficients at the pair samples.
    blurred: Vec<C>,
    side: Side,
}

impl<'a> ExtendedFunction<'a> {
    /// Extension of an eigenfunction `u` for eigenvalue `λ` of a stationary operator.
    pub fn eigen(op: &'a TransferOperatorEstimate, u: &[C], lambda: C, floor: f64) -> Result<Self> {
        check_floor(lambda, floor)?;
        Ok(Self {
            op,
            scale: C::new(1.0, 0.0) / lambda,
            blurred: op.apply_right(u)?,
            side: Side::Output,
        })
    }

    /// Left singular function `ψ = (1/σ) T φ`, evaluated on the output space.
    pub fn left_singular(op: &'a TransferOperatorEstimate, phi: &[C], sigma: f64, floor: f64) -> Result<Self> {
        Self::eigen(op, phi, C::new(sigma, 0.0), floor)
    }

    /// Right singular function `φ = (1/σ) T* ψ`, evaluated on the input space.
    pub fn right_singular(op: &'a TransferOperatorEstimate, psi: &[C], sigma: f64, floor: f64) -> Result<Self> {
        check_floor(C::new(sigma, 0.0), floor)?;
        Ok(Self {
            op,
            scale: C::new(1.0 / sigma, 0.0),
            blurred: op.left_blur().apply_adjoint(psi)?,
            side: Side::Input,
        })
    }

    /// Value at `x` together with the log kernel mass near `x`.
    pub fn eval_with_mass(&self, x: &[f64]) -> Result<(C, f64)> {
        let (v, mass) = match self.side {
            Side::Output => self.op.extend_blurred(&self.blurred, x)?,
            Side::Input => {
                let d = self.op.right_blur().duals();
                let (alpha, row) = d.kernel_to_targets(x)?;
                let w = d.target().weights();
                let v = row
                    .iter()
                    .zip(w)
                    .zip(&self.blurred)
                    .map(|((k, w), b)| b * (k * w))
                    .sum();
                (v, -alpha / d.epsilon())
            }
        };
        Ok((v * self.scale, mass))
    }

    pub fn eval(&self, x: &[f64]) -> Result<C> {
        Ok(self.eval_with_mass(x)?.0)
    }
}

/// `ũ(x) = (1/λ)(T̃ u)(x)` for an in-sample eigenfunction `u`.
pub fn extend_eigenfunction(op: &TransferOperatorEstimate, u: &[C], lambda: C, x: &[f64]) -> Result<C> {
    ExtendedFunction::eigen(op, u, lambda, DEFAULT_FLOOR)?.eval(x)
}

#[derive(Debug, Clone)]
pub struct ExtendedEmbedding {
    pub embedding: Embedding,
    /// Log kernel mass (`−β(x)/ε` of the blur used for the extension) per query point.
    pub log_mass: Vec<f64>,
    pub low_confidence: Vec<bool>,
}

/// Extends the embedding coordinates of `indices` (1-based) to `points`.
///
/// For eigen spectra the extension runs through the left blur; for singular
/// spectra the right singular functions are extended through `T*`.
pub fn extend_embedding(
    op: &TransferOperatorEstimate,
    spectrum: &Spectrum,
    indices: &[usize],
    points: &PointCloud,
    opts: &ExtensionOptions,
) -> Result<ExtendedEmbedding> {
    check_indices(spectrum, indices)?;
    if points.dim() != op.data().dim() {
        return Err(Error::DimensionMismatch {
            expected: op.data().dim(),
            found: points.dim(),
        });
    }
    let mut funcs = Vec::with_capacity(indices.len());
    for &k in indices {
        let lam = spectrum.eigenvalues[k - 1];
        let f = match spectrum.kind {
            SpectrumKind::Eigen => ExtendedFunction::eigen(op, &spectrum.eigenfunctions[k - 1], lam, opts.floor)?,
            SpectrumKind::Singular => {
                let psi = spectrum
                    .left_functions
                    .as_ref()
                    .ok_or_else(|| Error::InvalidInput("singular spectrum without left functions".into()))?;
                ExtendedFunction::right_singular(op, &psi[k - 1], lam.re, opts.floor)?
            }
        };
        funcs.push(f);
    }
    let side = funcs.first().map_or(Side::Output, |f| f.side);
    let reference = in_sample_log_mass_floor(op, side);
    // one dual extension per point, reused across every index
    let rows: Vec<Result<(Vec<C>, f64)>> = exec::map_indices(points.len(), |p| {
        let x = points.point(p);
        let (weights, mass) = match side {
            Side::Output => {
                let d = op.left_blur().duals();
                let (beta, col) = d.kernel_from_sources(x)?;
                let w: Vec<f64> = col.iter().zip(d.source().weights()).map(|(k, w)| k * w).collect();
                (w, -beta / d.epsilon())
            }
            Side::Input => {
                let d = op.right_blur().duals();
                let (alpha, row) = d.kernel_to_targets(x)?;
                let w: Vec<f64> = row.iter().zip(d.target().weights()).map(|(k, w)| k * w).collect();
                (w, -alpha / d.epsilon())
            }
        };
        let vals = funcs
            .iter()
            .map(|f| f.blurred.iter().zip(&weights).map(|(b, w)| b * *w).sum::<C>() * f.scale)
            .collect();
        Ok((vals, mass))
    });
    let mut names = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut layout = Vec::new();
    for &k in indices {
        let n = coordinate_names(spectrum, k);
        layout.push(n.len() == 2);
        for _ in 0..n.len() {
            columns.push(Vec::with_capacity(points.len()));
        }
        names.extend(n);
    }
    let mut log_mass = Vec::with_capacity(points.len());
    for row in rows {
        let (vals, mass) = row?;
        let mut c = 0;
        for (v, complex) in vals.iter().zip(&layout) {
            columns[c].push(v.re);
            c += 1;
            if *complex {
                columns[c].push(v.im);
                c += 1;
            }
        }
        log_mass.push(mass);
    }
    let low_confidence = log_mass
        .iter()
        .map(|m| *m < reference - opts.low_confidence_gap)
        .collect();
    Ok(ExtendedEmbedding {
        embedding: Embedding { names, columns },
        log_mass,
        low_confidence,
    })
}

fn in_sample_log_mass_floor(op: &TransferOperatorEstimate, side: Side) -> f64 {
    let (pot, eps) = match side {
        Side::Output => (op.left_blur().duals().beta(), op.left_blur().duals().epsilon()),
        Side::Input => (op.right_blur().duals().alpha(), op.right_blur().duals().epsilon()),
    };
    pot.iter().map(|b| -b / eps).fold(f64::INFINITY, f64::min)
}
