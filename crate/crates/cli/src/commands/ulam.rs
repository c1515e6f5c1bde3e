//! Dominant eigenvalues of the entropic estimate and of Ulam's method on embedded-ring data,
//! at matched resolution `h = factor · √ε`.

use std::path::Path;

use eto_core::baselines::build_ulam;
use eto_core::spectral::{top_eigenpairs, SpectralOptions};
use eto_core::synth::{sample_embedded_ring, EmbeddedRingSpec};
use eto_core::{build_operator, CostSpec, Variant};
use num_complex::Complex64;

use super::operator_options;
use crate::artifact::{Run, RunArtifact};
use crate::config::{check_schema, non_empty, positive, UlamConfig};
use crate::error::{CliError, CliResult};

pub const EIGENVALUES: &str = "ulam_comparison.csv";

pub fn validate(cfg: &UlamConfig) -> CliResult<()> {
    check_schema(cfg.schema)?;
    non_empty("dims", &cfg.dims)?;
    non_empty("sigmas", &cfg.sigmas)?;
    non_empty("epsilons", &cfg.epsilons)?;
    positive("epsilons", &cfg.epsilons)?;
    if cfg.dims.iter().any(|d| *d < 2) {
        return Err(CliError::config("ring dimensions must be at least 2"));
    }
    if cfg.sigmas.iter().any(|s| !(*s >= 0.0)) {
        return Err(CliError::config("sigmas must be non-negative"));
    }
    if cfg.k == 0 || cfg.k > cfg.n {
        return Err(CliError::config(format!(
            "need 1 <= k <= n, got k = {}, n = {}",
            cfg.k, cfg.n
        )));
    }
    if !(cfg.resolution_factor > 0.0) {
        return Err(CliError::config("resolution_factor must be positive"));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn write_rows<W: std::io::Write>(
    w: &mut csv::Writer<W>,
    method: &str,
    d: usize,
    sigma: f64,
    eps: f64,
    h: f64,
    ev: &[Complex64],
) -> CliResult<()> {
    for (r, l) in ev.iter().enumerate() {
        w.write_record([
            method.to_owned(),
            d.to_string(),
            sigma.to_string(),
            format!("{eps:e}"),
            format!("{h:e}"),
            (r + 1).to_string(),
            format!("{:e}", l.re),
            format!("{:e}", l.im),
            format!("{:e}", l.norm()),
        ])?;
    }
    Ok(())
}

pub fn run(cfg: &UlamConfig, out: &Path) -> CliResult<RunArtifact> {
    validate(cfg)?;
    let mut run = Run::start(out, "compare-ulam", cfg, cfg.seed)?;
    let opts = operator_options(cfg.tol, cfg.max_iter, None)?;
    let mut w = csv::Writer::from_writer(run.create("eigenvalues", EIGENVALUES)?);
    w.write_record(["method", "d", "sigma", "epsilon", "h", "rank", "re", "im", "modulus"])?;
    for &d in &cfg.dims {
        for &sigma in &cfg.sigmas {
            let spec = EmbeddedRingSpec {
                d,
                tau: cfg.tau,
                sigma,
                shift: cfg.shift,
                geometry_seed: cfg.geometry_seed,
            };
            let data = sample_embedded_ring(&spec, cfg.n, cfg.seed)?;
            for &eps in &cfg.epsilons {
                let h = cfg.resolution_factor * eps.sqrt();
                let t = std::time::Instant::now();
                let eto = build_operator(&data, &CostSpec::SquaredEuclidean, eps, Variant::Stationary, &opts)
                    .and_then(|op| top_eigenpairs(&op, cfg.k, &SpectralOptions::default()));
                match eto {
                    Ok(s) => write_rows(&mut w, "eto", d, sigma, eps, h, &s.eigenvalues)?,
                    Err(e) => run.fail(format!("eto d={d} sigma={sigma} epsilon={eps}: {e}")),
                }
                run.time(
                    format!("eto d={d} sigma={sigma} epsilon={eps}"),
                    t.elapsed().as_secs_f64(),
                );
                let t = std::time::Instant::now();
                match build_ulam(&data, h) {
                    Ok(u) => write_rows(&mut w, "ulam", d, sigma, eps, h, &u.eigenvalues(cfg.k))?,
                    Err(e) => run.fail(format!("ulam d={d} sigma={sigma} h={h}: {e}")),
                }
                run.time(
                    format!("ulam d={d} sigma={sigma} epsilon={eps}"),
                    t.elapsed().as_secs_f64(),
                );
            }
        }
    }
    w.flush()?;
    drop(w);
    run.finish()
}
