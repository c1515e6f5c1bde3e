//! Spectra over a decreasing `ε` grid, warm-started from one `ε` to the next.

use std::path::Path;

use eto_core::spectral::{sweep, write_eigenvalues_csv, SpectralOptions, Spectrum, SweepOptions};

use super::{load_data, operator_options};
use crate::artifact::{Run, RunArtifact};
use crate::config::{check_schema, non_empty, positive, DataSettings, SweepConfig};
use crate::error::{CliError, CliResult};

pub const EIGENVALUES: &str = "eigenvalues.csv";
pub const TIMINGS: &str = "timings.csv";

/// File name of the spectrum at grid position `i` (0-based).
pub fn spectrum_file(i: usize, epsilon: f64) -> String {
    format!("spectra/spectrum_{:03}_eps{epsilon:e}.json", i + 1)
}

pub fn validate(cfg: &SweepConfig) -> CliResult<()> {
    check_schema(cfg.schema)?;
    non_empty("epsilons", &cfg.epsilons)?;
    positive("epsilons", &cfg.epsilons)?;
    if cfg.epsilons.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(CliError::config("epsilons must be strictly decreasing"));
    }
    if cfg.k == 0 {
        return Err(CliError::config("k must be at least 1"));
    }
    Ok(())
}

pub fn run(cfg: &SweepConfig, out: &Path) -> CliResult<RunArtifact> {
    validate(cfg)?;
    let mut run = Run::start(out, "sweep", cfg, cfg.seed)?;
    let data = load_data(cfg, &mut run)?;
    let cost = cfg.cost_spec(data.dim())?;
    let opts = SweepOptions {
        operator: operator_options(cfg.tol, cfg.max_iter, cfg.representation)?,
        spectral: SpectralOptions::default(),
        warm_start: cfg.warm_start,
    };
    let result = sweep(&data, &cost, &cfg.epsilons, cfg.k, cfg.variant.into(), &opts)?;

    let mut done: Vec<&Spectrum> = Vec::new();
    for (i, e) in result.entries.iter().enumerate() {
        run.time(format!("epsilon={:e}", e.epsilon), e.seconds());
        match &e.spectrum {
            Ok(s) => {
                s.to_json(run.create("spectrum", spectrum_file(i, e.epsilon))?)?;
                done.push(s);
            }
            Err(msg) => run.fail(format!("epsilon {:e}: {msg}", e.epsilon)),
        }
    }
    write_eigenvalues_csv(run.create("eigenvalues", EIGENVALUES)?, &done)?;

    let mut w = csv::Writer::from_writer(run.create("timings", TIMINGS)?);
    w.write_record(["epsilon", "N", "build_seconds", "spectrum_seconds", "status"])?;
    for e in &result.entries {
        w.write_record([
            format!("{:e}", e.epsilon),
            data.len().to_string(),
            format!("{:e}", e.build_seconds),
            format!("{:e}", e.spectrum_seconds),
            if e.spectrum.is_ok() { "ok" } else { "failed" }.to_owned(),
        ])?;
    }
    w.flush()?;
    drop(w);
    run.finish()
}
