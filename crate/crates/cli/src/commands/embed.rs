//! Spectral embedding of the input samples, from a stored spectrum or one computed inline.

use std::path::Path;

use eto_core::build_operator;
use eto_core::spectral::{dominant_spectrum, spectral_embedding, SpectralOptions};

use super::{check_spectrum, default_indices, load_data, load_spectrum, operator_options};
use crate::artifact::{Run, RunArtifact};
use crate::config::{check_schema, DataSettings, EmbedConfig};
use crate::error::{CliError, CliResult};

pub const EMBEDDING: &str = "embedding.csv";
pub const SPECTRUM: &str = "spectrum.json";

pub fn validate(cfg: &EmbedConfig) -> CliResult<()> {
    check_schema(cfg.schema)?;
    match (&cfg.spectrum, cfg.epsilon) {
        (None, None) => return Err(CliError::config("give either a spectrum file or an epsilon")),
        (None, Some(e)) if !(e > 0.0 && e.is_finite()) => {
            return Err(CliError::config(format!("epsilon must be positive, got {e}")))
        }
        _ => {}
    }
    if cfg.k == 0 {
        return Err(CliError::config("k must be at least 1"));
    }
    if let Some(ix) = &cfg.indices {
        if ix.is_empty() || ix.contains(&0) {
            return Err(CliError::config("indices are 1-based and must not be empty"));
        }
    }
    Ok(())
}

pub fn run(cfg: &EmbedConfig, out: &Path) -> CliResult<RunArtifact> {
    validate(cfg)?;
    let mut run = Run::start(out, "embed", cfg, cfg.seed)?;
    let data = load_data(cfg, &mut run)?;
    let spectrum = match (&cfg.spectrum, cfg.epsilon) {
        (Some(path), _) => load_spectrum(path, &mut run)?,
        (None, Some(eps)) => {
            let cost = cfg.cost_spec(data.dim())?;
            let t = std::time::Instant::now();
            let op = build_operator(
                &data,
                &cost,
                eps,
                cfg.variant.into(),
                &operator_options(cfg.tol, cfg.max_iter, None)?,
            )?;
            run.time("build", t.elapsed().as_secs_f64());
            let t = std::time::Instant::now();
            let s = dominant_spectrum(&op, cfg.k, &SpectralOptions::default())?;
            run.time("spectrum", t.elapsed().as_secs_f64());
            s
        }
        (None, None) => unreachable!("rejected by validate"),
    };
    check_spectrum(&spectrum, &data)?;
    spectrum.to_json(run.create("spectrum", SPECTRUM)?)?;
    let indices = cfg.indices.clone().unwrap_or_else(|| default_indices(spectrum.len()));
    if indices.is_empty() {
        return Err(CliError::config("the spectrum has a single function; nothing to embed"));
    }
    let emb = spectral_embedding(&spectrum, &indices)?;
    emb.write_csv(run.create("embedding", EMBEDDING)?, data.labels(), None)?;
    run.finish()
}
