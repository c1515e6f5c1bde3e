//! Synthetic data generators writing CSV.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use eto_core::synth::{
    sample_embedded_ring, sample_rotating_trajectory, sample_torus_shift, EmbeddedRingSpec, RotatingShiftSpec,
    TorusShiftSpec,
};

use crate::config::{check_schema, SynthConfig, SystemKind};
use crate::error::{io_at, CliError, CliResult};

pub const DATA: &str = "data.csv";

pub fn validate(cfg: &SynthConfig) -> CliResult<()> {
    check_schema(cfg.schema)?;
    if cfg.n == 0 {
        return Err(CliError::config("n must be positive"));
    }
    if !(cfg.sigma >= 0.0 && cfg.sigma.is_finite()) {
        return Err(CliError::config(format!("invalid sigma {}", cfg.sigma)));
    }
    Ok(())
}

/// Generates the configured system and returns the path written.
pub fn run(cfg: &SynthConfig, out: &Path) -> CliResult<PathBuf> {
    validate(cfg)?;
    let path = cfg.output.clone().unwrap_or_else(|| out.join(DATA));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_at(parent))?;
    }
    let open = || File::create(&path).map(BufWriter::new).map_err(io_at(&path));
    match cfg.system {
        SystemKind::Torus => {
            let k = cfg.shifts.len();
            let weights = cfg.weights.clone().unwrap_or_else(|| vec![1.0 / k as f64; k]);
            let spec = TorusShiftSpec {
                d: cfg.d,
                shifts: cfg.shifts.clone(),
                weights,
                sigma: cfg.sigma,
            };
            sample_torus_shift(&spec, cfg.n, cfg.seed)?.write_csv(open()?)?;
        }
        SystemKind::Ring => {
            let spec = EmbeddedRingSpec {
                d: cfg.d,
                tau: cfg.tau,
                sigma: cfg.sigma,
                shift: cfg.shift,
                geometry_seed: cfg.geometry_seed,
            };
            sample_embedded_ring(&spec, cfg.n, cfg.seed)?.write_csv(open()?)?;
        }
        SystemKind::Rotating => {
            let spec = RotatingShiftSpec {
                shift: cfg.shift,
                sigma: cfg.sigma,
            };
            sample_rotating_trajectory(&spec, cfg.n, cfg.seed)?.write_csv(open()?)?;
        }
    }
    Ok(path)
}
