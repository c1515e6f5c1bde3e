//! One module per subcommand; each takes a validated config and an output directory.

pub mod converge;
pub mod counterexample;
pub mod embed;
pub mod extend;
pub mod sweep;
pub mod synth;
pub mod ulam;

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use eto_core::data::TrajectoryMeta;
use eto_core::operator::OperatorOptions;
use eto_core::spectral::Spectrum;
use eto_core::{PointCloud, TransitionData};

use crate::artifact::Run;
use crate::config::{DataSettings, Representation};
use crate::error::{io_at, CliError, CliResult};

pub(crate) fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(io_at(path))
}

/// Reads the transition pairs named by `settings` and records the file as an input.
pub(crate) fn load_data(settings: &impl DataSettings, run: &mut Run) -> CliResult<TransitionData> {
    let path = settings.data().ok_or_else(|| CliError::config("no data file given"))?;
    let data = match settings.trajectory() {
        Some(t) => {
            let states = PointCloud::read_csv(open(path)?)?;
            let meta: TrajectoryMeta = t.into();
            TransitionData::from_trajectory(&states, meta)?
        }
        None => TransitionData::read_csv(open(path)?)?,
    };
    run.input("data", path)?;
    Ok(data)
}

pub(crate) fn load_spectrum(path: &Path, run: &mut Run) -> CliResult<Spectrum> {
    let s = Spectrum::from_json(open(path)?).map_err(|e| match e {
        eto_core::Error::Io(_) => CliError::from(e),
        other => CliError::config(format!("{}: {other}", path.display())),
    })?;
    run.input("spectrum", path)?;
    Ok(s)
}

pub(crate) fn operator_options(
    tol: f64,
    max_iter: usize,
    representation: Option<Representation>,
) -> CliResult<OperatorOptions> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(CliError::config(format!("tol must lie in (0, 1), got {tol}")));
    }
    if max_iter == 0 {
        return Err(CliError::config("max_iter must be positive"));
    }
    let mut opts = OperatorOptions::default();
    opts.solver.tol = tol;
    opts.solver.max_iter = max_iter;
    if let Some(r) = representation {
        opts = opts.with_representation(r.into());
    }
    Ok(opts)
}

/// Checks a spectrum against the data it is meant to describe.
pub(crate) fn check_spectrum(spectrum: &Spectrum, data: &TransitionData) -> CliResult<()> {
    if spectrum.n != data.len() || spectrum.eigenfunctions.len() != spectrum.len() {
        return Err(CliError::config(format!(
            "spectrum was computed on {} samples with {} functions; data has {} samples",
            spectrum.n,
            spectrum.eigenfunctions.len(),
            data.len()
        )));
    }
    Ok(())
}

/// 1-based indices `2..=len`, the usual embedding choice that drops the constant function.
pub(crate) fn default_indices(len: usize) -> Vec<usize> {
    (2..=len).collect()
}

/// Seed for replicate `s`, shared across the other grid axes so runs at different `N` are comparable.
pub(crate) fn replicate_seed(base: u64, s: usize) -> u64 {
    base.wrapping_add(s as u64)
}
