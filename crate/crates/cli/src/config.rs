//! Versioned JSON configuration, one record per subcommand.
//!
//! Every file must carry `"schema": 1`; unknown keys are rejected. Missing keys
//! take the defaults below, and command-line flags override file values.

use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use eto_core::data::TrajectoryMeta;
use eto_core::metrics::KernelPair;
use eto_core::ot::EvalMode;
use eto_core::{CostSpec, Variant};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{io_at, CliError, CliResult};

pub const SCHEMA: u32 = 1;

/// Sinkhorn iteration cap per ε-stage.
pub const MAX_ITER: usize = 10_000;

fn schema() -> u32 {
    SCHEMA
}

/// Reads a config file, insisting on `schema: 1` before decoding the rest.
pub fn load<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(io_at(path))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    match value.get("schema").and_then(|s| s.as_u64()) {
        Some(v) if v == SCHEMA as u64 => {}
        Some(v) => return Err(CliError::config(format!("unsupported schema {v}, expected {SCHEMA}"))),
        None => return Err(CliError::config("config is missing \"schema\": 1")),
    }
    serde_json::from_value(value).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CostKind {
    #[default]
    Euclidean,
    /// Squared distance on the torus with the configured periods (unit by default).
    Torus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum VariantKind {
    #[default]
    Stationary,
    Nonstationary,
}

impl From<VariantKind> for Variant {
    fn from(v: VariantKind) -> Self {
        match v {
            VariantKind::Stationary => Variant::Stationary,
            VariantKind::Nonstationary => Variant::Nonstationary,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Representation {
    Dense,
    Lazy,
}

impl From<Representation> for EvalMode {
    fn from(r: Representation) -> Self {
        match r {
            Representation::Dense => EvalMode::Dense,
            Representation::Lazy => EvalMode::Lazy,
        }
    }
}

/// Pair extraction from a trajectory file holding one state per row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    #[serde(default)]
    pub t0: usize,
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default = "one")]
    pub lag: usize,
}

fn one() -> usize {
    1
}

impl From<TrajectoryConfig> for TrajectoryMeta {
    fn from(t: TrajectoryConfig) -> Self {
        TrajectoryMeta {
            t0: t.t0,
            stride: t.stride,
            lag: t.lag,
        }
    }
}

/// Where transition pairs come from and how distances are measured.
pub trait DataSettings {
    fn data(&self) -> Option<&Path>;
    fn trajectory(&self) -> Option<TrajectoryConfig>;
    fn cost(&self) -> CostKind;
    fn periods(&self) -> Option<&[f64]>;

    fn cost_spec(&self, dim: usize) -> CliResult<CostSpec> {
        Ok(match self.cost() {
            CostKind::Euclidean => CostSpec::SquaredEuclidean,
            CostKind::Torus => match self.periods() {
                None => CostSpec::unit_torus(dim),
                Some(p) if p.len() == dim && p.iter().all(|v| *v > 0.0) => {
                    CostSpec::SquaredTorus { periods: p.to_vec() }
                }
                Some(p) => return Err(CliError::config(format!("need {dim} positive periods, got {p:?}"))),
            },
        })
    }
}

macro_rules! data_settings {
    ($t:ty) => {
        impl DataSettings for $t {
            fn data(&self) -> Option<&Path> {
                self.data.as_deref()
            }
            fn trajectory(&self) -> Option<TrajectoryConfig> {
                self.trajectory
            }
            fn cost(&self) -> CostKind {
                self.cost
            }
            fn periods(&self) -> Option<&[f64]> {
                self.periods.as_deref()
            }
        }
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub schema: u32,
    pub data: Option<PathBuf>,
    pub trajectory: Option<TrajectoryConfig>,
    pub cost: CostKind,
    pub periods: Option<Vec<f64>>,
    /// Strictly decreasing.
    pub epsilons: Vec<f64>,
    pub k: usize,
    pub variant: VariantKind,
    pub warm_start: bool,
    pub representation: Option<Representation>,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            schema: schema(),
            data: None,
            trajectory: None,
            cost: CostKind::default(),
            periods: None,
            epsilons: vec![1.0, 0.3, 0.1, 0.03, 0.01],
            k: 10,
            variant: VariantKind::default(),
            warm_start: true,
            representation: None,
            tol: eto_core::operator::OPERATOR_TOL,
            max_iter: MAX_ITER,
            seed: 0,
        }
    }
}
data_settings!(SweepConfig);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbedConfig {
    pub schema: u32,
    pub data: Option<PathBuf>,
    pub trajectory: Option<TrajectoryConfig>,
    pub cost: CostKind,
    pub periods: Option<Vec<f64>>,
    /// Spectrum JSON from an earlier run; computed inline at `epsilon` when absent.
    pub spectrum: Option<PathBuf>,
    pub epsilon: Option<f64>,
    pub k: usize,
    /// 1-based eigenfunction indices; `2..=k` when absent.
    pub indices: Option<Vec<usize>>,
    pub variant: VariantKind,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self {
            schema: schema(),
            data: None,
            trajectory: None,
            cost: CostKind::default(),
            periods: None,
            spectrum: None,
            epsilon: None,
            k: 10,
            indices: None,
            variant: VariantKind::default(),
            tol: eto_core::operator::OPERATOR_TOL,
            max_iter: MAX_ITER,
            seed: 0,
        }
    }
}
data_settings!(EmbedConfig);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtendConfig {
    pub schema: u32,
    /// `run.json` of an earlier `embed` run; supplies every data setting left unset here.
    pub run: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub trajectory: Option<TrajectoryConfig>,
    pub cost: Option<CostKind>,
    pub periods: Option<Vec<f64>>,
    pub variant: Option<VariantKind>,
    pub spectrum: Option<PathBuf>,
    pub points: Option<PathBuf>,
    pub indices: Option<Vec<usize>>,
    pub floor: f64,
    pub low_confidence_gap: f64,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

impl Default for ExtendConfig {
    fn default() -> Self {
        Self {
            schema: schema(),
            run: None,
            data: None,
            trajectory: None,
            cost: None,
            periods: None,
            variant: None,
            spectrum: None,
            points: None,
            indices: None,
            floor: eto_core::oos::DEFAULT_FLOOR,
            low_confidence_gap: 10.0,
            tol: None,
            max_iter: None,
        }
    }
}

/// Data settings after merging an extend config with the run it refers to.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSpec {
    pub data: Option<PathBuf>,
    pub trajectory: Option<TrajectoryConfig>,
    pub cost: CostKind,
    pub periods: Option<Vec<f64>>,
}
data_settings!(DataSpec);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergeConfig {
    pub schema: u32,
    pub shifts: Vec<f64>,
    pub weights: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub ns: Vec<usize>,
    pub dims: Vec<usize>,
    pub seeds: usize,
    pub mc_samples: usize,
    pub grid_resolution: usize,
    pub proxy_resolution: usize,
    pub pairs: Vec<KernelPair>,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for ConvergeConfig {
    fn default() -> Self {
        Self {
            schema: schema(),
            shifts: vec![0.0, 0.3],
            weights: vec![0.5, 0.5],
            sigmas: vec![0.05],
            epsilons: vec![0.1],
            ns: vec![100, 200, 400, 800, 1600, 3200],
            dims: vec![1],
            seeds: 20,
            mc_samples: eto_core::metrics::DEFAULT_MC,
            grid_resolution: 512,
            proxy_resolution: eto_core::metrics::PROXY_RESOLUTION,
            pairs: vec![
                KernelPair::TrueVsRegularized,
                KernelPair::RegularizedVsEmpirical,
                KernelPair::TrueVsEmpirical,
            ],
            tol: 1e-8,
            max_iter: MAX_ITER,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UlamConfig {
    pub schema: u32,
    pub dims: Vec<usize>,
    pub sigmas: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub n: usize,
    pub k: usize,
    pub tau: f64,
    pub shift: f64,
    pub geometry_seed: Option<u64>,
    /// Cell side `h = resolution_factor · √ε`.
    pub resolution_factor: f64,
    /// Marginal tolerance of the blur solves.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for UlamConfig {
    fn default() -> Self {
        Self {
            schema: schema(),
            dims: vec![2, 10],
            sigmas: vec![0.05, 0.1, 0.2, 0.4],
            epsilons: (1..=10).map(|i| i as f64 / 100.0).collect(),
            n: 500,
            k: 10,
            tau: 0.2,
            shift: 0.2,
            geometry_seed: None,
            resolution_factor: 2.0,
            tol: 1e-5,
            max_iter: 20_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CounterexampleConfig {
    pub schema: u32,
    pub ns: Vec<usize>,
    pub epsilons: Vec<f64>,
    pub seeds: usize,
    /// Midpoint nodes in `x` for the double-blur error.
    pub grid: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for CounterexampleConfig {
    fn default() -> Self {
        Self {
            schema: schema(),
            ns: vec![50, 100, 200, 400, 800, 1600],
            epsilons: vec![0.1],
            seeds: 20,
            grid: 200,
            tol: eto_core::operator::OPERATOR_TOL,
            max_iter: MAX_ITER,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SystemKind {
    /// Shift-and-blur pairs on the torus.
    #[default]
    Torus,
    /// Shift on a distorted circle embedded in `R^d`.
    Ring,
    /// One noisy rotation trajectory on the circle, one state per row.
    Rotating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub schema: u32,
    pub system: SystemKind,
    pub d: usize,
    pub n: usize,
    pub sigma: f64,
    /// Torus mixture components.
    pub shifts: Vec<f64>,
    pub weights: Option<Vec<f64>>,
    /// Ring distortion damping.
    pub tau: f64,
    /// Ring and rotating shift per step.
    pub shift: f64,
    pub geometry_seed: Option<u64>,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            schema: schema(),
            system: SystemKind::default(),
            d: 1,
            n: 1000,
            sigma: 0.05,
            shifts: vec![0.0, 0.3],
            weights: None,
            tau: 0.2,
            shift: 0.2,
            geometry_seed: None,
            seed: 0,
            output: None,
        }
    }
}

pub fn check_schema(schema: u32) -> CliResult<()> {
    if schema != SCHEMA {
        return Err(CliError::config(format!(
            "unsupported schema {schema}, expected {SCHEMA}"
        )));
    }
    Ok(())
}

pub fn non_empty<T>(name: &str, v: &[T]) -> CliResult<()> {
    if v.is_empty() {
        return Err(CliError::config(format!("{name} must not be empty")));
    }
    Ok(())
}

pub fn positive(name: &str, v: &[f64]) -> CliResult<()> {
    if let Some(bad) = v.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(CliError::config(format!(
            "{name} must be positive and finite, got {bad}"
        )));
    }
    Ok(())
}
