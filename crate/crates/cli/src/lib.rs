//! Experiment runner for entropic transfer operators: versioned JSON configs in,
//! CSV/JSON plot data and a `run.json` artifact out.

pub mod artifact;
pub mod commands;
pub mod config;
pub mod error;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use crate::config::{
    ConvergeConfig, CostKind, CounterexampleConfig, EmbedConfig, ExtendConfig, Representation, SweepConfig,
    SynthConfig, SystemKind, TrajectoryConfig, UlamConfig, VariantKind,
};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "eto", version, about = "Entropic transfer operator experiments")]
pub struct Cli {
    /// JSON config for the subcommand (must carry "schema": 1).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory receiving outputs and run.json.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Spectra over a decreasing epsilon grid.
    Sweep(SweepArgs),
    /// Spectral embedding of the input samples.
    Embed(EmbedArgs),
    /// Extend a stored embedding to new points.
    Extend(ExtendArgs),
    /// Kernel-distance convergence study on torus shift systems.
    Converge(ConvergeArgs),
    /// Entropic versus Ulam eigenvalues on embedded-ring data.
    CompareUlam(UlamArgs),
    /// Single- versus double-blur errors on the two-atom system.
    Counterexample(CounterexampleArgs),
    /// Generate synthetic data.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Transition pairs CSV, or a trajectory CSV together with --lag.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Treat the data file as one trajectory and pair states this many steps apart.
    #[arg(long)]
    pub lag: Option<usize>,
    /// Transport cost between samples.
    #[arg(long, value_enum)]
    pub cost: Option<CostKind>,
    /// Torus periods, one per coordinate (default 1).
    #[arg(long, value_delimiter = ',')]
    pub periods: Option<Vec<f64>>,
    /// Stationary (eigenpairs on the x samples) or nonstationary (singular triples from x to y).
    #[arg(long, value_enum)]
    pub variant: Option<VariantKind>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated regularization strengths, solved in the given order.
    #[arg(long, value_delimiter = ',')]
    pub epsilons: Option<Vec<f64>>,
    /// Eigenvalues kept per epsilon.
    #[arg(short, long)]
    pub k: Option<usize>,
    /// Operator storage (default: dense up to 5000 samples).
    #[arg(long, value_enum)]
    pub representation: Option<Representation>,
    /// Solve every epsilon from scratch.
    #[arg(long)]
    pub no_warm_start: bool,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Spectrum JSON from an earlier run.
    #[arg(long)]
    pub spectrum: Option<PathBuf>,
    /// Compute the spectrum inline at this epsilon.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Eigenpairs computed inline.
    #[arg(short, long)]
    pub k: Option<usize>,
    /// 1-based eigenfunction indices (default 2..=k).
    #[arg(long, value_delimiter = ',')]
    pub indices: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct ExtendArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// run.json of an earlier embed run.
    #[arg(long)]
    pub run: Option<PathBuf>,
    /// Spectrum JSON; overrides the one recorded in --run.
    #[arg(long)]
    pub spectrum: Option<PathBuf>,
    /// CSV of query points.
    #[arg(long)]
    pub points: Option<PathBuf>,
    /// 1-based eigenfunction indices (default: those of the embed run).
    #[arg(long, value_delimiter = ',')]
    pub indices: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct ConvergeArgs {
    /// Blur widths of the torus shift system.
    #[arg(long, value_delimiter = ',')]
    pub sigmas: Option<Vec<f64>>,
    /// Regularization strengths.
    #[arg(long, value_delimiter = ',')]
    pub epsilons: Option<Vec<f64>>,
    /// Sample sizes.
    #[arg(long, value_delimiter = ',')]
    pub ns: Option<Vec<usize>>,
    /// Torus dimensions.
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    /// Replicates per grid point.
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Monte Carlo pairs per distance estimate.
    #[arg(long)]
    pub mc_samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct UlamArgs {
    /// Ambient dimensions (at least 2).
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    /// Noise levels on the ring.
    #[arg(long, value_delimiter = ',')]
    pub sigmas: Option<Vec<f64>>,
    /// Regularization strengths; the Ulam box size is 2·sqrt(epsilon).
    #[arg(long, value_delimiter = ',')]
    pub epsilons: Option<Vec<f64>>,
    /// Pairs per data set.
    #[arg(long)]
    pub n: Option<usize>,
    /// Eigenvalues reported per method.
    #[arg(short, long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CounterexampleArgs {
    /// Sample sizes.
    #[arg(long, value_delimiter = ',')]
    pub ns: Option<Vec<usize>>,
    /// Regularization strengths.
    #[arg(long, value_delimiter = ',')]
    pub epsilons: Option<Vec<f64>>,
    /// Replicates per grid point.
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Quadrature points per axis for the L2 error.
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// System to sample.
    #[arg(value_enum)]
    pub system: Option<SystemKind>,
    /// Dimension: torus dimension, or ambient dimension for `ring`.
    #[arg(long)]
    pub d: Option<usize>,
    /// Noise standard deviation.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Torus shift of each mixture component.
    #[arg(long, value_delimiter = ',')]
    pub shifts: Option<Vec<f64>>,
    /// Mixture weights (default: equal).
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    /// Ring distortion amplitude.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Ring and rotating shift per step.
    #[arg(long)]
    pub shift: Option<f64>,
    /// Number of pairs, or trajectory length for `rotating`.
    #[arg(long, alias = "len")]
    pub n: Option<usize>,
    /// Seed for the ring geometry (default: the sample seed).
    #[arg(long)]
    pub geometry_seed: Option<u64>,
    /// Output CSV (default: data.csv in the output directory).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

fn base<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    path.map_or_else(|| Ok(T::default()), config::load)
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn trajectory(lag: Option<usize>, current: Option<TrajectoryConfig>) -> Option<TrajectoryConfig> {
    match lag {
        Some(lag) => Some(TrajectoryConfig {
            lag,
            ..current.unwrap_or(TrajectoryConfig { t0: 0, stride: 1, lag })
        }),
        None => current,
    }
}

pub fn sweep_config(cli: &Cli, a: &SweepArgs) -> CliResult<SweepConfig> {
    let mut c: SweepConfig = base(cli.config.as_deref())?;
    if a.data.data.is_some() {
        c.data = a.data.data.clone();
    }
    c.trajectory = trajectory(a.data.lag, c.trajectory);
    set(&mut c.cost, a.data.cost);
    if a.data.periods.is_some() {
        c.periods = a.data.periods.clone();
    }
    set(&mut c.variant, a.data.variant);
    set(&mut c.epsilons, a.epsilons.clone());
    set(&mut c.k, a.k);
    if a.representation.is_some() {
        c.representation = a.representation;
    }
    if a.no_warm_start {
        c.warm_start = false;
    }
    set(&mut c.seed, cli.seed);
    Ok(c)
}

pub fn embed_config(cli: &Cli, a: &EmbedArgs) -> CliResult<EmbedConfig> {
    let mut c: EmbedConfig = base(cli.config.as_deref())?;
    if a.data.data.is_some() {
        c.data = a.data.data.clone();
    }
    c.trajectory = trajectory(a.data.lag, c.trajectory);
    set(&mut c.cost, a.data.cost);
    if a.data.periods.is_some() {
        c.periods = a.data.periods.clone();
    }
    set(&mut c.variant, a.data.variant);
    if a.spectrum.is_some() {
        c.spectrum = a.spectrum.clone();
    }
    if a.epsilon.is_some() {
        c.epsilon = a.epsilon;
    }
    set(&mut c.k, a.k);
    if a.indices.is_some() {
        c.indices = a.indices.clone();
    }
    set(&mut c.seed, cli.seed);
    Ok(c)
}

pub fn extend_config(cli: &Cli, a: &ExtendArgs) -> CliResult<ExtendConfig> {
    let mut c: ExtendConfig = base(cli.config.as_deref())?;
    if a.data.data.is_some() {
        c.data = a.data.data.clone();
    }
    c.trajectory = trajectory(a.data.lag, c.trajectory);
    if a.data.cost.is_some() {
        c.cost = a.data.cost;
    }
    if a.data.periods.is_some() {
        c.periods = a.data.periods.clone();
    }
    if a.data.variant.is_some() {
        c.variant = a.data.variant;
    }
    if a.run.is_some() {
        c.run = a.run.clone();
    }
    if a.spectrum.is_some() {
        c.spectrum = a.spectrum.clone();
    }
    if a.points.is_some() {
        c.points = a.points.clone();
    }
    if a.indices.is_some() {
        c.indices = a.indices.clone();
    }
    Ok(c)
}

pub fn converge_config(cli: &Cli, a: &ConvergeArgs) -> CliResult<ConvergeConfig> {
    let mut c: ConvergeConfig = base(cli.config.as_deref())?;
    set(&mut c.sigmas, a.sigmas.clone());
    set(&mut c.epsilons, a.epsilons.clone());
    set(&mut c.ns, a.ns.clone());
    set(&mut c.dims, a.dims.clone());
    set(&mut c.seeds, a.seeds);
    set(&mut c.mc_samples, a.mc_samples);
    set(&mut c.seed, cli.seed);
    Ok(c)
}

pub fn ulam_config(cli: &Cli, a: &UlamArgs) -> CliResult<UlamConfig> {
    let mut c: UlamConfig = base(cli.config.as_deref())?;
    set(&mut c.dims, a.dims.clone());
    set(&mut c.sigmas, a.sigmas.clone());
    set(&mut c.epsilons, a.epsilons.clone());
    set(&mut c.n, a.n);
    set(&mut c.k, a.k);
    set(&mut c.seed, cli.seed);
    Ok(c)
}

pub fn counterexample_config(cli: &Cli, a: &CounterexampleArgs) -> CliResult<CounterexampleConfig> {
    let mut c: CounterexampleConfig = base(cli.config.as_deref())?;
    set(&mut c.ns, a.ns.clone());
    set(&mut c.epsilons, a.epsilons.clone());
    set(&mut c.seeds, a.seeds);
    set(&mut c.grid, a.grid);
    set(&mut c.seed, cli.seed);
    Ok(c)
}

pub fn synth_config(cli: &Cli, a: &SynthArgs) -> CliResult<SynthConfig> {
    let mut c: SynthConfig = base(cli.config.as_deref())?;
    set(&mut c.system, a.system);
    set(&mut c.d, a.d);
    set(&mut c.sigma, a.sigma);
    set(&mut c.shifts, a.shifts.clone());
    if a.weights.is_some() {
        c.weights = a.weights.clone();
    }
    set(&mut c.tau, a.tau);
    set(&mut c.shift, a.shift);
    set(&mut c.n, a.n);
    if a.geometry_seed.is_some() {
        c.geometry_seed = a.geometry_seed;
    }
    if a.output.is_some() {
        c.output = a.output.clone();
    }
    set(&mut c.seed, cli.seed);
    Ok(c)
}

fn report(a: &artifact::RunArtifact, out: &Path) {
    println!(
        "{}: {} output{} in {} ({:.2}s)",
        a.command,
        a.outputs.len(),
        if a.outputs.len() == 1 { "" } else { "s" },
        out.display(),
        a.total_seconds
    );
}

/// Runs the parsed command line.
pub fn run(cli: &Cli) -> CliResult<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::config("--threads must be at least 1"));
        }
        // a second initialization in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let out = cli.out_dir.as_path();
    let artifact = match &cli.command {
        Command::Sweep(a) => commands::sweep::run(&sweep_config(cli, a)?, out)?,
        Command::Embed(a) => commands::embed::run(&embed_config(cli, a)?, out)?,
        Command::Extend(a) => commands::extend::run(&extend_config(cli, a)?, out)?,
        Command::Converge(a) => commands::converge::run(&converge_config(cli, a)?, out)?,
        Command::CompareUlam(a) => commands::ulam::run(&ulam_config(cli, a)?, out)?,
        Command::Counterexample(a) => commands::counterexample::run(&counterexample_config(cli, a)?, out)?,
        Command::Synth(a) => {
            let path = commands::synth::run(&synth_config(cli, a)?, out)?;
            println!("synth: wrote {}", path.display());
            return Ok(());
        }
    };
    report(&artifact, out);
    Ok(())
}
