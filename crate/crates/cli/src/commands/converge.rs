//! Kernel-distance convergence study on torus shift systems over an `(ε, σ, N, d)` grid.

use std::path::Path;

use eto_core::metrics::{
    l2_distance_mc, loglog_slope, mean_ci95, true_vs_regularized, uniform_torus_pairs, write_reports_csv,
    DistanceMethod, KernelDistanceReport, KernelPair, McEstimate, RegularizedTorusKernel, MIN_MC,
};
use eto_core::operator::OperatorOptions;
use eto_core::ot::EvalMode;
use eto_core::synth::{sample_torus_shift, true_kernel_torus, TorusShiftSpec};
use eto_core::{build_operator, CostSpec, Variant};
use rayon::prelude::*;

use super::{operator_options, replicate_seed};
use crate::artifact::{Run, RunArtifact};
use crate::config::{check_schema, non_empty, positive, ConvergeConfig};
use crate::error::{CliError, CliResult};

pub const METRICS: &str = "metrics.csv";
pub const SLOPES: &str = "slopes.csv";

/// Offset separating the Monte-Carlo stream from the sampling stream of the same replicate.
const MC_STREAM: u64 = 0x6d63_5f65_7661_6c73;

pub fn validate(cfg: &ConvergeConfig) -> CliResult<()> {
    check_schema(cfg.schema)?;
    non_empty("sigmas", &cfg.sigmas)?;
    non_empty("epsilons", &cfg.epsilons)?;
    non_empty("dims", &cfg.dims)?;
    non_empty("pairs", &cfg.pairs)?;
    non_empty("shifts", &cfg.shifts)?;
    positive("sigmas", &cfg.sigmas)?;
    positive("epsilons", &cfg.epsilons)?;
    if cfg.weights.len() != cfg.shifts.len() {
        return Err(CliError::config("weights and shifts must have the same length"));
    }
    if cfg.dims.contains(&0) {
        return Err(CliError::config("dims must be at least 1"));
    }
    let empirical = cfg.pairs.iter().any(|p| *p != KernelPair::TrueVsRegularized);
    if empirical {
        non_empty("ns", &cfg.ns)?;
        if cfg.ns.contains(&0) || cfg.seeds == 0 {
            return Err(CliError::config("ns and seeds must be positive"));
        }
    }
    if cfg.mc_samples < MIN_MC {
        return Err(CliError::config(format!("mc_samples must be at least {MIN_MC}")));
    }
    Ok(())
}

fn spec(cfg: &ConvergeConfig, d: usize, sigma: f64) -> TorusShiftSpec {
    TorusShiftSpec {
        d,
        shifts: cfg.shifts.clone(),
        weights: cfg.weights.clone(),
        sigma,
    }
}

/// Both empirical distances from one sample, sharing the operator build.
fn empirical(
    spec: &TorusShiftSpec,
    reg: &RegularizedTorusKernel,
    n: usize,
    seed: u64,
    samples: usize,
    opts: &OperatorOptions,
) -> eto_core::Result<(McEstimate, McEstimate)> {
    let data = sample_torus_shift(spec, n, seed)?;
    let op = build_operator(
        &data,
        &CostSpec::unit_torus(spec.d),
        reg.epsilon(),
        Variant::Stationary,
        opts,
    )?;
    let emp = |x: &[f64], y: &[f64]| op.kernel_evaluate(x, y).unwrap_or(f64::NAN);
    let mc_seed = seed ^ MC_STREAM;
    let a = l2_distance_mc(
        |x, y| reg.eval(x, y),
        emp,
        uniform_torus_pairs(spec.d),
        samples,
        mc_seed,
    )?;
    let b = l2_distance_mc(
        |x, y| true_kernel_torus(spec, x, y),
        emp,
        uniform_torus_pairs(spec.d),
        samples,
        mc_seed,
    )?;
    Ok((a, b))
}

fn aggregate(values: &[McEstimate]) -> (f64, f64) {
    if values.len() == 1 {
        return (values[0].value, values[0].stderr);
    }
    let v: Vec<f64> = values.iter().map(|e| e.value).collect();
    let (mean, _) = mean_ci95(&v);
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    (mean, (var / v.len() as f64).sqrt())
}

pub fn run(cfg: &ConvergeConfig, out: &Path) -> CliResult<RunArtifact> {
    validate(cfg)?;
    let mut run = Run::start(out, "converge", cfg, cfg.seed)?;
    let opts = operator_options(cfg.tol, cfg.max_iter, None)?.with_representation(EvalMode::Lazy);
    let wants = |p: KernelPair| cfg.pairs.contains(&p);
    let mut reports = Vec::new();
    for &d in &cfg.dims {
        for &sigma in &cfg.sigmas {
            let spec = spec(cfg, d, sigma);
            spec.validate().map_err(CliError::from)?;
            for &eps in &cfg.epsilons {
                let t = std::time::Instant::now();
                let reg = RegularizedTorusKernel::new(&spec, eps, cfg.proxy_resolution)?;
                if wants(KernelPair::TrueVsRegularized) {
                    let (value, stderr, method) = if d == 1 {
                        let v = true_vs_regularized(&spec, eps, cfg.grid_resolution)?;
                        (
                            v,
                            0.0,
                            DistanceMethod::GridQuadrature {
                                resolution: cfg.grid_resolution,
                            },
                        )
                    } else {
                        let e = l2_distance_mc(
                            |x, y| true_kernel_torus(&spec, x, y),
                            |x, y| reg.eval(x, y),
                            uniform_torus_pairs(d),
                            cfg.mc_samples,
                            cfg.seed ^ MC_STREAM,
                        )?;
                        (
                            e.value,
                            e.stderr,
                            DistanceMethod::MonteCarlo {
                                samples: cfg.mc_samples,
                            },
                        )
                    };
                    reports.push(KernelDistanceReport {
                        pair: KernelPair::TrueVsRegularized,
                        dim: d,
                        epsilon: eps,
                        sigma,
                        n: None,
                        value,
                        stderr,
                        seed_count: 1,
                        method,
                    });
                }
                let need = wants(KernelPair::RegularizedVsEmpirical) || wants(KernelPair::TrueVsEmpirical);
                for &n in cfg.ns.iter().filter(|_| need) {
                    let results: Vec<_> = (0..cfg.seeds)
                        .into_par_iter()
                        .map(|s| empirical(&spec, &reg, n, replicate_seed(cfg.seed, s), cfg.mc_samples, &opts))
                        .collect();
                    let mut ok = Vec::new();
                    for (s, r) in results.into_iter().enumerate() {
                        match r {
                            Ok(pair) => ok.push(pair),
                            Err(e) => run.fail(format!("d={d} sigma={sigma} epsilon={eps} N={n} seed {s}: {e}")),
                        }
                    }
                    if ok.is_empty() {
                        continue;
                    }
                    let method = DistanceMethod::MonteCarlo {
                        samples: cfg.mc_samples,
                    };
                    for (pair, pick) in [
                        (KernelPair::RegularizedVsEmpirical, 0usize),
                        (KernelPair::TrueVsEmpirical, 1usize),
                    ] {
                        if !wants(pair) {
                            continue;
                        }
                        let vals: Vec<McEstimate> = ok.iter().map(|p| if pick == 0 { p.0 } else { p.1 }).collect();
                        let (value, stderr) = aggregate(&vals);
                        reports.push(KernelDistanceReport {
                            pair,
                            dim: d,
                            epsilon: eps,
                            sigma,
                            n: Some(n),
                            value,
                            stderr,
                            seed_count: vals.len(),
                            method,
                        });
                    }
                }
                run.time(format!("d={d} sigma={sigma} epsilon={eps}"), t.elapsed().as_secs_f64());
            }
        }
    }
    write_reports_csv(run.create("metrics", METRICS)?, &reports)?;
    write_slopes(&mut run, &reports)?;
    run.finish()
}

/// Log-log slope in `N` per empirical pair and `(d, σ, ε)`, where at least three sizes completed.
fn write_slopes(run: &mut Run, reports: &[KernelDistanceReport]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(run.create("slopes", SLOPES)?);
    w.write_record(["pair", "epsilon", "sigma", "slope", "ci_low", "ci_high", "points"])?;
    let mut keys: Vec<(String, f64, f64)> = Vec::new();
    for r in reports.iter().filter(|r| r.n.is_some()) {
        let k = (r.pair_label(), r.epsilon, r.sigma);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    for (label, eps, sigma) in keys {
        let (ns, vs): (Vec<f64>, Vec<f64>) = reports
            .iter()
            .filter(|r| r.pair_label() == label && r.epsilon == eps && r.sigma == sigma && r.value > 0.0)
            .filter_map(|r| r.n.map(|n| (n as f64, r.value)))
            .unzip();
        if ns.len() < 3 {
            continue;
        }
        let fit = loglog_slope(&ns, &vs)?;
        w.write_record([
            label,
            eps.to_string(),
            sigma.to_string(),
            fit.slope.to_string(),
            fit.ci_low.to_string(),
            fit.ci_high.to_string(),
            ns.len().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
