//! Single- versus double-blur error on the system `X ~ U[0,1]`, `Y ~ ½(δ₀ + δ₁)`.

use std::path::Path;

use eto_core::baselines::{double_blur_error, single_blur_counterexample};
use eto_core::metrics::mean_ci95;

use super::{operator_options, replicate_seed};
use crate::artifact::{Run, RunArtifact};
use crate::config::{check_schema, non_empty, positive, CounterexampleConfig};
use crate::error::{CliError, CliResult};

pub const ERRORS: &str = "counterexample.csv";
pub const SUMMARY: &str = "summary.csv";

pub fn validate(cfg: &CounterexampleConfig) -> CliResult<()> {
    check_schema(cfg.schema)?;
    non_empty("ns", &cfg.ns)?;
    non_empty("epsilons", &cfg.epsilons)?;
    positive("epsilons", &cfg.epsilons)?;
    if cfg.ns.contains(&0) || cfg.seeds == 0 || cfg.grid == 0 {
        return Err(CliError::config("ns, seeds and grid must be positive"));
    }
    Ok(())
}

pub fn run(cfg: &CounterexampleConfig, out: &Path) -> CliResult<RunArtifact> {
    validate(cfg)?;
    let mut run = Run::start(out, "counterexample", cfg, cfg.seed)?;
    let opts = operator_options(cfg.tol, cfg.max_iter, None)?;
    let mut rows: Vec<(&str, f64, usize, u64, f64)> = Vec::new();
    for &eps in &cfg.epsilons {
        for &n in &cfg.ns {
            let t = std::time::Instant::now();
            for s in 0..cfg.seeds {
                let seed = replicate_seed(cfg.seed, s);
                match single_blur_counterexample(n, eps, seed) {
                    Ok(r) => rows.push(("single", eps, n, seed, r.l2_error)),
                    Err(e) => run.fail(format!("single epsilon={eps} N={n} seed={seed}: {e}")),
                }
                match double_blur_error(n, eps, seed, cfg.grid, &opts) {
                    Ok(v) => rows.push(("double", eps, n, seed, v)),
                    Err(e) => run.fail(format!("double epsilon={eps} N={n} seed={seed}: {e}")),
                }
            }
            run.time(format!("epsilon={eps} N={n}"), t.elapsed().as_secs_f64());
        }
    }
    let mut w = csv::Writer::from_writer(run.create("errors", ERRORS)?);
    w.write_record(["method", "epsilon", "N", "seed", "l2_error"])?;
    for (m, eps, n, seed, v) in &rows {
        w.write_record([
            m.to_string(),
            eps.to_string(),
            n.to_string(),
            seed.to_string(),
            format!("{v:e}"),
        ])?;
    }
    w.flush()?;
    drop(w);

    let mut w = csv::Writer::from_writer(run.create("summary", SUMMARY)?);
    w.write_record(["method", "epsilon", "N", "mean", "ci95", "seed_count"])?;
    for m in ["single", "double"] {
        for &eps in &cfg.epsilons {
            for &n in &cfg.ns {
                let v: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.0 == m && r.1 == eps && r.2 == n)
                    .map(|r| r.4)
                    .collect();
                if v.is_empty() {
                    continue;
                }
                let (mean, half) = mean_ci95(&v);
                w.write_record([
                    m.to_owned(),
                    eps.to_string(),
                    n.to_string(),
                    format!("{mean:e}"),
                    format!("{half:e}"),
                    v.len().to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    drop(w);
    run.finish()
}
