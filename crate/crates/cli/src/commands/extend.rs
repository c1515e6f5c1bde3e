//! Out-of-sample extension of a stored embedding to new points.

use std::path::{Path, PathBuf};

use eto_core::data::{LabelColumn, LABEL_PREFIX};
use eto_core::oos::{extend_embedding, ExtensionOptions};
use eto_core::{build_operator, PointCloud};

use super::{check_spectrum, default_indices, load_data, load_spectrum, open, operator_options};
use crate::artifact::{Run, RunArtifact, RUN_FILE};
use crate::config::{check_schema, DataSettings, DataSpec, EmbedConfig, ExtendConfig, VariantKind};
use crate::error::{CliError, CliResult};

pub const EXTENDED: &str = "extended.csv";

/// Query points with any pass-through label columns.
#[derive(Debug, Clone)]
pub struct Points {
    pub cloud: PointCloud,
    pub labels: Vec<LabelColumn>,
}

fn is_skipped(name: &str) -> bool {
    name == "w" || name == "index" || name == "low_confidence"
}

/// Reads query points of dimension `dim`. Columns `w`, `index` and `low_confidence` are
/// ignored, `latent*` columns are carried through, and a pair file (`2·dim` coordinate
/// columns) contributes its first `dim` columns.
pub fn read_points(path: &Path, dim: usize) -> CliResult<Points> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(open(path)?);
    let mut header: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parsed: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) => rows.push(v),
            Err(_) if line == 0 => header = Some(rec.iter().map(str::to_owned).collect()),
            Err(e) => return Err(CliError::config(format!("{}: row {}: {e}", path.display(), line + 1))),
        }
    }
    if rows.is_empty() {
        return Err(CliError::config(format!("{}: no points", path.display())));
    }
    let ncols = header.as_ref().map_or(rows[0].len(), Vec::len);
    if let Some(bad) = rows.iter().position(|r| r.len() != ncols) {
        return Err(CliError::config(format!(
            "{}: row {} has the wrong number of columns",
            path.display(),
            bad + 1
        )));
    }
    let name = |c: usize| header.as_ref().map(|h| h[c].as_str()).unwrap_or("");
    let label_cols: Vec<usize> = (0..ncols).filter(|&c| name(c).starts_with(LABEL_PREFIX)).collect();
    let coord_cols: Vec<usize> = (0..ncols)
        .filter(|&c| !label_cols.contains(&c) && !is_skipped(name(c)))
        .collect();
    if coord_cols.len() != dim && coord_cols.len() != 2 * dim {
        return Err(CliError::config(format!(
            "{}: expected {dim} or {} coordinate columns, found {}",
            path.display(),
            2 * dim,
            coord_cols.len()
        )));
    }
    let coords: Vec<f64> = rows
        .iter()
        .flat_map(|r| coord_cols[..dim].iter().map(move |&c| r[c]))
        .collect();
    let labels = label_cols
        .iter()
        .map(|&c| LabelColumn {
            name: name(c).to_owned(),
            values: rows.iter().map(|r| r[c]).collect(),
        })
        .collect();
    Ok(Points {
        cloud: PointCloud::uniform(dim, coords)?,
        labels,
    })
}

struct Resolved {
    spec: DataSpec,
    spectrum: Option<PathBuf>,
    variant: VariantKind,
    tol: f64,
    max_iter: usize,
}

/// Settings of the referenced run, overridden by anything set in `cfg`.
fn resolve(cfg: &ExtendConfig) -> CliResult<Resolved> {
    let (mut spec, mut spectrum, mut variant, mut tol, mut max_iter) = (
        DataSpec {
            data: None,
            trajectory: None,
            cost: Default::default(),
            periods: None,
        },
        None,
        VariantKind::default(),
        eto_core::operator::OPERATOR_TOL,
        crate::config::MAX_ITER,
    );
    if let Some(run_path) = &cfg.run {
        let prior = crate::artifact::RunArtifact::read(run_path)?;
        if prior.command != "embed" {
            return Err(CliError::config(format!(
                "{}: expected an embed run, found {}",
                run_path.display(),
                prior.command
            )));
        }
        let embed: EmbedConfig = serde_json::from_value(prior.config.clone())
            .map_err(|e| CliError::config(format!("{}: {e}", run_path.display())))?;
        let dir = run_path.parent().unwrap_or(Path::new("."));
        spec = DataSpec {
            data: prior.input("data").map(Path::to_path_buf),
            trajectory: embed.trajectory,
            cost: embed.cost,
            periods: embed.periods,
        };
        spectrum = prior.output("spectrum").map(|p| dir.join(p));
        variant = embed.variant;
        tol = embed.tol;
        max_iter = embed.max_iter;
    }
    if let Some(d) = &cfg.data {
        spec.data = Some(d.clone());
        spec.trajectory = cfg.trajectory;
    } else if cfg.trajectory.is_some() {
        spec.trajectory = cfg.trajectory;
    }
    if let Some(c) = cfg.cost {
        spec.cost = c;
    }
    if cfg.periods.is_some() {
        spec.periods = cfg.periods.clone();
    }
    if cfg.spectrum.is_some() {
        spectrum = cfg.spectrum.clone();
    }
    Ok(Resolved {
        spec,
        spectrum,
        variant: cfg.variant.unwrap_or(variant),
        tol: cfg.tol.unwrap_or(tol),
        max_iter: cfg.max_iter.unwrap_or(max_iter),
    })
}

pub fn validate(cfg: &ExtendConfig) -> CliResult<()> {
    check_schema(cfg.schema)?;
    if cfg.points.is_none() {
        return Err(CliError::config("no points file given"));
    }
    if cfg.run.is_none() && (cfg.data.is_none() || cfg.spectrum.is_none()) {
        return Err(CliError::config(format!(
            "give a prior {RUN_FILE}, or both data and spectrum"
        )));
    }
    if !(cfg.floor >= 0.0) || !(cfg.low_confidence_gap > 0.0) {
        return Err(CliError::config(
            "floor must be non-negative and low_confidence_gap positive",
        ));
    }
    Ok(())
}

pub fn run(cfg: &ExtendConfig, out: &Path) -> CliResult<RunArtifact> {
    validate(cfg)?;
    let Resolved {
        spec,
        spectrum: spectrum_path,
        variant,
        tol,
        max_iter,
    } = resolve(cfg)?;
    let mut run = Run::start(out, "extend", cfg, 0)?;
    if let Some(r) = &cfg.run {
        run.input("run", r)?;
    }
    let data = load_data(&spec, &mut run)?;
    let spectrum_path = spectrum_path.ok_or_else(|| CliError::config("no spectrum available"))?;
    let spectrum = load_spectrum(&spectrum_path, &mut run)?;
    check_spectrum(&spectrum, &data)?;
    let points_path = cfg.points.as_deref().expect("checked by validate");
    let points = read_points(points_path, data.dim())?;
    run.input("points", points_path)?;

    let cost = spec.cost_spec(data.dim())?;
    let t = std::time::Instant::now();
    let op = build_operator(
        &data,
        &cost,
        spectrum.epsilon,
        variant.into(),
        &operator_options(tol, max_iter, None)?,
    )?;
    run.time("build", t.elapsed().as_secs_f64());
    let indices = cfg.indices.clone().unwrap_or_else(|| default_indices(spectrum.len()));
    let opts = ExtensionOptions {
        floor: cfg.floor,
        low_confidence_gap: cfg.low_confidence_gap,
    };
    let t = std::time::Instant::now();
    let ext = extend_embedding(&op, &spectrum, &indices, &points.cloud, &opts)?;
    run.time("extend", t.elapsed().as_secs_f64());
    ext.embedding.write_csv(
        run.create("extended", EXTENDED)?,
        &points.labels,
        Some(&ext.low_confidence),
    )?;
    run.finish()
}
