//! `run.json`: what was run, on which inputs, what it wrote and how long it took.

use std::fs::{self, File};
use std::io::{BufWriter, Read};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::SCHEMA;
use crate::error::{io_at, CliError, CliResult};

pub const RUN_FILE: &str = "run.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    /// Some grid points failed; completed ones were still written.
    Partial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub kind: String,
    /// Relative to the run directory.
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub label: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunArtifact {
    pub schema: u32,
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub threads: usize,
    pub parallel: bool,
    pub inputs: Vec<InputRecord>,
    pub outputs: Vec<OutputRecord>,
    pub timings: Vec<Timing>,
    pub total_seconds: f64,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
}

impl RunArtifact {
    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(io_at(path))?;
        let a: Self = serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        if a.schema != SCHEMA {
            return Err(CliError::config(format!(
                "{}: unsupported schema {}",
                path.display(),
                a.schema
            )));
        }
        Ok(a)
    }

    pub fn output(&self, kind: &str) -> Option<&Path> {
        self.outputs.iter().find(|o| o.kind == kind).map(|o| o.path.as_path())
    }

    pub fn input(&self, role: &str) -> Option<&Path> {
        self.inputs.iter().find(|i| i.role == role).map(|i| i.path.as_path())
    }
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let mut f = File::open(path).map_err(io_at(path))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(io_at(path))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

/// Collects the artifact while a command runs and writes it on [`Run::finish`].
pub struct Run {
    dir: PathBuf,
    started: Instant,
    artifact: RunArtifact,
}

impl Run {
    pub fn start<C: Serialize>(dir: &Path, command: &str, config: &C, seed: u64) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(io_at(dir))?;
        let config = serde_json::to_value(config).map_err(|e| CliError::config(e.to_string()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            started: Instant::now(),
            artifact: RunArtifact {
                schema: SCHEMA,
                command: command.to_owned(),
                config,
                seed,
                threads: rayon::current_num_threads(),
                parallel: eto_core::exec::is_parallel(),
                inputs: Vec::new(),
                outputs: Vec::new(),
                timings: Vec::new(),
                total_seconds: 0.0,
                status: Status::Ok,
                failures: Vec::new(),
            },
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Records an input file with its hash; the stored path is absolute.
    pub fn input(&mut self, role: &str, path: &Path) -> CliResult<()> {
        let sha256 = sha256_file(path)?;
        let path = fs::canonicalize(path).map_err(io_at(path))?;
        self.artifact.inputs.push(InputRecord {
            role: role.to_owned(),
            path,
            sha256,
        });
        Ok(())
    }

    /// Opens `name` inside the run directory and records it as an output of `kind`.
    pub fn create(&mut self, kind: &str, name: impl AsRef<Path>) -> CliResult<BufWriter<File>> {
        let rel = name.as_ref().to_path_buf();
        let path = self.dir.join(&rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_at(parent))?;
        }
        let f = File::create(&path).map_err(io_at(&path))?;
        self.artifact.outputs.push(OutputRecord {
            kind: kind.to_owned(),
            path: rel,
        });
        Ok(BufWriter::new(f))
    }

    pub fn time(&mut self, label: impl Into<String>, seconds: f64) {
        self.artifact.timings.push(Timing {
            label: label.into(),
            seconds,
        });
    }

    pub fn fail(&mut self, what: impl Into<String>) {
        self.artifact.status = Status::Partial;
        self.artifact.failures.push(what.into());
    }

    /// Writes `run.json`; a partial run becomes a solver failure after the artifact is on disk.
    pub fn finish(mut self) -> CliResult<RunArtifact> {
        self.artifact.total_seconds = self.started.elapsed().as_secs_f64();
        let path = self.dir.join(RUN_FILE);
        let f = File::create(&path).map_err(io_at(&path))?;
        serde_json::to_writer_pretty(BufWriter::new(f), &self.artifact).map_err(|e| CliError::Io(e.to_string()))?;
        if self.artifact.status == Status::Partial {
            return Err(CliError::Solver(format!(
                "{} of the requested points failed: {}",
                self.artifact.failures.len(),
                self.artifact.failures.join("; ")
            )));
        }
        Ok(self.artifact)
    }
}
