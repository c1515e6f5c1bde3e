use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Controls for the Sinkhorn solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Iteration cap per ε-stage.
    pub max_iter: usize,
    /// Stopping threshold on the relative L¹ marginal residual.
    pub tol: f64,
    /// Geometric ε-scaling factor in `(0, 1)`; `None` solves directly at the target ε.
    pub scaling_factor: Option<f64>,
    /// Largest cloud for which dense kernel matrices may be materialized.
    pub dense_threshold: usize,
    /// Over-relax the alternating updates with a step estimated from the plain contraction rate.
    pub overrelax: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 10_000,
            tol: 1e-6,
            scaling_factor: Some(0.5),
            dense_threshold: 20_000,
            overrelax: true,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn without_scaling(mut self) -> Self {
        self.scaling_factor = None;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidInput(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidInput("max_iter must be positive".into()));
        }
        if let Some(f) = self.scaling_factor {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::InvalidInput(format!(
                    "scaling factor must lie in (0, 1), got {f}"
                )));
            }
        }
        Ok(())
    }

    /// ε-stages from `eps0` down to `target`, geometric by the scaling factor.
    pub(crate) fn schedule(&self, eps0: f64, target: f64) -> Vec<f64> {
        let mut stages = Vec::new();
        if let Some(f) = self.scaling_factor {
            let mut e = eps0;
            while e > target {
                stages.push(e);
                e *= f;
            }
        }
        stages.push(target);
        stages
    }
}

/// JSON solver configuration: `{epsilon, max_iter, tol, scaling_factor, dense_threshold, overrelax}`.
/// Missing keys take defaults; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default = "defaults::max_iter")]
    pub max_iter: usize,
    #[serde(default = "defaults::tol")]
    pub tol: f64,
    #[serde(default = "defaults::scaling_factor")]
    pub scaling_factor: Option<f64>,
    #[serde(default = "defaults::dense_threshold")]
    pub dense_threshold: usize,
    #[serde(default = "defaults::overrelax")]
    pub overrelax: bool,
}

mod defaults {
    pub fn max_iter() -> usize {
        super::SolverOptions::default().max_iter
    }
    pub fn tol() -> f64 {
        super::SolverOptions::default().tol
    }
    pub fn scaling_factor() -> Option<f64> {
        super::SolverOptions::default().scaling_factor
    }
    pub fn dense_threshold() -> usize {
        super::SolverOptions::default().dense_threshold
    }
    pub fn overrelax() -> bool {
        super::SolverOptions::default().overrelax
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::from_options(None, &SolverOptions::default())
    }
}

impl SolverConfig {
    pub fn from_json<R: Read>(reader: R) -> Result<Self> {
        let cfg: Self = serde_json::from_reader(reader)?;
        cfg.options().validate()?;
        if let Some(e) = cfg.epsilon {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::InvalidEpsilon(e));
            }
        }
        Ok(cfg)
    }

    pub fn from_options(epsilon: Option<f64>, o: &SolverOptions) -> Self {
        Self {
            epsilon,
            max_iter: o.max_iter,
            tol: o.tol,
            scaling_factor: o.scaling_factor,
            dense_threshold: o.dense_threshold,
            overrelax: o.overrelax,
        }
    }

    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            max_iter: self.max_iter,
            tol: self.tol,
            scaling_factor: self.scaling_factor,
            dense_threshold: self.dense_threshold,
            overrelax: self.overrelax,
        }
    }
}
