//! Ground costs. Only squared metrics are supported.

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CostSpec {
    /// `|x - y|^2`
    SquaredEuclidean,
    /// Squared geodesic distance on the flat torus with the given period per axis.
    SquaredTorus { periods: Vec<f64> },
}

impl CostSpec {
    /// Unit-period torus in `d` dimensions.
    pub fn unit_torus(d: usize) -> Self {
        Self::SquaredTorus { periods: vec![1.0; d] }
    }

    pub fn description(&self) -> String {
        match self {
            Self::SquaredEuclidean => "squared euclidean distance".to_owned(),
            Self::SquaredTorus { periods } => format!("squared torus distance, periods {periods:?}"),
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), y.len());
        match self {
            Self::SquaredEuclidean => x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum(),
            Self::SquaredTorus { periods } => x
                .iter()
                .zip(y)
                .zip(periods)
                .map(|((a, b), p)| {
                    let d = wrap_delta(a - b, *p);
                    d * d
                })
                .sum(),
        }
    }

    /// Upper bound on the cost between any two points of the given clouds.
    pub fn max_cost_bound(&self, a: &PointCloud, b: &PointCloud) -> f64 {
        let (ba, bb) = (a.bounding_box(), b.bounding_box());
        ba.iter()
            .zip(&bb)
            .enumerate()
            .map(|(k, (ra, rb))| {
                let extent = ra.1.max(rb.1) - ra.0.min(rb.0);
                let extent = match self {
                    Self::SquaredEuclidean => extent,
                    Self::SquaredTorus { periods } => extent.min(0.5 * periods[k]),
                };
                extent * extent
            })
            .sum()
    }

    pub fn check_dim(&self, d: usize) -> bool {
        match self {
            Self::SquaredEuclidean => true,
            Self::SquaredTorus { periods } => periods.len() == d,
        }
    }
}

/// Representative of `delta` in `[-p/2, p/2]`.
#[inline]
pub fn wrap_delta(delta: f64, period: f64) -> f64 {
    delta - period * (delta / period).round()
}
