//! Paired transition samples `(x_i, y_i)`.

use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cloud::{NumericTable, PointCloud};
use crate::error::{Error, Result};

/// Header prefix marking pass-through label columns in transition CSVs.
pub const LABEL_PREFIX: &str = "latent";

/// Where the pairs came from when they were cut out of a single trajectory:
/// `x_i = z[t0 + stride·i]`, `y_i = z[t0 + stride·i + lag]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub t0: usize,
    pub stride: usize,
    pub lag: usize,
}

/// A named per-sample column carried alongside the data and never read by the estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelColumn {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TransitionData {
    x: Arc<PointCloud>,
    y: Arc<PointCloud>,
    labels: Vec<LabelColumn>,
    meta: Option<TrajectoryMeta>,
}

impl TransitionData {
    /// Pairs row `i` of `x` with row `i` of `y`. Both are given as flat row-major coordinates.
    pub fn new(dim: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: y.len(),
            });
        }
        if x.is_empty() {
            return Err(Error::NoData);
        }
        Ok(Self {
            x: Arc::new(PointCloud::uniform(dim, x)?),
            y: Arc::new(PointCloud::uniform(dim, y)?),
            labels: Vec::new(),
            meta: None,
        })
    }

    pub fn from_pairs<P: AsRef<[f64]>>(pairs: &[(P, P)]) -> Result<Self> {
        let dim = pairs.first().ok_or(Error::NoData)?.0.as_ref().len();
        let mut x = Vec::with_capacity(pairs.len() * dim);
        let mut y = Vec::with_capacity(pairs.len() * dim);
        for (a, b) in pairs {
            let (a, b) = (a.as_ref(), b.as_ref());
            if a.len() != dim || b.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: if a.len() != dim { a.len() } else { b.len() },
                });
            }
            x.extend_from_slice(a);
            y.extend_from_slice(b);
        }
        Self::new(dim, x, y)
    }

    /// Cuts pairs out of a trajectory given as one state per row.
    pub fn from_trajectory(states: &PointCloud, meta: TrajectoryMeta) -> Result<Self> {
        if meta.stride == 0 {
            return Err(Error::InvalidInput("stride must be at least 1".into()));
        }
        let t = states.len();
        if meta.t0 + meta.lag >= t {
            return Err(Error::NoData);
        }
        let n = (t - 1 - meta.t0 - meta.lag) / meta.stride + 1;
        let d = states.dim();
        let mut x = Vec::with_capacity(n * d);
        let mut y = Vec::with_capacity(n * d);
        for i in 0..n {
            let s = meta.t0 + meta.stride * i;
            x.extend_from_slice(states.point(s));
            y.extend_from_slice(states.point(s + meta.lag));
        }
        let mut out = Self::new(d, x, y)?;
        out.meta = Some(meta);
        Ok(out)
    }

    pub fn with_labels(mut self, labels: Vec<LabelColumn>) -> Result<Self> {
        for l in &labels {
            if l.values.len() != self.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.len(),
                    found: l.values.len(),
                });
            }
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn with_meta(mut self, meta: TrajectoryMeta) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }

    pub fn x(&self) -> &Arc<PointCloud> {
        &self.x
    }

    pub fn y(&self) -> &Arc<PointCloud> {
        &self.y
    }

    pub fn labels(&self) -> &[LabelColumn] {
        &self.labels
    }

    pub fn label(&self, name: &str) -> Option<&[f64]> {
        self.labels.iter().find(|l| l.name == name).map(|l| l.values.as_slice())
    }

    pub fn meta(&self) -> Option<TrajectoryMeta> {
        self.meta
    }

    /// Subset of pairs, labels included.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let (d, n) = (self.dim(), self.len());
        let mut x = Vec::with_capacity(indices.len() * d);
        let mut y = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, len: n });
            }
            x.extend_from_slice(self.x.point(i));
            y.extend_from_slice(self.y.point(i));
        }
        let labels = self
            .labels
            .iter()
            .map(|l| LabelColumn {
                name: l.name.clone(),
                values: indices.iter().map(|&i| l.values[i]).collect(),
            })
            .collect();
        Self::new(d, x, y)?.with_labels(labels)
    }

    /// Reads `2d` coordinate columns (x then y), optionally followed by
    /// label columns whose header starts with `latent`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let table = NumericTable::read(reader)?;
        if table.rows.is_empty() {
            return Err(Error::NoData);
        }
        let label_cols: Vec<usize> = match &table.headers {
            Some(h) => (0..table.ncols).filter(|&c| h[c].starts_with(LABEL_PREFIX)).collect(),
            None => Vec::new(),
        };
        let coord_cols: Vec<usize> = (0..table.ncols).filter(|c| !label_cols.contains(c)).collect();
        if coord_cols.is_empty() || !coord_cols.len().is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "expected an even number of coordinate columns, found {}",
                coord_cols.len()
            )));
        }
        let d = coord_cols.len() / 2;
        let n = table.rows.len();
        let mut x = Vec::with_capacity(n * d);
        let mut y = Vec::with_capacity(n * d);
        for row in &table.rows {
            x.extend(coord_cols[..d].iter().map(|&c| row[c]));
            y.extend(coord_cols[d..].iter().map(|&c| row[c]));
        }
        let headers = table.headers.as_ref();
        let labels = label_cols
            .iter()
            .map(|&c| LabelColumn {
                name: headers.map(|h| h[c].clone()).unwrap_or_default(),
                values: table.rows.iter().map(|r| r[c]).collect(),
            })
            .collect();
        Self::new(d, x, y)?.with_labels(labels)
    }

    /// Writes `x0..,y0..,<labels>` with a header row.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let d = self.dim();
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..d).map(|k| format!("x{k}")).collect();
        header.extend((0..d).map(|k| format!("y{k}")));
        header.extend(self.labels.iter().map(|l| l.name.clone()));
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self.x.point(i).iter().map(|c| format!("{c:e}")).collect();
            rec.extend(self.y.point(i).iter().map(|c| format!("{c:e}")));
            rec.extend(self.labels.iter().map(|l| format!("{:e}", l.values[i])));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}
