//! Weighted point clouds backing empirical measures.

use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Smallest tolerance on the weight sum; large clouds get n·8·eps for rounding.
const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A weighted sample set in `R^d`.
///
/// Coordinates are stored row-major (`n × d`). Weights are non-negative and
/// sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

impl PointCloud {
    /// Builds a cloud with explicit weights. The weights are checked, not renormalized.
    pub fn new(dim: usize, coords: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("point dimension must be positive".into()));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: coords.len() % dim,
            });
        }
        let n = coords.len() / dim;
        if n == 0 {
            return Err(Error::EmptyCloud);
        }
        if weights.len() != n {
            return Err(Error::InvalidWeights(format!(
                "{} weights for {n} points",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidWeights("weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL.max(n as f64 * 8.0 * f64::EPSILON) {
            return Err(Error::InvalidWeights(format!("weights sum to {total}, not 1")));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite coordinate".into()));
        }
        Ok(Self { dim, coords, weights })
    }

    /// Uniform weights `1/n`.
    pub fn uniform(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || !coords.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: if dim == 0 { 0 } else { coords.len() % dim },
            });
        }
        let n = coords.len() / dim;
        if n == 0 {
            return Err(Error::EmptyCloud);
        }
        Self::new(dim, coords, vec![1.0 / n as f64; n])
    }

    /// Builds a uniform cloud from a list of points, checking that all share one dimension.
    pub fn from_points<P: AsRef<[f64]>>(points: &[P]) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptyCloud)?;
        let dim = first.as_ref().len();
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            let p = p.as_ref();
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            coords.extend_from_slice(p);
        }
        Self::uniform(dim, coords)
    }

    /// Rescales arbitrary non-negative weights to sum to one.
    pub fn with_unnormalized_weights(dim: usize, coords: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidWeights("weights must have positive finite sum".into()));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Self::new(dim, coords, weights)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn is_uniform(&self) -> bool {
        let w0 = 1.0 / self.len() as f64;
        self.weights.iter().all(|w| (w - w0).abs() <= 1e-15)
    }

    /// Per-axis `(min, max)` over all points.
    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        let mut bb = vec![(f64::INFINITY, f64::NEG_INFINITY); self.dim];
        for p in self.points() {
            for (b, &c) in bb.iter_mut().zip(p) {
                b.0 = b.0.min(c);
                b.1 = b.1.max(c);
            }
        }
        bb
    }

    /// Sub-cloud on the given indices with weights renormalized.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        let mut weights = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: self.len(),
                });
            }
            coords.extend_from_slice(self.point(i));
            weights.push(self.weights[i]);
        }
        Self::with_unnormalized_weights(self.dim, coords, weights)
    }

    /// Reads one point per row. A header is optional; a column named `w` is
    /// taken as (unnormalized) weights, all other columns as coordinates.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let table = NumericTable::read(reader)?;
        let weight_col = table
            .headers
            .as_ref()
            .and_then(|h| h.iter().position(|name| name == "w"));
        let coord_cols: Vec<usize> = (0..table.ncols).filter(|c| Some(*c) != weight_col).collect();
        if coord_cols.is_empty() {
            return Err(Error::InvalidInput("no coordinate columns".into()));
        }
        let dim = coord_cols.len();
        let mut coords = Vec::with_capacity(table.rows.len() * dim);
        let mut weights = Vec::with_capacity(table.rows.len());
        for row in &table.rows {
            coords.extend(coord_cols.iter().map(|&c| row[c]));
            weights.push(weight_col.map_or(1.0, |c| row[c]));
        }
        if weights.is_empty() {
            return Err(Error::EmptyCloud);
        }
        Self::with_unnormalized_weights(dim, coords, weights)
    }

    /// Writes `x0..x{d-1},w`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.dim).map(|k| format!("x{k}")).collect();
        header.push("w".into());
        w.write_record(&header)?;
        for (p, wt) in self.points().zip(&self.weights) {
            let mut rec: Vec<String> = p.iter().map(|c| format!("{c:e}")).collect();
            rec.push(format!("{wt:e}"));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A numeric CSV table with an optional header row.
#[derive(Debug, Clone)]
pub(crate) struct NumericTable {
    pub headers: Option<Vec<String>>,
    pub ncols: usize,
    pub rows: Vec<Vec<f64>>,
}

impl NumericTable {
    pub fn read<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut headers = None;
        let mut rows = Vec::new();
        let mut ncols = None;
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.iter().all(|f| f.is_empty()) {
                continue;
            }
            let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
            match parsed {
                Ok(vals) => {
                    let n = *ncols.get_or_insert(vals.len());
                    if vals.len() != n {
                        return Err(Error::InvalidInput(format!(
                            "row {} has {} columns, expected {n}",
                            line + 1,
                            vals.len()
                        )));
                    }
                    rows.push(vals);
                }
                Err(_) if line == 0 && headers.is_none() => {
                    let h: Vec<String> = rec.iter().map(str::to_owned).collect();
                    ncols = Some(h.len());
                    headers = Some(h);
                }
                Err(e) => {
                    return Err(Error::InvalidInput(format!("row {}: {e}", line + 1)));
                }
            }
        }
        Ok(Self {
            headers,
            ncols: ncols.unwrap_or(0),
            rows,
        })
    }
}
