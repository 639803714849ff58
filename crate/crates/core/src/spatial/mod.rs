//! Shared data model: locations, covariate matrices, binary datasets, and the
//! evaluation metrics used throughout the benchmarks.

pub mod io;
mod metrics;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_dataset, load_points, write_dataset, write_points, CsvSchema};
pub use metrics::{mise, misclassification, relative_mse, EvaluationReport, Metric};

/// A point in one or two spatial dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Location {
    coords: [f64; 2],
    dim: u8,
}

impl Location {
    pub fn new(coords: &[f64]) -> Result<Self> {
        if coords.is_empty() || coords.len() > 2 {
            return Err(Error::InvalidParameter(format!(
                "locations must have 1 or 2 coordinates, got {}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite coordinate".into()));
        }
        let mut c = [0.0; 2];
        c[..coords.len()].copy_from_slice(coords);
        Ok(Self {
            coords: c,
            dim: coords.len() as u8,
        })
    }

    pub fn xy(x: f64, y: f64) -> Self {
        Self {
            coords: [x, y],
            dim: 2,
        }
    }

    pub fn line(x: f64) -> Self {
        Self {
            coords: [x, 0.0],
            dim: 1,
        }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim as usize]
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coord_sum(&self) -> f64 {
        self.coords().iter().sum()
    }

    pub fn distance(&self, other: &Location) -> f64 {
        let dx = self.coords[0] - other.coords[0];
        let dy = self.coords[1] - other.coords[1];
        (dx * dx + dy * dy).sqrt()
    }

    fn key(&self) -> (u64, u64) {
        // +0.0 folds -0.0 onto 0.0
        ((self.coords[0] + 0.0).to_bits(), (self.coords[1] + 0.0).to_bits())
    }
}

impl TryFrom<Vec<f64>> for Location {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Location::new(&v)
    }
}

impl From<Location> for Vec<f64> {
    fn from(l: Location) -> Self {
        l.coords().to_vec()
    }
}

/// Rejects repeated locations. Returns the first offending pair.
pub fn check_distinct(locs: &[Location]) -> Result<()> {
    let mut seen: HashMap<(u64, u64), usize> = HashMap::with_capacity(locs.len());
    for (i, l) in locs.iter().enumerate() {
        if let Some(&first) = seen.get(&l.key()) {
            return Err(Error::DuplicateLocation { first, second: i });
        }
        seen.insert(l.key(), i);
    }
    Ok(())
}

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Result<Self> {
        Error::check_len(n_rows * n_cols, data.len())?;
        Ok(Self {
            n_rows,
            n_cols,
            data,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for r in rows {
            Error::check_len(n_cols, r.len())?;
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), n_cols, data)
    }

    pub fn empty(n_cols: usize) -> Self {
        Self {
            n_rows: 0,
            n_cols,
            data: Vec::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols + col]
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.n_cols..(row + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.n_cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            n_rows: idx.len(),
            n_cols: self.n_cols,
            data,
        }
    }

    /// Column-wise concatenation `[self | other]`.
    pub fn hstack(&self, other: &FeatureMatrix) -> Result<Self> {
        Error::check_len(self.n_rows, other.n_rows)?;
        let n_cols = self.n_cols + other.n_cols;
        let mut data = Vec::with_capacity(self.n_rows * n_cols);
        for i in 0..self.n_rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Self::new(self.n_rows, n_cols, data)
    }

    /// Per-column `(min, max)`.
    pub fn column_bounds(&self) -> Vec<(f64, f64)> {
        let mut b = vec![(f64::INFINITY, f64::NEG_INFINITY); self.n_cols];
        for r in self.rows() {
            for (j, &v) in r.iter().enumerate() {
                b[j].0 = b[j].0.min(v);
                b[j].1 = b[j].1.max(v);
            }
        }
        b
    }
}

/// Locations, covariates and binary labels for `n` sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDataset")]
pub struct SpatialDataset {
    locations: Vec<Location>,
    covariates: FeatureMatrix,
    labels: Vec<u8>,
}

#[derive(Deserialize)]
struct RawDataset {
    locations: Vec<Location>,
    covariates: FeatureMatrix,
    labels: Vec<u8>,
}

impl TryFrom<RawDataset> for SpatialDataset {
    type Error = Error;
    fn try_from(r: RawDataset) -> Result<Self> {
        SpatialDataset::new(r.locations, r.covariates, r.labels)
    }
}

impl SpatialDataset {
    pub fn new(locations: Vec<Location>, covariates: FeatureMatrix, labels: Vec<u8>) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if covariates.n_cols() == 0 {
            return Err(Error::InvalidParameter("at least one covariate is required".into()));
        }
        Error::check_len(locations.len(), covariates.n_rows())?;
        Error::check_len(locations.len(), labels.len())?;
        if let Some((row, &v)) = labels.iter().enumerate().find(|(_, &v)| v > 1) {
            return Err(Error::NonBinaryLabel {
                row: row + 1,
                value: v.to_string(),
            });
        }
        if let Some(pos) = covariates.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                row: pos / covariates.n_cols() + 1,
                column: format!("x{}", pos % covariates.n_cols() + 1),
            });
        }
        let dim = locations[0].dim();
        if locations.iter().any(|l| l.dim() != dim) {
            return Err(Error::InvalidParameter("mixed location dimensions".into()));
        }
        check_distinct(&locations)?;
        Ok(Self {
            locations,
            covariates,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.covariates.n_cols()
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    pub fn covariates(&self) -> &FeatureMatrix {
        &self.covariates
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn labels_f64(&self) -> Vec<f64> {
        self.labels.iter().map(|&y| f64::from(y)).collect()
    }

    pub fn location_dim(&self) -> usize {
        self.locations[0].dim()
    }

    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        Self::new(
            idx.iter().map(|&i| self.locations[i]).collect(),
            self.covariates.select_rows(idx),
            idx.iter().map(|&i| self.labels[i]).collect(),
        )
    }
}

/// Locations and covariates without labels: prediction and effect queries.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    pub locations: Option<Vec<Location>>,
    pub covariates: FeatureMatrix,
}

impl PointSet {
    pub fn len(&self) -> usize {
        self.covariates.n_rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
