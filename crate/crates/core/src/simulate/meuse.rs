//! Soil-type classification on a user-supplied Meuse table: repeated random
//! train/test splits scored by misclassification.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::baselines::{fit_baseline, BaselineMethod, MethodSettings};
use super::benchmark::median;
use crate::error::{Error, Result};
use crate::forest::ForestParams;
use crate::spatial::{misclassification, FeatureMatrix, Location, SpatialDataset};
use crate::{par, seed};

/// Column names in the Meuse CSV. The label is `1{soil == 1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeuseColumns {
    pub x: String,
    pub y: String,
    pub soil: String,
    /// Distance to the river.
    pub dist: String,
    /// Surface-water occurrence.
    pub water: String,
}

impl Default for MeuseColumns {
    fn default() -> Self {
        Self {
            x: "x".into(),
            y: "y".into(),
            soil: "soil".into(),
            dist: "dist".into(),
            water: "swo".into(),
        }
    }
}

/// Loads the table as covariates `(dist, water)`, locations `(x, y)` and the
/// dominant-soil indicator.
pub fn load_meuse(path: impl AsRef<Path>, cols: &MeuseColumns) -> Result<SpatialDataset> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let idx = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim().trim_matches('"') == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let names = [&cols.x, &cols.y, &cols.dist, &cols.water, &cols.soil];
    let pos = names.map(|c| idx(c));
    let pos: Vec<usize> = pos.into_iter().collect::<Result<_>>()?;
    let mut locs = Vec::new();
    let mut x = Vec::new();
    let mut labels = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let mut v = [0.0; 5];
        for (k, &p) in pos.iter().enumerate() {
            v[k] = rec
                .get(p)
                .and_then(|s| s.trim().trim_matches('"').parse::<f64>().ok())
                .filter(|f| f.is_finite())
                .ok_or_else(|| Error::NonFiniteValue {
                    row: row + 1,
                    column: names[k].clone(),
                })?;
        }
        locs.push(Location::xy(v[0], v[1]));
        x.extend_from_slice(&v[2..4]);
        labels.push(u8::from(v[4] == 1.0));
    }
    let n = labels.len();
    SpatialDataset::new(locs, FeatureMatrix::new(n, 2, x)?, labels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeuseConfig {
    pub splits: usize,
    pub test_fraction: f64,
    pub seed: u64,
    pub methods: Vec<BaselineMethod>,
    pub settings: MethodSettings,
}

impl Default for MeuseConfig {
    fn default() -> Self {
        Self {
            splits: 100,
            test_fraction: 0.2,
            seed: 0,
            methods: BaselineMethod::ALL.to_vec(),
            // about 124 training sites: the default leaf floor would leave
            // no room for cross-validation halves
            settings: MethodSettings {
                forest: ForestParams {
                    t_c: 5,
                    ..Default::default()
                },
                ..Default::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitError {
    pub split: usize,
    pub method: BaselineMethod,
    /// `NaN` when the method failed on this split.
    pub misclassification: f64,
}

/// Random `test_fraction` test splits, each scored for every method.
pub fn run_meuse(data: &SpatialDataset, config: &MeuseConfig) -> Result<Vec<SplitError>> {
    if !(config.test_fraction > 0.0 && config.test_fraction < 1.0) || config.splits == 0 {
        return Err(Error::InvalidParameter("need splits >= 1 and test_fraction in (0, 1)".into()));
    }
    config.settings.validate()?;
    let n = data.len();
    let n_test = ((config.test_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let per_split = par::map_range(config.splits, |s| -> Result<Vec<SplitError>> {
        let ss = seed::derive(config.seed, s as u64);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut seed::rng(seed::derive(ss, 0)));
        let (test_idx, train_idx) = perm.split_at(n_test);
        let mut test_idx = test_idx.to_vec();
        let mut train_idx = train_idx.to_vec();
        test_idx.sort_unstable();
        train_idx.sort_unstable();
        let train = data.subset(&train_idx)?;
        let test = data.subset(&test_idx)?;
        let settings = config.settings.reseeded(seed::derive(ss, 1));
        Ok(config
            .methods
            .iter()
            .map(|&method| {
                let err = fit_baseline(method, &train, &settings)
                    .and_then(|f| f.predict(test.covariates(), test.locations()))
                    .and_then(|p| misclassification(&p, test.labels(), 0.5))
                    .map(|r| r.value)
                    .unwrap_or_else(|e| {
                        log::warn!("split {s} {method}: {e}");
                        f64::NAN
                    });
                SplitError {
                    split: s,
                    method,
                    misclassification: err,
                }
            })
            .collect())
    });
    let mut out = Vec::new();
    for r in per_split {
        out.extend(r?);
    }
    Ok(out)
}

/// Median over the splits where `method` succeeded.
pub fn median_error(results: &[SplitError], method: BaselineMethod) -> f64 {
    let v: Vec<f64> = results
        .iter()
        .filter(|r| r.method == method)
        .map(|r| r.misclassification)
        .collect();
    median(&v)
}
