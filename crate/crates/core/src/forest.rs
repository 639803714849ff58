//! Bagged ensembles of GLS trees.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gls_tree::{default_m_try, grow_tree, grow_tree_with, predict_tree, GlsTree, TreeParams};
use crate::nngp::{restrict_factor, PrecisionMatrix, WorkingCorrelationSpec};
use crate::spatial::{FeatureMatrix, Location, SpatialDataset};
use crate::par::{self, Execution};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestParams {
    pub n_tree: usize,
    pub t_c: usize,
    /// `None` means `max(1, D / 3)`.
    pub m_try: Option<usize>,
    /// Drawn without replacement.
    pub subsample_fraction: f64,
    pub seed: u64,
    pub max_leaves: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_tree: 100,
            t_c: 20,
            m_try: None,
            subsample_fraction: 0.5,
            seed: 0,
            max_leaves: None,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_tree == 0 {
            return Err(Error::InvalidParameter("n_tree must be >= 1".into()));
        }
        if self.t_c == 0 {
            return Err(Error::InvalidParameter("t_c must be >= 1".into()));
        }
        if self.m_try == Some(0) {
            return Err(Error::InvalidParameter("m_try must be >= 1".into()));
        }
        if !(self.subsample_fraction > 0.0 && self.subsample_fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "subsample_fraction must lie in (0, 1], got {}",
                self.subsample_fraction
            )));
        }
        Ok(())
    }

    pub fn m_try_for(&self, n_features: usize) -> usize {
        self.m_try.unwrap_or_else(|| default_m_try(n_features)).min(n_features.max(1))
    }

    pub fn subsample_size(&self, n: usize) -> usize {
        ((self.subsample_fraction * n as f64).ceil() as usize).clamp(1, n.max(1))
    }

    pub fn tree_seed(&self, b: usize) -> u64 {
        seed::derive(self.seed, b as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<GlsTree>,
    pub params: ForestParams,
    pub working_spec: WorkingCorrelationSpec,
    pub n_features: usize,
}

/// Fits a forest to binary labels at spatial locations.
pub fn fit_forest(data: &SpatialDataset, working_spec: &WorkingCorrelationSpec, params: &ForestParams) -> Result<Forest> {
    fit_forest_raw(data.covariates(), &data.labels_f64(), Some(data.locations()), working_spec, params)
}

/// Fits a forest to arbitrary real responses. `locations` may be `None` only
/// for the identity working precision.
pub fn fit_forest_raw(
    x: &FeatureMatrix,
    y: &[f64],
    locations: Option<&[Location]>,
    working_spec: &WorkingCorrelationSpec,
    params: &ForestParams,
) -> Result<Forest> {
    fit_forest_raw_in(x, y, locations, working_spec, params, Execution::Default)
}

/// [`fit_forest_raw`] with an explicit execution strategy; the result does
/// not depend on it.
pub fn fit_forest_raw_in(
    x: &FeatureMatrix,
    y: &[f64],
    locations: Option<&[Location]>,
    working_spec: &WorkingCorrelationSpec,
    params: &ForestParams,
    exec: Execution,
) -> Result<Forest> {
    params.validate()?;
    working_spec.validate()?;
    let n = y.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    Error::check_len(n, x.n_rows())?;
    if let Some(l) = locations {
        Error::check_len(n, l.len())?;
    } else if !working_spec.is_identity() {
        return Err(Error::InvalidParameter("a spatial working precision needs locations".into()));
    }
    let n_sub = params.subsample_size(n);
    if n_sub < 2 * params.t_c {
        return Err(Error::TooFewSamples {
            needed: 2 * params.t_c,
            available: n_sub,
        });
    }
    let m_try = params.m_try_for(x.n_cols());
    let trees = par::map_range_in(exec, params.n_tree, |b| {
        fit_tree(x, y, locations, working_spec, params, m_try, n_sub, b)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(Forest {
        trees,
        params: *params,
        working_spec: *working_spec,
        n_features: x.n_cols(),
    })
}

#[allow(clippy::too_many_arguments)]
fn fit_tree(
    x: &FeatureMatrix,
    y: &[f64],
    locations: Option<&[Location]>,
    spec: &WorkingCorrelationSpec,
    params: &ForestParams,
    m_try: usize,
    n_sub: usize,
    b: usize,
) -> Result<GlsTree> {
    let tree_seed = params.tree_seed(b);
    let n = y.len();
    let subsample: Vec<usize> = if n_sub == n {
        (0..n).collect()
    } else {
        let mut rng = seed::rng(seed::derive(tree_seed, u64::MAX));
        let mut s = index::sample(&mut rng, n, n_sub).into_vec();
        s.sort_unstable();
        s
    };
    let xs = x.select_rows(&subsample);
    let ys: Vec<f64> = subsample.iter().map(|&i| y[i]).collect();
    let tp = TreeParams {
        t_c: params.t_c,
        m_try,
        max_leaves: params.max_leaves,
        seed: tree_seed,
    };
    let tree = match locations {
        Some(locs) if !spec.is_identity() => {
            let factor = restrict_factor(spec, &subsample, locs)?;
            grow_tree(&xs, &ys, &factor, &tp)?
        }
        _ => grow_tree_with(&xs, &ys, &PrecisionMatrix::identity(n_sub), &tp)?,
    };
    Ok(tree.with_subsample(subsample))
}

impl Forest {
    pub fn n_tree(&self) -> usize {
        self.trees.len()
    }

    /// Raw ensemble average; may fall outside `[0, 1]`.
    pub fn predict_mean(&self, x: &[f64]) -> f64 {
        predict_mean(self, x)
    }

    pub fn predict_mean_batch(&self, xs: &FeatureMatrix) -> Vec<f64> {
        predict_mean_batch(self, xs)
    }
}

pub fn predict_mean(forest: &Forest, x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for t in &forest.trees {
        acc += predict_tree(t, x);
    }
    acc / forest.trees.len() as f64
}

pub fn predict_mean_batch(forest: &Forest, xs: &FeatureMatrix) -> Vec<f64> {
    predict_mean_batch_in(forest, xs, Execution::Default)
}

pub fn predict_mean_batch_in(forest: &Forest, xs: &FeatureMatrix, exec: Execution) -> Vec<f64> {
    par::map_range_in(exec, xs.n_rows(), |i| predict_mean(forest, xs.row(i)))
}
