//! Spatial prediction of `P(Y_new = 1 | data)` as a ratio of multivariate
//! normal probabilities over a nearest-neighbor conditioning set.

mod mvn;

pub use mvn::{mvn_cdf, mvn_cdf_ratio, Estimate, MvnCdfProblem, QmcSettings, MAX_DIMENSION, MIN_SAMPLES};

use nalgebra::DMatrix;

use crate::covariance::{correlation, CovarianceFamily};
use crate::error::{Error, Result};
use crate::link::{phi_cdf, CovariateEffectEstimator, SpatialParams};
use crate::spatial::{FeatureMatrix, Location, SpatialDataset};
use crate::{par, seed};

pub const DEFAULT_CONDITIONING: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionContext {
    /// Training indices, nearest first.
    pub neighbors: Vec<usize>,
    pub locations: Vec<Location>,
    pub m_vec: Vec<f64>,
    /// `2 Y_i - 1`.
    pub d: Vec<f64>,
    pub c: DMatrix<f64>,
}

impl PredictionContext {
    pub fn k(&self) -> usize {
        self.neighbors.len()
    }
}

/// The `k` training locations closest to `s`, ties by index.
pub fn nearest_neighbors(locs: &[Location], s: &Location, k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = locs.iter().enumerate().map(|(i, l)| (l.distance(s), i)).collect();
    let k = k.min(d.len());
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < d.len() {
        d.select_nth_unstable_by(k, cmp);
        d.truncate(k);
    }
    d.sort_by(cmp);
    d.into_iter().map(|(_, i)| i).collect()
}

fn cov(params: &SpatialParams, a: &Location, b: &Location) -> f64 {
    params.sigma2 * correlation(CovarianceFamily::Exponential, params.phi, 0.5, a.distance(b))
}

/// Conditioning set of size `min(k, n)` around `s_new`.
pub fn build_context(
    locations: &[Location],
    labels: &[u8],
    m_train: &[f64],
    params: &SpatialParams,
    s_new: &Location,
    k: usize,
) -> Result<PredictionContext> {
    if k == 0 {
        return Err(Error::InvalidParameter("conditioning set size must be >= 1".into()));
    }
    if k >= MAX_DIMENSION {
        return Err(Error::DimensionCap {
            dim: k + 1,
            cap: MAX_DIMENSION,
        });
    }
    Error::check_len(locations.len(), labels.len())?;
    Error::check_len(locations.len(), m_train.len())?;
    if locations.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let neighbors = nearest_neighbors(locations, s_new, k);
    let locs: Vec<Location> = neighbors.iter().map(|&i| locations[i]).collect();
    let kk = neighbors.len();
    let c = DMatrix::from_fn(kk, kk, |i, j| cov(params, &locs[i], &locs[j]));
    Ok(PredictionContext {
        m_vec: neighbors.iter().map(|&i| m_train[i]).collect(),
        d: neighbors.iter().map(|&i| 2.0 * f64::from(labels[i]) - 1.0).collect(),
        neighbors,
        locations: locs,
        c,
    })
}

/// `P(Y_new = event | conditioning set)` for `event` in `{0, 1}`.
pub fn predict_event(
    ctx: &PredictionContext,
    m_new: f64,
    s_new: &Location,
    params: &SpatialParams,
    qmc: &QmcSettings,
    event: u8,
) -> Result<Estimate> {
    let k = ctx.k();
    let d_new = if event == 1 { 1.0 } else { -1.0 };
    let mut mean = Vec::with_capacity(k + 1);
    mean.extend(ctx.m_vec.iter().zip(&ctx.d).map(|(m, d)| m * d));
    mean.push(d_new * m_new);
    let mut v = DMatrix::zeros(k + 1, k + 1);
    for i in 0..k {
        for j in 0..k {
            v[(i, j)] = ctx.d[i] * ctx.d[j] * ctx.c[(i, j)];
        }
        let cn = ctx.d[i] * d_new * cov(params, &ctx.locations[i], s_new);
        v[(i, k)] = cn;
        v[(k, i)] = cn;
        v[(i, i)] += 1.0;
    }
    v[(k, k)] = 1.0 + params.sigma2;
    mvn_cdf_ratio(&MvnCdfProblem { mean, covariance: v }, qmc)
}

pub fn predict_probability(
    ctx: &PredictionContext,
    m_new: f64,
    s_new: &Location,
    params: &SpatialParams,
    qmc: &QmcSettings,
) -> Result<Estimate> {
    if params.sigma2 == 0.0 {
        return Ok(Estimate {
            estimate: phi_cdf(m_new),
            std_error: 0.0,
        });
    }
    predict_event(ctx, m_new, s_new, params, qmc, 1)
}

/// Fitted model bound to its training data.
pub struct SpatialPredictor<'a> {
    data: &'a SpatialDataset,
    estimator: &'a CovariateEffectEstimator,
    params: SpatialParams,
    m_train: Vec<f64>,
    k: usize,
}

impl<'a> SpatialPredictor<'a> {
    pub fn new(data: &'a SpatialDataset, estimator: &'a CovariateEffectEstimator, params: SpatialParams, k: usize) -> Result<Self> {
        params.validate()?;
        if k == 0 {
            return Err(Error::InvalidParameter("conditioning set size must be >= 1".into()));
        }
        Ok(Self {
            m_train: estimator.m_hat_batch(data.covariates()),
            data,
            estimator,
            params,
            k,
        })
    }

    pub fn m_train(&self) -> &[f64] {
        &self.m_train
    }

    pub fn build_context(&self, s_new: &Location) -> Result<PredictionContext> {
        build_context(self.data.locations(), self.data.labels(), &self.m_train, &self.params, s_new, self.k)
    }

    pub fn predict(&self, x_new: &[f64], s_new: &Location, qmc: &QmcSettings) -> Result<Estimate> {
        let m_new = self.estimator.m_hat(x_new);
        let ctx = self.build_context(s_new)?;
        predict_probability(&ctx, m_new, s_new, &self.params, qmc)
    }
}

/// Point `i` uses QMC seed `derive(qmc.seed, i)`.
pub fn predict_batch(
    predictor: &SpatialPredictor<'_>,
    xs: &FeatureMatrix,
    ss: &[Location],
    qmc: &QmcSettings,
) -> Result<Vec<Estimate>> {
    Error::check_len(xs.n_rows(), ss.len())?;
    qmc.validate()?;
    par::map_range(ss.len(), |i| {
        predictor.predict(xs.row(i), &ss[i], &qmc.with_seed(seed::derive(qmc.seed, i as u64)))
    })
    .into_iter()
    .collect()
}
