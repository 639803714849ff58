//! Probit link inversion: recovering the covariate effect `m(x)` from the
//! marginal mean `p(x)`, and choosing the spatial parameters.

mod cv;
mod normal;

pub use cv::{estimate_spatial_params, phi_from_range_fraction, CvCell, CvGrid, CvScoring, CvSettings, CvTable};
pub use normal::{phi_cdf, phi_pdf, phi_quantile};
pub(crate) use normal::ppnd16;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{fit_forest_raw, Forest, ForestParams};
use crate::nngp::{WorkingCorrelationSpec, Zeta};
use crate::seed;
use crate::spatial::FeatureMatrix;
use rand::Rng;

pub const DEFAULT_CLIP_EPSILON: f64 = 1e-6;

/// `Phi(m / sqrt(1 + sigma2))`.
pub fn marginal_link(m: f64, sigma2: f64) -> f64 {
    phi_cdf(m / (1.0 + sigma2).sqrt())
}

/// `sqrt(1 + sigma2) * Phi^-1(p)` with `p` clipped to `[eps, 1 - eps]`.
/// NaN input maps to 0.
/// The upper clip is applied in tail space so the result is odd in `p - 1/2`.
pub fn invert_link(p: f64, sigma2: f64, clip_epsilon: f64) -> f64 {
    let z = if p.is_nan() {
        0.0
    } else if p <= clip_epsilon {
        ppnd16(clip_epsilon)
    } else if p >= 1.0 - clip_epsilon {
        -ppnd16(clip_epsilon)
    } else {
        ppnd16(p)
    };
    (1.0 + sigma2).sqrt() * z
}

/// Largest `|m|` that [`invert_link`] can return.
pub fn effect_bound(sigma2: f64, clip_epsilon: f64) -> f64 {
    -(1.0 + sigma2).sqrt() * ppnd16(clip_epsilon)
}

/// Exponential-covariance spatial parameters plus the working decay used
/// for the forest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialParams {
    pub sigma2: f64,
    pub phi: f64,
    pub zeta: Zeta,
}

impl SpatialParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma2 must be >= 0, got {}", self.sigma2)));
        }
        if !(self.phi > 0.0 && self.phi.is_finite()) {
            return Err(Error::InvalidParameter(format!("phi must be > 0, got {}", self.phi)));
        }
        WorkingCorrelationSpec { zeta: self.zeta, q: 1 }.validate()
    }
}

/// How raw ensemble averages outside `(0, 1)` are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutOfRange {
    #[default]
    Clip,
    ForestInterpolate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EffectSettings {
    pub clip_epsilon: f64,
    pub interpolation: OutOfRange,
    /// Probe points for the interpolating forest.
    pub n_probe: usize,
    pub seed: u64,
}

impl Default for EffectSettings {
    fn default() -> Self {
        Self {
            clip_epsilon: DEFAULT_CLIP_EPSILON,
            interpolation: OutOfRange::Clip,
            n_probe: 1000,
            seed: 0,
        }
    }
}

impl EffectSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "clip_epsilon must lie in (0, 0.5), got {}",
                self.clip_epsilon
            )));
        }
        Ok(())
    }
}

/// Replaces out-of-range ensemble averages with the prediction of an
/// auxiliary classical forest trained on in-range probe values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interpolator {
    pub auxiliary: Forest,
}

impl Interpolator {
    pub fn correct(&self, raw: f64, x: &[f64]) -> f64 {
        if raw > 0.0 && raw < 1.0 {
            raw
        } else {
            self.auxiliary.predict_mean(x)
        }
    }
}

/// `n` points uniform on the box `bounds`.
pub fn uniform_probes(bounds: &[(f64, f64)], n: usize, seed_: u64) -> FeatureMatrix {
    let mut rng = seed::rng(seed_);
    let mut data = Vec::with_capacity(n * bounds.len());
    for _ in 0..n {
        for &(lo, hi) in bounds {
            data.push(lo + (hi - lo) * rng.random::<f64>());
        }
    }
    FeatureMatrix::new(n, bounds.len(), data).expect("shape matches")
}

pub fn interpolate_out_of_range(forest: &Forest, probe_points: &FeatureMatrix, seed_: u64) -> Result<Interpolator> {
    const MIN_IN_RANGE: usize = 10;
    let raw = forest.predict_mean_batch(probe_points);
    let keep: Vec<usize> = (0..raw.len()).filter(|&i| raw[i] > 0.0 && raw[i] < 1.0).collect();
    if keep.len() < MIN_IN_RANGE {
        return Err(Error::InsufficientInRangePoints {
            found: keep.len(),
            needed: MIN_IN_RANGE,
        });
    }
    let x = probe_points.select_rows(&keep);
    let y: Vec<f64> = keep.iter().map(|&i| raw[i]).collect();
    let half = keep.len().div_ceil(2);
    let params = ForestParams {
        n_tree: 50,
        t_c: if half >= 10 { 5 } else { (half / 2).max(1) },
        m_try: None,
        subsample_fraction: 0.5,
        seed: seed_,
        max_leaves: None,
    };
    let auxiliary = fit_forest_raw(&x, &y, None, &WorkingCorrelationSpec::identity(), &params)?;
    Ok(Interpolator { auxiliary })
}

/// `m_hat(x)` from a fitted forest and a marginal variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateEffectEstimator {
    pub forest: Forest,
    pub sigma2: f64,
    pub clip_epsilon: f64,
    pub interpolator: Option<Interpolator>,
}

impl CovariateEffectEstimator {
    /// `bounds` is the covariate box the probes for interpolation are drawn from.
    pub fn new(forest: Forest, sigma2: f64, settings: &EffectSettings, bounds: &[(f64, f64)]) -> Result<Self> {
        settings.validate()?;
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma2 must be >= 0, got {sigma2}")));
        }
        let interpolator = match settings.interpolation {
            OutOfRange::Clip => None,
            OutOfRange::ForestInterpolate => {
                let probes = uniform_probes(bounds, settings.n_probe, settings.seed);
                Some(interpolate_out_of_range(&forest, &probes, seed::derive(settings.seed, 1))?)
            }
        };
        Ok(Self {
            forest,
            sigma2,
            clip_epsilon: settings.clip_epsilon,
            interpolator,
        })
    }

    /// Ensemble mean with out-of-range handling applied (before clipping).
    pub fn corrected_mean(&self, x: &[f64]) -> f64 {
        let raw = self.forest.predict_mean(x);
        match &self.interpolator {
            Some(i) => i.correct(raw, x),
            None => raw,
        }
    }

    pub fn m_hat(&self, x: &[f64]) -> f64 {
        invert_link(self.corrected_mean(x), self.sigma2, self.clip_epsilon)
    }

    pub fn m_hat_batch(&self, xs: &FeatureMatrix) -> Vec<f64> {
        crate::par::map_range(xs.n_rows(), |i| self.m_hat(xs.row(i)))
    }
}

pub fn estimate_covariate_effect(estimator: &CovariateEffectEstimator, x: &[f64]) -> f64 {
    estimator.m_hat(x)
}
