use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{fit_forest, fit_forest_raw, Forest, ForestParams};
use crate::link::{
    estimate_spatial_params, invert_link, marginal_link, CovariateEffectEstimator, CvGrid, CvSettings, EffectSettings,
    SpatialParams,
};
use crate::nngp::WorkingCorrelationSpec;
use crate::prediction::{predict_batch, QmcSettings, SpatialPredictor, DEFAULT_CONDITIONING};
use crate::spatial::{FeatureMatrix, Location, SpatialDataset};
use crate::{par, seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BaselineMethod {
    /// Covariates only.
    #[serde(rename = "RF")]
    Rf,
    /// Coordinates appended as covariates.
    #[serde(rename = "RF-Loc")]
    RfLoc,
    /// Distances to every training site appended as covariates.
    #[serde(rename = "RF-Sp")]
    RfSp,
    #[serde(rename = "RF-GP")]
    RfGp,
}

impl BaselineMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Rf => "RF",
            Self::RfLoc => "RF-Loc",
            Self::RfSp => "RF-Sp",
            Self::RfGp => "RF-GP",
        }
    }

    pub const ALL: [BaselineMethod; 4] = [Self::Rf, Self::RfLoc, Self::RfSp, Self::RfGp];
}

impl std::fmt::Display for BaselineMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MethodSettings {
    pub forest: ForestParams,
    /// Skips cross-validation for RF-GP when set.
    pub fixed_params: Option<SpatialParams>,
    pub cv_grid: CvGrid,
    pub cv: CvSettings,
    pub effect: EffectSettings,
    /// Working-factor neighbors for the final RF-GP forest.
    pub q: usize,
    /// Conditioning-set size for RF-GP prediction.
    pub k: usize,
    pub qmc: QmcSettings,
}

impl Default for MethodSettings {
    fn default() -> Self {
        Self {
            forest: ForestParams::default(),
            fixed_params: None,
            cv_grid: CvGrid::default(),
            cv: CvSettings::default(),
            effect: EffectSettings::default(),
            q: crate::nngp::DEFAULT_NEIGHBORS,
            k: DEFAULT_CONDITIONING,
            qmc: QmcSettings::default(),
        }
    }
}

impl MethodSettings {
    pub fn validate(&self) -> Result<()> {
        self.forest.validate()?;
        self.cv_grid.validate()?;
        self.effect.validate()?;
        self.cv.effect.validate()?;
        self.qmc.validate()?;
        if self.cv.scoring == crate::link::CvScoring::Spatial {
            self.cv.qmc.validate()?;
        }
        if let Some(p) = self.fixed_params {
            p.validate()?;
        }
        if self.q == 0 || self.k == 0 || self.cv.k == 0 {
            return Err(Error::InvalidParameter("q, k and cv.k must be >= 1".into()));
        }
        Ok(())
    }

    /// Every random stream re-keyed from `seed`.
    pub fn reseeded(&self, seed_: u64) -> Self {
        let mut s = self.clone();
        s.forest.seed = seed::derive(seed_, 0);
        s.cv.seed = seed::derive(seed_, 1);
        s.effect.seed = seed::derive(seed_, 2);
        s.qmc.seed = seed::derive(seed_, 3);
        s
    }
}

/// A fitted baseline. Only `Rf` and `RfGp` estimate `p(x)` and `m(x)`.
#[derive(Debug, Clone)]
pub enum FittedMethod {
    Classical {
        method: BaselineMethod,
        forest: Forest,
        anchors: Vec<Location>,
    },
    Gp {
        estimator: Box<CovariateEffectEstimator>,
        params: SpatialParams,
        train: SpatialDataset,
        k: usize,
        qmc: QmcSettings,
    },
}

fn augment(method: BaselineMethod, x: &FeatureMatrix, locs: &[Location], anchors: &[Location]) -> Result<FeatureMatrix> {
    match method {
        BaselineMethod::Rf | BaselineMethod::RfGp => Ok(x.clone()),
        BaselineMethod::RfLoc => {
            let dim = locs.first().map_or(2, |l| l.dim());
            let data = locs.iter().flat_map(|l| l.coords().to_vec()).collect();
            x.hstack(&FeatureMatrix::new(locs.len(), dim, data)?)
        }
        BaselineMethod::RfSp => {
            let data = locs
                .iter()
                .flat_map(|l| anchors.iter().map(move |a| l.distance(a)))
                .collect();
            x.hstack(&FeatureMatrix::new(locs.len(), anchors.len(), data)?)
        }
    }
}

pub fn fit_baseline(method: BaselineMethod, train: &SpatialDataset, settings: &MethodSettings) -> Result<FittedMethod> {
    if method != BaselineMethod::RfGp {
        let anchors = if method == BaselineMethod::RfSp {
            train.locations().to_vec()
        } else {
            Vec::new()
        };
        let x = augment(method, train.covariates(), train.locations(), &anchors)?;
        let forest = fit_forest_raw(
            &x,
            &train.labels_f64(),
            None,
            &WorkingCorrelationSpec::identity(),
            &settings.forest,
        )?;
        return Ok(FittedMethod::Classical { method, forest, anchors });
    }
    let params = match settings.fixed_params {
        Some(p) => {
            p.validate()?;
            p
        }
        None => estimate_spatial_params(train, &settings.cv_grid, &settings.forest, &settings.cv)?.0,
    };
    let spec = WorkingCorrelationSpec {
        zeta: params.zeta,
        q: settings.q,
    };
    let forest = fit_forest(train, &spec, &settings.forest)?;
    let estimator = CovariateEffectEstimator::new(
        forest,
        params.sigma2,
        &settings.effect,
        &train.covariates().column_bounds(),
    )?;
    Ok(FittedMethod::Gp {
        estimator: Box::new(estimator),
        params,
        train: train.clone(),
        k: settings.k,
        qmc: settings.qmc,
    })
}

impl FittedMethod {
    pub fn method(&self) -> BaselineMethod {
        match self {
            Self::Classical { method, .. } => *method,
            Self::Gp { .. } => BaselineMethod::RfGp,
        }
    }

    /// Width of the design the forest was trained on.
    pub fn input_width(&self) -> usize {
        match self {
            Self::Classical { forest, .. } => forest.n_features,
            Self::Gp { estimator, .. } => estimator.forest.n_features,
        }
    }

    pub fn spatial_params(&self) -> Option<SpatialParams> {
        match self {
            Self::Gp { params, .. } => Some(*params),
            Self::Classical { .. } => None,
        }
    }

    /// Estimated marginal mean `p(x)`; `None` for location-based baselines.
    pub fn estimate_p(&self, xs: &FeatureMatrix) -> Option<Vec<f64>> {
        match self {
            Self::Classical {
                method: BaselineMethod::Rf,
                forest,
                ..
            } => Some(forest.predict_mean_batch(xs)),
            Self::Gp { estimator, .. } => Some(par::map_range(xs.n_rows(), |i| {
                marginal_link(estimator.m_hat(xs.row(i)), estimator.sigma2)
            })),
            Self::Classical { .. } => None,
        }
    }

    /// Estimated covariate effect `m(x)`; plain RF inverts with `sigma2 = 0`.
    pub fn estimate_m(&self, xs: &FeatureMatrix, clip_epsilon: f64) -> Option<Vec<f64>> {
        match self {
            Self::Classical {
                method: BaselineMethod::Rf,
                forest,
                ..
            } => Some(
                forest
                    .predict_mean_batch(xs)
                    .into_iter()
                    .map(|p| invert_link(p, 0.0, clip_epsilon))
                    .collect(),
            ),
            Self::Gp { estimator, .. } => Some(estimator.m_hat_batch(xs)),
            Self::Classical { .. } => None,
        }
    }

    /// `P(Y = 1)` at each row of `test`.
    pub fn predict(&self, xs: &FeatureMatrix, locs: &[Location]) -> Result<Vec<f64>> {
        Error::check_len(xs.n_rows(), locs.len())?;
        match self {
            Self::Classical { method, forest, anchors } => {
                let x = augment(*method, xs, locs, anchors)?;
                Ok(forest.predict_mean_batch(&x).into_iter().map(|p| p.clamp(0.0, 1.0)).collect())
            }
            Self::Gp {
                estimator,
                params,
                train,
                k,
                qmc,
            } => {
                let pred = SpatialPredictor::new(train, estimator, *params, *k)?;
                Ok(predict_batch(&pred, xs, locs, qmc)?.into_iter().map(|e| e.estimate).collect())
            }
        }
    }
}
