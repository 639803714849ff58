//! End-to-end fitted model: forest, link parameters and the training data
//! needed for spatial prediction, stored as one JSON document.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::forest::{fit_forest, Forest};
use crate::link::{estimate_spatial_params, CovariateEffectEstimator, CvTable, EffectSettings, SpatialParams};
use crate::nngp::{WorkingCorrelationSpec, Zeta};
use crate::prediction::{predict_batch, Estimate, QmcSettings, SpatialPredictor};
use crate::simulate::MethodSettings;
use crate::spatial::{FeatureMatrix, Location, SpatialDataset};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theta {
    pub sigma2: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RfgpModel {
    pub theta: Theta,
    pub zeta: Zeta,
    pub q: usize,
    pub k: usize,
    pub qmc: QmcSettings,
    pub effect: EffectSettings,
    pub seed: u64,
    /// File name of the cross-validation table, relative to the model file.
    pub cv_table: Option<String>,
    /// SHA-256 of the forest's JSON.
    pub forest_digest: String,
    pub estimator: CovariateEffectEstimator,
    pub training: SpatialDataset,
}

pub fn forest_digest(forest: &Forest) -> Result<String> {
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(forest)?)))
}

/// Selects `theta` and `zeta` by cross-validation unless
/// `settings.fixed_params` is set, then fits the final forest on all data.
/// Every random stream is derived from `seed`.
pub fn fit_model(data: &SpatialDataset, settings: &MethodSettings, seed: u64) -> Result<(RfgpModel, Option<CvTable>)> {
    let s = settings.reseeded(seed);
    let (params, table) = match s.fixed_params {
        Some(p) => {
            p.validate()?;
            (p, None)
        }
        None => {
            let (p, t) = estimate_spatial_params(data, &s.cv_grid, &s.forest, &s.cv)?;
            (p, Some(t))
        }
    };
    log::info!("spatial parameters: sigma2={} phi={} zeta={}", params.sigma2, params.phi, params.zeta);
    let spec = WorkingCorrelationSpec {
        zeta: params.zeta,
        q: s.q,
    };
    let forest = fit_forest(data, &spec, &s.forest)?;
    let estimator = CovariateEffectEstimator::new(forest, params.sigma2, &s.effect, &data.covariates().column_bounds())?;
    let model = RfgpModel {
        theta: Theta {
            sigma2: params.sigma2,
            phi: params.phi,
        },
        zeta: params.zeta,
        q: s.q,
        k: s.k,
        qmc: s.qmc,
        effect: s.effect,
        seed,
        cv_table: None,
        forest_digest: forest_digest(&estimator.forest)?,
        estimator,
        training: data.clone(),
    };
    Ok((model, table))
}

impl RfgpModel {
    pub fn spatial_params(&self) -> SpatialParams {
        SpatialParams {
            sigma2: self.theta.sigma2,
            phi: self.theta.phi,
            zeta: self.zeta,
        }
    }

    pub fn m_hat(&self, xs: &FeatureMatrix) -> Result<Vec<f64>> {
        self.check_width(xs)?;
        Ok(self.estimator.m_hat_batch(xs))
    }

    pub fn predict(&self, xs: &FeatureMatrix, locs: &[Location]) -> Result<Vec<Estimate>> {
        self.check_width(xs)?;
        if xs.n_rows() == 0 {
            return Ok(Vec::new());
        }
        let pred = SpatialPredictor::new(&self.training, &self.estimator, self.spatial_params(), self.k)?;
        predict_batch(&pred, xs, locs, &self.qmc)
    }

    fn check_width(&self, xs: &FeatureMatrix) -> Result<()> {
        if xs.n_rows() > 0 && xs.n_cols() != self.estimator.forest.n_features {
            return Err(Error::LengthMismatch {
                expected: self.estimator.forest.n_features,
                actual: xs.n_cols(),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Parses and checks the forest digest.
    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        let d = forest_digest(&m.estimator.forest)?;
        if d != m.forest_digest {
            return Err(Error::InvalidParameter(format!(
                "forest digest mismatch: file says {}, contents hash to {d}",
                m.forest_digest
            )));
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
