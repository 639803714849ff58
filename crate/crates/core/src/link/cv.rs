//! Two-fold cross-validation over `(zeta, sigma2, f)` with `phi = 3 / (sqrt(2) f)`.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{invert_link, CovariateEffectEstimator, EffectSettings, SpatialParams};
use crate::error::{Error, Result};
use crate::forest::{fit_forest, ForestParams};
use crate::nngp::{WorkingCorrelationSpec, Zeta, DEFAULT_NEIGHBORS};
use crate::prediction::{build_context, predict_probability, QmcSettings};
use crate::spatial::SpatialDataset;
use crate::{par, seed};

/// `phi` for effective-range fraction `f`.
pub fn phi_from_range_fraction(f: f64) -> f64 {
    3.0 / (std::f64::consts::SQRT_2 * f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvGrid {
    pub zeta: Vec<Zeta>,
    pub sigma2: Vec<f64>,
    /// Effective-range fractions.
    pub f: Vec<f64>,
    /// Neighbors in the working factor.
    pub q: usize,
}

impl Default for CvGrid {
    fn default() -> Self {
        let mut sigma2 = vec![1.0];
        sigma2.extend((1..=10).map(|i| 2.5 * i as f64));
        Self {
            zeta: vec![
                Zeta::Finite(1.0),
                Zeta::Finite(4.0),
                Zeta::Finite(7.0),
                Zeta::Finite(10.0),
                Zeta::Infinite,
            ],
            sigma2,
            f: vec![0.05, 0.25, 0.5, 0.75, 0.95],
            q: DEFAULT_NEIGHBORS,
        }
    }
}

impl CvGrid {
    pub fn n_cells(&self) -> usize {
        self.zeta.len() * self.sigma2.len() * self.f.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_cells() == 0 {
            return Err(Error::InvalidParameter("cv grid has an empty axis".into()));
        }
        for &z in &self.zeta {
            WorkingCorrelationSpec { zeta: z, q: self.q }.validate()?;
        }
        if let Some(s) = self.sigma2.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
            return Err(Error::InvalidParameter(format!("grid sigma2 must be >= 0, got {s}")));
        }
        if let Some(f) = self.f.iter().find(|f| !(**f > 0.0 && f.is_finite())) {
            return Err(Error::InvalidParameter(format!("grid f must be > 0, got {f}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvScoring {
    /// Score the full spatial prediction of each held-out label.
    #[default]
    Spatial,
    /// Score `Phi(m_hat / sqrt(1 + sigma2))`, which ignores `(sigma2, phi)`.
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvSettings {
    pub scoring: CvScoring,
    /// Conditioning-set size for held-out predictions.
    pub k: usize,
    pub qmc: QmcSettings,
    /// Scores at most this many held-out points per fold.
    pub max_eval_points: Option<usize>,
    pub effect: EffectSettings,
    pub seed: u64,
}

impl Default for CvSettings {
    fn default() -> Self {
        Self {
            scoring: CvScoring::Spatial,
            k: 10,
            qmc: QmcSettings {
                shifts: 4,
                points: 512,
                seed: 0,
            },
            max_eval_points: None,
            effect: EffectSettings::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub zeta: Zeta,
    pub sigma2: f64,
    pub f: f64,
    pub phi: f64,
    pub fold1_err: f64,
    pub fold2_err: f64,
    pub mean_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvTable {
    pub cells: Vec<CvCell>,
    pub selected: usize,
}

impl CvTable {
    pub fn selected_cell(&self) -> &CvCell {
        &self.cells[self.selected]
    }

    pub fn write_csv_to<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["zeta", "sigma2", "phi", "fold1_err", "fold2_err", "mean_err"])?;
        for c in &self.cells {
            wr.write_record([
                c.zeta.to_string(),
                c.sigma2.to_string(),
                c.phi.to_string(),
                c.fold1_err.to_string(),
                c.fold2_err.to_string(),
                c.mean_err.to_string(),
            ])?;
        }
        wr.flush().map_err(|e| Error::io("<cv table>", e))?;
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(std::io::BufWriter::new(file))
    }
}

/// `a` preferred over `b`: lower error, then smaller `sigma2`, larger `f`,
/// larger `zeta`.
fn preferred(a: &CvCell, b: &CvCell) -> bool {
    const EPS: f64 = 1e-12;
    if (a.mean_err - b.mean_err).abs() > EPS {
        return a.mean_err < b.mean_err;
    }
    if a.sigma2 != b.sigma2 {
        return a.sigma2 < b.sigma2;
    }
    if a.f != b.f {
        return a.f > b.f;
    }
    a.zeta.value() > b.zeta.value()
}

/// Label-stratified random halves, each in random order so that any prefix
/// is a uniform subsample.
fn folds(labels: &[u8], seed_: u64) -> [Vec<usize>; 2] {
    let mut rng = seed::rng(seed_);
    let mut order: Vec<usize> = Vec::with_capacity(labels.len());
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        order.extend(idx);
    }
    let mut out = [Vec::new(), Vec::new()];
    for (j, i) in order.into_iter().enumerate() {
        out[j % 2].push(i);
    }
    for half in out.iter_mut() {
        half.shuffle(&mut rng);
    }
    out
}

pub fn estimate_spatial_params(
    data: &SpatialDataset,
    grid: &CvGrid,
    params: &ForestParams,
    settings: &CvSettings,
) -> Result<(SpatialParams, CvTable)> {
    grid.validate()?;
    params.validate()?;
    settings.effect.validate()?;
    if settings.scoring == CvScoring::Spatial {
        settings.qmc.validate()?;
    }
    if data.len() < 4 * params.t_c {
        return Err(Error::TooFewSamples {
            needed: 4 * params.t_c,
            available: data.len(),
        });
    }
    let halves = folds(data.labels(), seed::derive(settings.seed, 0));
    let n_sf = grid.sigma2.len() * grid.f.len();
    // errs[z][fold][cell]
    let mut errs = vec![[vec![0.0; n_sf], vec![0.0; n_sf]]; grid.zeta.len()];
    for (zi, &zeta) in grid.zeta.iter().enumerate() {
        for fold in 0..2 {
            let train = data.subset(&halves[fold])?;
            let mut test_idx = halves[1 - fold].clone();
            if let Some(cap) = settings.max_eval_points {
                test_idx.truncate(cap.max(1));
            }
            let test = data.subset(&test_idx)?;
            let job = seed::derive(settings.seed, 1 + (zi * 2 + fold) as u64);
            errs[zi][fold] = score_fold(&train, &test, zeta, grid, params, settings, job)?;
            log::debug!("cv zeta={zeta} fold={fold} done");
        }
    }
    let mut cells = Vec::with_capacity(grid.n_cells());
    for (zi, &zeta) in grid.zeta.iter().enumerate() {
        for (si, &sigma2) in grid.sigma2.iter().enumerate() {
            for (fi, &f) in grid.f.iter().enumerate() {
                let c = si * grid.f.len() + fi;
                let (e1, e2) = (errs[zi][0][c], errs[zi][1][c]);
                cells.push(CvCell {
                    zeta,
                    sigma2,
                    f,
                    phi: phi_from_range_fraction(f),
                    fold1_err: e1,
                    fold2_err: e2,
                    mean_err: 0.5 * (e1 + e2),
                });
            }
        }
    }
    let mut selected = 0;
    for i in 1..cells.len() {
        if preferred(&cells[i], &cells[selected]) {
            selected = i;
        }
    }
    let best = cells[selected];
    Ok((
        SpatialParams {
            sigma2: best.sigma2,
            phi: best.phi,
            zeta: best.zeta,
        },
        CvTable { cells, selected },
    ))
}

/// Misclassification on `test` for every `(sigma2, f)` pair, forest fitted on `train`.
fn score_fold(
    train: &SpatialDataset,
    test: &SpatialDataset,
    zeta: Zeta,
    grid: &CvGrid,
    params: &ForestParams,
    settings: &CvSettings,
    job_seed: u64,
) -> Result<Vec<f64>> {
    let spec = WorkingCorrelationSpec { zeta, q: grid.q };
    let forest_params = ForestParams {
        seed: seed::derive(job_seed, 0),
        ..*params
    };
    let forest = fit_forest(train, &spec, &forest_params)?;
    let effect = EffectSettings {
        seed: seed::derive(job_seed, 1),
        ..settings.effect
    };
    let est = CovariateEffectEstimator::new(forest, 0.0, &effect, &train.covariates().column_bounds())?;
    let p_train: Vec<f64> = par::map_range(train.len(), |i| est.corrected_mean(train.covariates().row(i)));
    let p_test: Vec<f64> = par::map_range(test.len(), |i| est.corrected_mean(test.covariates().row(i)));
    let eps = settings.effect.clip_epsilon;
    let n_test = test.len() as f64;
    let cells: Vec<(f64, f64)> = grid
        .sigma2
        .iter()
        .flat_map(|&s| grid.f.iter().map(move |&f| (s, f)))
        .collect();
    par::map_range(cells.len(), |c| -> Result<f64> {
        let (sigma2, f) = cells[c];
        let sp = SpatialParams {
            sigma2,
            phi: phi_from_range_fraction(f),
            zeta,
        };
        let m_train: Vec<f64> = p_train.iter().map(|&p| invert_link(p, sigma2, eps)).collect();
        let mut wrong = 0usize;
        for j in 0..test.len() {
            let m_new = invert_link(p_test[j], sigma2, eps);
            let p = match settings.scoring {
                CvScoring::Marginal => super::marginal_link(m_new, sigma2),
                CvScoring::Spatial => {
                    let s_new = &test.locations()[j];
                    let ctx = build_context(train.locations(), train.labels(), &m_train, &sp, s_new, settings.k)?;
                    // common random numbers across cells
                    let qmc = settings.qmc.with_seed(seed::derive(job_seed, 2 + j as u64));
                    predict_probability(&ctx, m_new, s_new, &sp, &qmc)?.estimate
                }
            };
            if u8::from(p >= 0.5) != test.labels()[j] {
                wrong += 1;
            }
        }
        Ok(wrong as f64 / n_test)
    })
    .into_iter()
    .collect()
}
