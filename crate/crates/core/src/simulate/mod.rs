//! Simulation design: probit spatial GLMM data with a Friedman covariate
//! effect and an exponential GP random effect, plus baselines and the
//! benchmark harness.

mod baselines;
mod benchmark;
mod meuse;

pub use baselines::{fit_baseline, BaselineMethod, FittedMethod, MethodSettings};
pub use benchmark::{
    median, run_benchmark, BenchmarkConfig, BenchmarkResults, Failure, ResultRow, SummaryRow, METRIC_MISCLASSIFICATION,
    METRIC_MISE_M, METRIC_MISE_P, METRIC_RELATIVE_MSE,
};
pub use meuse::{load_meuse, median_error, run_meuse, MeuseColumns, MeuseConfig, SplitError};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::covariance::{sample_gp, CovarianceSpec};
use crate::error::{Error, Result};
use crate::link::{marginal_link, phi_cdf, phi_from_range_fraction};
use crate::spatial::{FeatureMatrix, Location, SpatialDataset};
use crate::seed;

pub const FRIEDMAN_DIM: usize = 5;

/// `(10 sin(pi x1 x2) + 20 (x3 - 0.5)^2 + 10 x4 + 5 x5 - 14.4) / 5` on `[0, 1]^5`.
pub fn friedman_m(x: &[f64]) -> Result<f64> {
    Error::check_len(FRIEDMAN_DIM, x.len())?;
    if let Some(&v) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::OutOfDomain(v));
    }
    Ok(friedman_unchecked(x))
}

fn friedman_unchecked(x: &[f64]) -> f64 {
    (10.0 * (std::f64::consts::PI * x[0] * x[1]).sin() + 20.0 * (x[2] - 0.5).powi(2) + 10.0 * x[3] + 5.0 * x[4] - 14.4)
        / 5.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub n: usize,
    pub sigma2: f64,
    /// Effective-range fraction; `phi = 3 / (sqrt(2) f)`.
    pub f: f64,
    pub seed: u64,
    pub test_fraction: f64,
    pub replicates: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            sigma2: 1.0,
            f: 0.5,
            seed: 0,
            test_fraction: 0.2,
            replicates: 20,
        }
    }
}

impl SimulationConfig {
    pub fn phi(&self) -> f64 {
        phi_from_range_fraction(self.f)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 50 {
            return Err(Error::InvalidParameter(format!("n must be >= 50, got {}", self.n)));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "test_fraction must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma2 must be >= 0, got {}", self.sigma2)));
        }
        if !(self.f > 0.0 && self.f.is_finite()) {
            return Err(Error::InvalidParameter(format!("f must be > 0, got {}", self.f)));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidParameter("replicates must be >= 1".into()));
        }
        Ok(())
    }

    pub fn replicate_seed(&self, replicate: usize) -> u64 {
        seed::derive(self.seed, replicate as u64)
    }
}

/// Generating quantities, kept apart from the datasets handed to methods.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Truth {
    pub m: Vec<f64>,
    pub w: Vec<f64>,
    /// `Phi(m + w)`.
    pub p: Vec<f64>,
    /// `Phi(m / sqrt(1 + sigma2))`.
    pub marginal_p: Vec<f64>,
}

impl Truth {
    fn select(&self, idx: &[usize]) -> Self {
        let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect();
        Self {
            m: pick(&self.m),
            w: pick(&self.w),
            p: pick(&self.p),
            marginal_p: pick(&self.marginal_p),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedData {
    pub train: SpatialDataset,
    pub test: SpatialDataset,
    pub truth_train: Truth,
    pub truth_test: Truth,
}

/// Replicate `replicate` of `config`.
pub fn generate_dataset(config: &SimulationConfig, replicate: usize) -> Result<SimulatedData> {
    config.validate()?;
    let rs = config.replicate_seed(replicate);
    let n = config.n;
    let mut rng = seed::rng(seed::derive(rs, 0));
    let locs: Vec<Location> = (0..n).map(|_| Location::xy(rng.random(), rng.random())).collect();
    let x: Vec<f64> = (0..n * FRIEDMAN_DIM).map(|_| rng.random()).collect();
    let w = if config.sigma2 > 0.0 {
        sample_gp(&CovarianceSpec::exponential(config.sigma2, config.phi())?, &locs, seed::derive(rs, 1))?
    } else {
        vec![0.0; n]
    };
    let m: Vec<f64> = x.chunks(FRIEDMAN_DIM).map(friedman_unchecked).collect();
    let p: Vec<f64> = m.iter().zip(&w).map(|(a, b)| phi_cdf(a + b)).collect();
    let marginal_p = m.iter().map(|&v| marginal_link(v, config.sigma2)).collect();
    let mut yrng = seed::rng(seed::derive(rs, 2));
    let y: Vec<u8> = p.iter().map(|&pi| u8::from(yrng.random::<f64>() < pi)).collect();
    let truth = Truth { m, w, p, marginal_p };
    let all = SpatialDataset::new(locs, FeatureMatrix::new(n, FRIEDMAN_DIM, x)?, y)?;

    let n_test = ((config.test_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seed::rng(seed::derive(rs, 3)));
    let (test_idx, train_idx) = perm.split_at(n_test);
    let mut test_idx = test_idx.to_vec();
    let mut train_idx = train_idx.to_vec();
    test_idx.sort_unstable();
    train_idx.sort_unstable();
    Ok(SimulatedData {
        train: all.subset(&train_idx)?,
        test: all.subset(&test_idx)?,
        truth_train: truth.select(&train_idx),
        truth_test: truth.select(&test_idx),
    })
}

/// Writes `split,m,w,p,marginal_p` rows, train first.
pub fn write_truth(path: impl AsRef<std::path::Path>, data: &SimulatedData) -> Result<()> {
    let path = path.as_ref();
    let mut wr = csv::Writer::from_path(path)?;
    wr.write_record(["split", "m", "w", "p", "marginal_p"])?;
    for (name, t) in [("train", &data.truth_train), ("test", &data.truth_test)] {
        for i in 0..t.m.len() {
            wr.write_record([
                name.to_string(),
                t.m[i].to_string(),
                t.w[i].to_string(),
                t.p[i].to_string(),
                t.marginal_p[i].to_string(),
            ])?;
        }
    }
    wr.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn friedman_examples() {
        let v = friedman_m(&[0.5; 5]).unwrap();
        assert!((v - (10.0 * (std::f64::consts::PI / 4.0).sin() + 5.0 + 2.5 - 14.4) / 5.0).abs() < 1e-15);
        assert!((v - 0.034_213_562_373_095).abs() < 1e-12);
        assert!((friedman_m(&[0.0, 0.0, 0.5, 0.0, 0.0]).unwrap() + 2.88).abs() < 1e-15);
        assert!((friedman_m(&[1.0, 0.5, 0.5, 1.0, 1.0]).unwrap() - 2.12).abs() < 1e-14);
        assert!(matches!(friedman_m(&[1.2, 0.0, 0.0, 0.0, 0.0]), Err(Error::OutOfDomain(_))));
    }

    #[test]
    fn zero_variance_has_no_random_effect() {
        let c = SimulationConfig { n: 100, sigma2: 0.0, ..Default::default() };
        let d = generate_dataset(&c, 0).unwrap();
        assert!(d.truth_train.w.iter().all(|&w| w == 0.0));
        for (p, m) in d.truth_train.p.iter().zip(&d.truth_train.m) {
            assert_eq!(*p, phi_cdf(*m));
        }
        assert_eq!((d.train.len(), d.test.len()), (80, 20));
    }

    #[test]
    fn reproducible_and_consistent() {
        let c = SimulationConfig { n: 120, sigma2: 3.0, f: 0.75, seed: 4, ..Default::default() };
        let a = generate_dataset(&c, 2).unwrap();
        let b = generate_dataset(&c, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_dataset(&c, 3).unwrap());
        for (mp, m) in a.truth_test.marginal_p.iter().zip(&a.truth_test.m) {
            assert!((mp - marginal_link(*m, 3.0)).abs() < 1e-12);
        }
        assert!(a.truth_test.p.iter().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn config_validation() {
        assert!(SimulationConfig { n: 49, ..Default::default() }.validate().is_err());
        assert!(SimulationConfig { test_fraction: 1.0, ..Default::default() }.validate().is_err());
    }
}
