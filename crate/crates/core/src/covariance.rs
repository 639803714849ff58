//! Stationary isotropic kernels, dense covariance assembly and exact GP
//! sampling.
//!
//! Two decay conventions are kept apart on purpose:
//!
//! * `Exponential`: `sigma2 * exp(-phi * d)`
//! * `MaternHalfInteger`: the Matern form with argument `x = sqrt(2) * phi * d`,
//!   evaluated in closed form for `nu` in {0.5, 1.5, 2.5}.

use nalgebra::{Cholesky, DMatrix, Dyn};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::spatial::{check_distinct, Location};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CovarianceFamily {
    #[serde(rename = "exponential")]
    Exponential,
    #[serde(rename = "matern")]
    MaternHalfInteger,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct CovarianceSpec {
    pub family: CovarianceFamily,
    pub sigma2: f64,
    pub phi: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    family: CovarianceFamily,
    sigma2: f64,
    phi: f64,
    #[serde(default)]
    nu: Option<f64>,
}

impl TryFrom<RawSpec> for CovarianceSpec {
    type Error = Error;
    fn try_from(r: RawSpec) -> Result<Self> {
        let spec = CovarianceSpec {
            family: r.family,
            sigma2: r.sigma2,
            phi: r.phi,
            nu: r.nu,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl CovarianceSpec {
    pub fn exponential(sigma2: f64, phi: f64) -> Result<Self> {
        let s = Self {
            family: CovarianceFamily::Exponential,
            sigma2,
            phi,
            nu: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn matern(sigma2: f64, phi: f64, nu: f64) -> Result<Self> {
        let s = Self {
            family: CovarianceFamily::MaternHalfInteger,
            sigma2,
            phi,
            nu: Some(nu),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma2 must be > 0, got {}", self.sigma2)));
        }
        if !(self.phi > 0.0 && self.phi.is_finite()) {
            return Err(Error::InvalidParameter(format!("phi must be > 0, got {}", self.phi)));
        }
        if self.family == CovarianceFamily::MaternHalfInteger {
            match self.nu {
                Some(nu) if nu == 0.5 || nu == 1.5 || nu == 2.5 => {}
                Some(nu) => return Err(Error::InvalidSmoothness(nu)),
                None => return Err(Error::InvalidSmoothness(f64::NAN)),
            }
        }
        Ok(())
    }

    /// Unit-variance correlation at distance `d`.
    pub fn correlation(&self, d: f64) -> f64 {
        correlation(self.family, self.phi, self.nu.unwrap_or(0.5), d)
    }

    /// `C(d)`.
    pub fn kernel(&self, d: f64) -> f64 {
        self.sigma2 * self.correlation(d)
    }
}

pub(crate) fn correlation(family: CovarianceFamily, phi: f64, nu: f64, d: f64) -> f64 {
    match family {
        CovarianceFamily::Exponential => (-phi * d).exp(),
        CovarianceFamily::MaternHalfInteger => {
            let x = std::f64::consts::SQRT_2 * phi * d;
            let poly = if nu == 0.5 {
                1.0
            } else if nu == 1.5 {
                1.0 + x
            } else {
                1.0 + x + x * x / 3.0
            };
            poly * (-x).exp()
        }
    }
}

/// Checked kernel evaluation.
pub fn kernel(spec: &CovarianceSpec, d: f64) -> Result<f64> {
    spec.validate()?;
    if !(d >= 0.0 && d.is_finite()) {
        return Err(Error::OutOfDomain(d));
    }
    Ok(spec.kernel(d))
}

/// Symmetric positive-definite covariance matrix of a set of sites.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseCovariance {
    pub matrix: DMatrix<f64>,
}

impl DenseCovariance {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    /// Lower Cholesky factor; on failure retries once with `1e-10 * sigma2`
    /// added to the diagonal.
    pub fn cholesky(&self, sigma2: f64) -> Result<Cholesky<f64, Dyn>> {
        cholesky_with_jitter(self.matrix.clone(), 1e-10 * sigma2)
    }
}

pub(crate) fn cholesky_with_jitter(m: DMatrix<f64>, jitter: f64) -> Result<Cholesky<f64, Dyn>> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok(c);
    }
    let n = m.nrows();
    let mut m = m;
    for i in 0..n {
        m[(i, i)] += jitter;
    }
    Cholesky::new(m).ok_or_else(|| Error::CholeskyFailure(format!("{n}x{n} matrix not positive definite")))
}

/// Builds `C_ij = kernel(|s_i - s_j|)`.
pub fn covariance_matrix(spec: &CovarianceSpec, locs: &[Location]) -> Result<DenseCovariance> {
    spec.validate()?;
    if locs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_distinct(locs)?;
    let n = locs.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = spec.sigma2;
        for j in 0..i {
            let v = spec.kernel(locs[i].distance(&locs[j]));
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(DenseCovariance { matrix: m })
}

/// Draws `w ~ N(0, C)` as `L z` with `z` generated from `seed`.
pub fn sample_gp(spec: &CovarianceSpec, locs: &[Location], seed: u64) -> Result<Vec<f64>> {
    let cov = covariance_matrix(spec, locs)?;
    let chol = cov.cholesky(spec.sigma2)?;
    let mut rng = seed::rng(seed);
    let z: Vec<f64> = (0..locs.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let l = chol.l();
    let n = locs.len();
    let mut w = vec![0.0; n];
    for (i, wi) in w.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, zj) in z.iter().enumerate().take(i + 1) {
            acc += l[(i, j)] * zj;
        }
        *wi = acc;
    }
    Ok(w)
}
