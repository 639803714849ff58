//! Multivariate normal orthant-type probabilities `P(N(0, V) <= u)` by
//! separation of variables and a randomly shifted Kronecker lattice.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::covariance::cholesky_with_jitter;
use crate::error::{Error, Result};
use crate::link::{phi_cdf, ppnd16};
use crate::seed;

pub const MAX_DIMENSION: usize = 200;
pub const MIN_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QmcSettings {
    /// Independent random shifts; the standard error is taken across them.
    pub shifts: usize,
    pub points: usize,
    pub seed: u64,
}

impl Default for QmcSettings {
    fn default() -> Self {
        Self {
            shifts: 8,
            points: 4096,
            seed: 0,
        }
    }
}

impl QmcSettings {
    pub fn validate(&self) -> Result<()> {
        if self.shifts < 2 {
            return Err(Error::InvalidParameter("qmc shifts must be >= 2".into()));
        }
        if self.shifts * self.points < MIN_SAMPLES {
            return Err(Error::InvalidParameter(format!(
                "qmc needs at least {MIN_SAMPLES} samples, got {}",
                self.shifts * self.points
            )));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MvnCdfProblem {
    pub mean: Vec<f64>,
    pub covariance: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub estimate: f64,
    pub std_error: f64,
}

/// `Phi_k(u, V)`.
pub fn mvn_cdf(problem: &MvnCdfProblem, qmc: &QmcSettings) -> Result<Estimate> {
    let k = problem.mean.len();
    check_problem(problem)?;
    qmc.validate()?;
    if k == 1 {
        return Ok(Estimate {
            estimate: phi_cdf(problem.mean[0] / problem.covariance[(0, 0)].sqrt()),
            std_error: 0.0,
        });
    }
    let order = order_by_marginal(&problem.mean, &problem.covariance, k);
    let sov = Sov::new(&problem.mean, &problem.covariance, &order)?;
    let shifts = sov.run(qmc);
    let per: Vec<f64> = shifts.iter().map(|s| s.num_scaled * s.scale.exp() / s.n as f64).collect();
    let (mean, se) = mean_se(&per);
    Ok(Estimate {
        estimate: mean.clamp(0.0, 1.0),
        std_error: se,
    })
}

/// `Phi_k(u, V) / Phi_{k-1}(u_head, V_head)`, i.e. the conditional
/// probability of the last event given the others, from a single set of
/// draws shared by numerator and denominator.
pub fn mvn_cdf_ratio(problem: &MvnCdfProblem, qmc: &QmcSettings) -> Result<Estimate> {
    let k = problem.mean.len();
    check_problem(problem)?;
    qmc.validate()?;
    if k < 2 {
        return Err(Error::InvalidParameter("ratio needs at least two variables".into()));
    }
    let mut order = order_by_marginal(&problem.mean[..k - 1], &problem.covariance, k - 1);
    order.push(k - 1);
    let sov = Sov::new(&problem.mean, &problem.covariance, &order)?;
    if sov.rows[k - 1].iter().all(|&v| v == 0.0) {
        return Ok(Estimate {
            estimate: phi_cdf(sov.u[k - 1] * sov.inv_diag[k - 1]),
            std_error: 0.0,
        });
    }
    let shifts = sov.run(qmc);
    let top = shifts.iter().map(|s| s.scale).fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        // every draw underflowed; fall back to the unconditional marginal
        return Ok(Estimate {
            estimate: phi_cdf(problem.mean[k - 1] / problem.covariance[(k - 1, k - 1)].sqrt()),
            std_error: f64::NAN,
        });
    }
    let (mut num, mut den) = (0.0, 0.0);
    let mut per = Vec::with_capacity(shifts.len());
    for s in &shifts {
        if s.den_scaled > 0.0 {
            let w = (s.scale - top).exp();
            num += w * s.num_scaled;
            den += w * s.den_scaled;
            per.push(s.num_scaled / s.den_scaled);
        }
    }
    let (_, se) = mean_se(&per);
    Ok(Estimate {
        estimate: (num / den).clamp(0.0, 1.0),
        std_error: se,
    })
}

fn check_problem(problem: &MvnCdfProblem) -> Result<()> {
    let k = problem.mean.len();
    if k == 0 {
        return Err(Error::InvalidParameter("empty MVN problem".into()));
    }
    if k > MAX_DIMENSION {
        return Err(Error::DimensionCap {
            dim: k,
            cap: MAX_DIMENSION,
        });
    }
    if problem.covariance.nrows() != k || problem.covariance.ncols() != k {
        return Err(Error::LengthMismatch {
            expected: k,
            actual: problem.covariance.nrows(),
        });
    }
    if problem.mean.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidParameter("NaN in MVN mean".into()));
    }
    Ok(())
}

/// Indices `0..k` sorted by increasing `Phi(u_i / sqrt(V_ii))`, ties by index.
fn order_by_marginal(u: &[f64], v: &DMatrix<f64>, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..k).collect();
    let z: Vec<f64> = (0..k).map(|i| u[i] / v[(i, i)].sqrt()).collect();
    idx.sort_by(|&a, &b| z[a].total_cmp(&z[b]).then(a.cmp(&b)));
    idx
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

struct ShiftSums {
    /// Sums are stored relative to `exp(scale)`.
    scale: f64,
    den_scaled: f64,
    num_scaled: f64,
    n: usize,
}

struct Sov {
    u: Vec<f64>,
    /// Row-major strict lower triangle of `l` divided by the diagonal.
    rows: Vec<Vec<f64>>,
    inv_diag: Vec<f64>,
}

impl Sov {
    fn new(u: &[f64], v: &DMatrix<f64>, order: &[usize]) -> Result<Self> {
        let k = order.len();
        let pv = DMatrix::from_fn(k, k, |i, j| v[(order[i], order[j])]);
        let scale = (0..k).map(|i| pv[(i, i)]).fold(0.0, f64::max);
        let l = cholesky_with_jitter(pv, 1e-10 * scale)?.l();
        let inv_diag: Vec<f64> = (0..k).map(|i| 1.0 / l[(i, i)]).collect();
        let rows = (0..k).map(|i| (0..i).map(|j| l[(i, j)]).collect()).collect();
        Ok(Self {
            u: order.iter().map(|&i| u[i]).collect(),
            rows,
            inv_diag,
        })
    }

    /// Per shift: `den = prod_{i<k-1} e_i` and `num = den * e_{k-1}`.
    fn run(&self, qmc: &QmcSettings) -> Vec<ShiftSums> {
        let k = self.u.len();
        let dims = k - 1;
        let alpha = lattice_generators(dims);
        let mut y = vec![0.0; dims];
        let mut logs = vec![0.0; qmc.points];
        let mut last = vec![0.0; qmc.points];
        (0..qmc.shifts)
            .map(|s| {
                let mut rng = seed::rng(seed::derive(qmc.seed, s as u64));
                let shift: Vec<f64> = (0..dims).map(|_| rng.random::<f64>()).collect();
                for p in 0..qmc.points {
                    let mut log_f = 0.0;
                    let mut alive = true;
                    for i in 0..dims {
                        let e = self.conditional(i, &y);
                        if e <= 0.0 {
                            alive = false;
                            break;
                        }
                        log_f += e.ln();
                        let x = ((p as f64) * alpha[i] + shift[i]).fract();
                        let w = 1.0 - (2.0 * x - 1.0).abs();
                        let t = (w * e).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
                        y[i] = ppnd16(t);
                    }
                    if alive {
                        logs[p] = log_f;
                        last[p] = self.conditional(dims, &y);
                    } else {
                        logs[p] = f64::NEG_INFINITY;
                        last[p] = 0.0;
                    }
                }
                let scale = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let (mut den, mut num) = (0.0, 0.0);
                if scale > f64::NEG_INFINITY {
                    for (lf, e) in logs.iter().zip(&last) {
                        let f = (lf - scale).exp();
                        den += f;
                        num += f * e;
                    }
                }
                ShiftSums {
                    scale,
                    den_scaled: den,
                    num_scaled: num,
                    n: qmc.points,
                }
            })
            .collect()
    }

    #[inline]
    fn conditional(&self, i: usize, y: &[f64]) -> f64 {
        let s: f64 = self.rows[i].iter().zip(y).map(|(a, b)| a * b).sum();
        phi_cdf((self.u[i] - s) * self.inv_diag[i])
    }
}

/// Richtmyer generators `frac(sqrt(prime_j))`.
fn lattice_generators(dims: usize) -> Vec<f64> {
    let mut primes = Vec::with_capacity(dims);
    let mut c = 2u64;
    while primes.len() < dims {
        if primes.iter().take_while(|&&p| p * p <= c).all(|&p| c % p != 0) {
            primes.push(c);
        }
        c += 1;
    }
    primes.iter().map(|&p| (p as f64).sqrt().fract()).collect()
}
