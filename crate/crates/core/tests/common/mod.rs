#![allow(dead_code)]

pub mod gini;
pub mod normal_table;

use rand::Rng;
use rand_distr::StandardNormal;
use rfgp::seed;
use rfgp::spatial::{FeatureMatrix, Location};

/// Plain Monte Carlo `P(X <= u)`, `X ~ N(0, V)`, with its standard error.
pub fn mc_orthant(u: &[f64], v: &nalgebra::DMatrix<f64>, draws: usize, seed_: u64) -> (f64, f64) {
    let k = u.len();
    let l = v.clone().cholesky().expect("positive definite").l();
    let mut rng = seed::rng(seed_);
    let mut z = vec![0.0; k];
    let mut hits = 0usize;
    for _ in 0..draws {
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        let inside = (0..k).all(|i| {
            let x: f64 = (0..=i).map(|j| l[(i, j)] * z[j]).sum();
            x <= u[i]
        });
        hits += usize::from(inside);
    }
    let p = hits as f64 / draws as f64;
    (p, (p * (1.0 - p) / draws as f64).sqrt())
}

pub fn random_locations(n: usize, rng: &mut impl Rng) -> Vec<Location> {
    (0..n).map(|_| Location::xy(rng.random(), rng.random())).collect()
}

/// Covariates mixing continuous and coarse (tie-heavy) columns.
pub fn random_covariates(n: usize, d: usize, rng: &mut impl Rng) -> FeatureMatrix {
    let coarse: Vec<bool> = (0..d).map(|_| rng.random::<f64>() < 0.4).collect();
    let mut x = Vec::with_capacity(n * d);
    for _ in 0..n {
        for &c in &coarse {
            let v: f64 = rng.random();
            x.push(if c { (v * 5.0).floor() } else { v });
        }
    }
    FeatureMatrix::new(n, d, x).unwrap()
}
