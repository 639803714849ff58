use nalgebra::{DMatrix, DVector};

use super::{Cut, MembershipMatrix, SplitEvaluation};
use crate::error::{Error, Result};
use crate::nngp::{dominance_of, PrecisionMatrix, SparseCholeskyFactor};
use crate::spatial::FeatureMatrix;

/// GLS fit of `y` on the leaf-membership design: `A = Z^T Q Z`, its inverse,
/// the coefficients, and `g = Q (y - Z beta)`.
#[derive(Debug, Clone)]
pub struct GlsSystem<'a> {
    q: &'a PrecisionMatrix,
    assignment: &'a [usize],
    k: usize,
    a_inv: DMatrix<f64>,
    beta: Vec<f64>,
    g: Vec<f64>,
}

impl<'a> GlsSystem<'a> {
    pub fn new(q: &'a PrecisionMatrix, assignment: &'a [usize], k: usize, y: &[f64]) -> Result<Self> {
        Error::check_len(q.n(), assignment.len())?;
        Error::check_len(q.n(), y.len())?;
        let mut a = DMatrix::zeros(k, k);
        let mut b = vec![0.0; k];
        for (i, &li) in assignment.iter().enumerate() {
            for (j, qij) in q.row(i) {
                a[(li, assignment[j])] += qij;
                b[li] += qij * y[j];
            }
        }
        let diagonal = (0..k).all(|r| (0..k).all(|c| r == c || a[(r, c)] == 0.0));
        let (a_inv, beta) = if diagonal {
            if (0..k).any(|l| !(a[(l, l)] > 0.0)) {
                return Err(Error::SingularSystem);
            }
            let beta: Vec<f64> = (0..k).map(|l| b[l] / a[(l, l)]).collect();
            (DMatrix::from_fn(k, k, |r, c| if r == c { 1.0 / a[(r, r)] } else { 0.0 }), beta)
        } else {
            let chol = a.cholesky().ok_or(Error::SingularSystem)?;
            let beta = chol.solve(&DVector::from_vec(b));
            (chol.inverse(), beta.as_slice().to_vec())
        };
        if beta.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem);
        }
        let resid: Vec<f64> = y.iter().zip(assignment).map(|(yi, &l)| yi - beta[l]).collect();
        let g = q.mul_vec(&resid);
        Ok(Self {
            q,
            assignment,
            k,
            a_inv,
            beta,
            g,
        })
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn leaf_count(&self) -> usize {
        self.k
    }

    /// Loss reduction (not yet divided by `n`) from splitting off the sample
    /// set `left` from its leaf. `left` must be a nonempty proper subset of a
    /// single leaf.
    pub fn split_gain(&self, left: &[usize]) -> f64 {
        let n = self.q.n();
        let mut in_left = vec![false; n];
        for &i in left {
            in_left[i] = true;
        }
        let mut u_g = 0.0;
        let mut u_q_u = 0.0;
        let mut c = DVector::zeros(self.k);
        for &i in left {
            u_g += self.g[i];
            for (j, qij) in self.q.row(i) {
                if in_left[j] {
                    u_q_u += qij;
                }
                c[self.assignment[j]] += qij;
            }
        }
        let schur = u_q_u - c.dot(&(&self.a_inv * &c));
        if schur > 0.0 {
            u_g * u_g / schur
        } else {
            0.0
        }
    }

    /// Scans thresholds of one covariate inside one leaf.
    ///
    /// `order` lists the leaf's samples sorted by `values` (ties by index);
    /// `values[t]` is the covariate of `order[t]`. For every admissible cut
    /// between distinct consecutive values with at least `min_child` samples
    /// on each side, `visit(n_left, gain)` is called in ascending order.
    pub fn scan<F: FnMut(usize, f64)>(&self, order: &[usize], values: &[f64], min_child: usize, scratch: &mut ScanScratch, mut visit: F) {
        let k = self.k;
        scratch.reset(self.q.n(), k);
        let mut u_g = 0.0;
        let mut u_q_u = 0.0;
        let mut quad = 0.0;
        let m = order.len();
        for t in 0..m.saturating_sub(1) {
            let i = order[t];
            for (j, qij) in self.q.row(i) {
                if j == i {
                    u_q_u += qij;
                } else if scratch.in_left[j] {
                    u_q_u += 2.0 * qij;
                }
                let l = self.assignment[j];
                if !scratch.marked[l] {
                    scratch.marked[l] = true;
                    scratch.touched.push(l);
                }
                scratch.delta[l] += qij;
            }
            scratch.in_left[i] = true;
            u_g += self.g[i];

            // c <- c + delta;  quad = c^T A^-1 c;  h = A^-1 c
            let mut cross = 0.0;
            let mut dd = 0.0;
            for &l1 in &scratch.touched {
                let d1 = scratch.delta[l1];
                cross += d1 * scratch.h[l1];
                for &l2 in &scratch.touched {
                    dd += d1 * self.a_inv[(l1, l2)] * scratch.delta[l2];
                }
            }
            quad += 2.0 * cross + dd;
            for &l in &scratch.touched {
                let d = scratch.delta[l];
                for r in 0..k {
                    scratch.h[r] += self.a_inv[(r, l)] * d;
                }
                scratch.delta[l] = 0.0;
                scratch.marked[l] = false;
            }
            scratch.touched.clear();

            let n_left = t + 1;
            if n_left >= min_child && m - n_left >= min_child && values[t] < values[t + 1] {
                let schur = u_q_u - quad;
                let gain = if schur > 0.0 { u_g * u_g / schur } else { 0.0 };
                visit(n_left, gain);
            }
        }
        for &i in &order[..m.saturating_sub(1)] {
            scratch.in_left[i] = false;
        }
    }
}

/// Reusable buffers for [`GlsSystem::scan`].
#[derive(Debug, Default)]
pub struct ScanScratch {
    in_left: Vec<bool>,
    delta: Vec<f64>,
    marked: Vec<bool>,
    h: Vec<f64>,
    touched: Vec<usize>,
}

impl ScanScratch {
    fn reset(&mut self, n: usize, k: usize) {
        if self.in_left.len() != n {
            self.in_left = vec![false; n];
        }
        self.delta.clear();
        self.delta.resize(k, 0.0);
        self.marked.clear();
        self.marked.resize(k, false);
        self.h.clear();
        self.h.resize(k, 0.0);
        self.touched.clear();
    }
}

/// `(Z^T Q Z)^-1 Z^T Q y` for a working precision given by its factor.
pub fn gls_beta(factor: &SparseCholeskyFactor, membership: &MembershipMatrix, labels: &[f64]) -> Result<Vec<f64>> {
    gls_beta_with(&PrecisionMatrix::from_factor(factor), membership, labels)
}

pub fn gls_beta_with(q: &PrecisionMatrix, membership: &MembershipMatrix, labels: &[f64]) -> Result<Vec<f64>> {
    let sys = GlsSystem::new(q, membership.assignment(), membership.leaf_count(), labels)?;
    Ok(sys.beta)
}

/// GLS split criterion for splitting `leaf` at `cut`: the drop in the
/// globally refitted quadratic loss, divided by `n`.
pub fn gls_split_criterion(
    factor: &SparseCholeskyFactor,
    membership_before: &MembershipMatrix,
    leaf: usize,
    cut: &Cut,
    x: &FeatureMatrix,
    y: &[f64],
) -> Result<SplitEvaluation> {
    Error::check_len(membership_before.n(), x.n_rows())?;
    if leaf >= membership_before.leaf_count() || cut.feature >= x.n_cols() {
        return Err(Error::InvalidParameter("leaf or feature out of range".into()));
    }
    let members: Vec<usize> = (0..x.n_rows())
        .filter(|&i| membership_before.assignment()[i] == leaf)
        .collect();
    let left: Vec<usize> = members
        .iter()
        .copied()
        .filter(|&i| x.get(i, cut.feature) <= cut.threshold)
        .collect();
    if left.is_empty() || left.len() == members.len() {
        return Err(Error::EmptyChild);
    }
    let q = PrecisionMatrix::from_factor(factor);
    let sys = GlsSystem::new(&q, membership_before.assignment(), membership_before.leaf_count(), y)?;
    Ok(SplitEvaluation {
        cut: *cut,
        criterion_value: sys.split_gain(&left) / x.n_rows() as f64,
    })
}

/// Upper bound on `max |leaf value|` of any GLS tree grown with this working
/// precision, for responses bounded by `max_abs_y`:
///
/// ```text
/// max_i sum_r |V_ri| * ||V_r||_1  /  xi  *  max|y|
/// ```
///
/// where `xi` is the diagonal-dominance margin of `Q`. The numerator bounds
/// every absolute row sum of `Q = V^T V`. `None` when `Q` is not diagonally
/// dominant.
pub fn leaf_value_bound(factor: &SparseCholeskyFactor, max_abs_y: f64) -> Option<f64> {
    let dom = dominance_of(&PrecisionMatrix::from_factor(factor));
    if !dom.dominant {
        return None;
    }
    let mut acc = vec![0.0; factor.n()];
    for r in factor.rows() {
        let l1: f64 = r.values.iter().map(|v| v.abs()).sum();
        for (&i, v) in r.indices.iter().zip(&r.values) {
            acc[i] += v.abs() * l1;
        }
    }
    let num = acc.into_iter().fold(0.0, f64::max);
    Some(num / dom.xi * max_abs_y)
}
