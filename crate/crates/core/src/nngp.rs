//! Nearest-neighbor Gaussian-process factor of the working precision matrix.
//!
//! Sites are ordered by coordinate sum; each site is conditioned on its `q`
//! nearest predecessors. Row `i` of the lower-triangular factor `V` is
//!
//! ```text
//! (1, -c_iN C_NN^-1) / sqrt(1 - c_iN C_NN^-1 c_Ni)
//! ```
//!
//! placed at columns `(i, N[i])`, and the working precision is `Q = V^T V`.
//! The working correlation is the unit-variance exponential `exp(-zeta d)`;
//! `zeta = inf` gives `Q = I` exactly.

use std::cmp::Ordering;
use std::fmt;

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::spatial::{check_distinct, Location};

pub const DEFAULT_NEIGHBORS: usize = 10;

/// Working-correlation decay; `Infinite` means independence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Zeta {
    Finite(f64),
    Infinite,
}

impl Zeta {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Zeta::Infinite)
    }

    /// Numeric value, `f64::INFINITY` for `Infinite`.
    pub fn value(&self) -> f64 {
        match *self {
            Zeta::Finite(z) => z,
            Zeta::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Zeta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Zeta::Finite(z) => write!(f, "{z}"),
            Zeta::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Zeta {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match *self {
            Zeta::Finite(z) => s.serialize_f64(z),
            Zeta::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Zeta {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Zeta;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a positive number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Zeta, E> {
                if v > 0.0 && v.is_finite() {
                    Ok(Zeta::Finite(v))
                } else {
                    Err(E::custom(format!("zeta must be > 0, got {v}")))
                }
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Zeta, E> {
                self.visit_f64(v as f64)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Zeta, E> {
                self.visit_f64(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Zeta, E> {
                match v {
                    "inf" | "Inf" | "infinity" => Ok(Zeta::Infinite),
                    _ => Err(E::custom(format!("unrecognized zeta {v:?}"))),
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkingCorrelationSpec {
    pub zeta: Zeta,
    #[serde(default = "default_q")]
    pub q: usize,
}

fn default_q() -> usize {
    DEFAULT_NEIGHBORS
}

impl WorkingCorrelationSpec {
    pub fn new(zeta: f64, q: usize) -> Result<Self> {
        let s = Self {
            zeta: if zeta.is_infinite() { Zeta::Infinite } else { Zeta::Finite(zeta) },
            q,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn identity() -> Self {
        Self {
            zeta: Zeta::Infinite,
            q: DEFAULT_NEIGHBORS,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.zeta.is_infinite()
    }

    pub fn validate(&self) -> Result<()> {
        if self.q == 0 {
            return Err(Error::InvalidParameter("q must be >= 1".into()));
        }
        if let Zeta::Finite(z) = self.zeta {
            if !(z > 0.0 && z.is_finite()) {
                return Err(Error::InvalidParameter(format!("zeta must be > 0, got {z}")));
            }
        }
        Ok(())
    }
}

/// Site ordering and conditioning sets. `neighbor_sets[i]` holds *positions*
/// (indices into `permutation`) of the conditioning set of position `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborOrdering {
    pub permutation: Vec<usize>,
    pub neighbor_sets: Vec<Vec<usize>>,
}

/// Orders sites by coordinate sum (ties: first coordinate, then index) and
/// finds the `min(q, i)` nearest predecessors of each position by exact search.
pub fn order_locations(locs: &[Location], q: usize) -> Result<NeighborOrdering> {
    check_distinct(locs)?;
    let mut permutation: Vec<usize> = (0..locs.len()).collect();
    permutation.sort_by(|&a, &b| {
        let (la, lb) = (&locs[a], &locs[b]);
        la.coord_sum()
            .total_cmp(&lb.coord_sum())
            .then(la.coords()[0].total_cmp(&lb.coords()[0]))
            .then(a.cmp(&b))
    });
    let mut neighbor_sets = Vec::with_capacity(locs.len());
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(locs.len());
    for i in 0..permutation.len() {
        let here = &locs[permutation[i]];
        cand.clear();
        cand.extend((0..i).map(|j| (here.distance(&locs[permutation[j]]), j)));
        let k = q.min(i);
        let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k > 0 && k < cand.len() {
            cand.select_nth_unstable_by(k - 1, by_dist);
        }
        cand.truncate(k);
        cand.sort_by(by_dist);
        neighbor_sets.push(cand.iter().map(|&(_, j)| j).collect());
    }
    Ok(NeighborOrdering {
        permutation,
        neighbor_sets,
    })
}

/// One row of `V`: `indices[0]` is the row's own site, followed by its
/// conditioning set, all as sample indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

/// Row-sparse lower-triangular factor with `Q = V^T V`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCholeskyFactor {
    n: usize,
    q: usize,
    rows: Vec<SparseRow>,
}

impl SparseCholeskyFactor {
    pub fn identity(n: usize) -> Self {
        Self {
            n,
            q: 0,
            rows: (0..n)
                .map(|i| SparseRow {
                    indices: vec![i],
                    values: vec![1.0],
                })
                .collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn is_identity(&self) -> bool {
        self.rows
            .iter()
            .enumerate()
            .all(|(i, r)| r.indices == [i] && r.values == [1.0])
    }

    /// `Q = V^T V` as a dense matrix. Small problems and tests only.
    pub fn dense_q(&self) -> DMatrix<f64> {
        let mut q = DMatrix::zeros(self.n, self.n);
        for r in &self.rows {
            for (a, &ia) in r.indices.iter().enumerate() {
                for (b, &ib) in r.indices.iter().enumerate() {
                    q[(ia, ib)] += r.values[a] * r.values[b];
                }
            }
        }
        q
    }

    /// Multiplies every entry of `V` by `sqrt(c)`, i.e. `Q -> c Q`.
    pub fn scaled(&self, c: f64) -> Self {
        let s = c.sqrt();
        Self {
            n: self.n,
            q: self.q,
            rows: self
                .rows
                .iter()
                .map(|r| SparseRow {
                    indices: r.indices.clone(),
                    values: r.values.iter().map(|v| v * s).collect(),
                })
                .collect(),
        }
    }

    /// Relabels samples: sample `i` becomes `perm[i]`.
    pub fn relabeled(&self, perm: &[usize]) -> Self {
        Self {
            n: self.n,
            q: self.q,
            rows: self
                .rows
                .iter()
                .map(|r| SparseRow {
                    indices: r.indices.iter().map(|&i| perm[i]).collect(),
                    values: r.values.clone(),
                })
                .collect(),
        }
    }
}

fn exp_corr(zeta: f64, a: &Location, b: &Location) -> f64 {
    (-zeta * a.distance(b)).exp()
}

/// Builds the NNGP factor for the given ordering.
pub fn build_factor(
    spec: &WorkingCorrelationSpec,
    ordering: &NeighborOrdering,
    locs: &[Location],
) -> Result<SparseCholeskyFactor> {
    spec.validate()?;
    Error::check_len(locs.len(), ordering.permutation.len())?;
    let n = locs.len();
    let zeta = match spec.zeta {
        Zeta::Infinite => return Ok(SparseCholeskyFactor::identity(n)),
        Zeta::Finite(z) => z,
    };
    let mut rows = Vec::with_capacity(n);
    for (pos, nbrs) in ordering.neighbor_sets.iter().enumerate() {
        let site = ordering.permutation[pos];
        let here = &locs[site];
        let nb_sites: Vec<usize> = nbrs.iter().map(|&p| ordering.permutation[p]).collect();
        let k = nb_sites.len();
        let mut indices = Vec::with_capacity(k + 1);
        indices.push(site);
        indices.extend_from_slice(&nb_sites);
        if k == 0 {
            rows.push(SparseRow {
                indices,
                values: vec![1.0],
            });
            continue;
        }
        let c_nn = DMatrix::from_fn(k, k, |a, b| {
            if a == b {
                1.0
            } else {
                exp_corr(zeta, &locs[nb_sites[a]], &locs[nb_sites[b]])
            }
        });
        let c_in = DVector::from_iterator(k, nb_sites.iter().map(|&s| exp_corr(zeta, here, &locs[s])));
        let chol = Cholesky::new(c_nn).ok_or(Error::SingularNeighborSystem(pos))?;
        let b = chol.solve(&c_in);
        let cond_var = 1.0 - c_in.dot(&b);
        if !(cond_var > 1e-14) {
            return Err(Error::SingularNeighborSystem(pos));
        }
        let scale = 1.0 / cond_var.sqrt();
        let mut values = Vec::with_capacity(k + 1);
        values.push(scale);
        values.extend(b.iter().map(|v| -v * scale));
        rows.push(SparseRow { indices, values });
    }
    Ok(SparseCholeskyFactor { n, q: spec.q, rows })
}

/// `order_locations` followed by `build_factor`.
pub fn factor_for(spec: &WorkingCorrelationSpec, locs: &[Location]) -> Result<SparseCholeskyFactor> {
    if spec.is_identity() {
        check_distinct(locs)?;
        return Ok(SparseCholeskyFactor::identity(locs.len()));
    }
    let ordering = order_locations(locs, spec.q)?;
    build_factor(spec, &ordering, locs)
}

/// Rebuilds the factor on a subsample; sample `j` of the result is
/// `subsample[j]` of the original set.
pub fn restrict_factor(
    spec: &WorkingCorrelationSpec,
    subsample: &[usize],
    locs: &[Location],
) -> Result<SparseCholeskyFactor> {
    if subsample.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let sub: Vec<Location> = subsample
        .iter()
        .map(|&i| {
            locs.get(i)
                .copied()
                .ok_or_else(|| Error::InvalidParameter(format!("subsample index {i} out of range")))
        })
        .collect::<Result<_>>()?;
    factor_for(spec, &sub)
}

/// `V^T (V v)` in `O(n q)`.
pub fn apply_q(factor: &SparseCholeskyFactor, v: &[f64]) -> Result<Vec<f64>> {
    Error::check_len(factor.n, v.len())?;
    let mut out = vec![0.0; factor.n];
    for r in &factor.rows {
        let t: f64 = r.indices.iter().zip(&r.values).map(|(&i, &a)| a * v[i]).sum();
        for (&i, &a) in r.indices.iter().zip(&r.values) {
            out[i] += a * t;
        }
    }
    Ok(out)
}

/// `Q = V^T V` in compressed sparse row form.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    identity: bool,
}

impl PrecisionMatrix {
    pub fn from_factor(factor: &SparseCholeskyFactor) -> Self {
        let n = factor.n;
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        for r in &factor.rows {
            for (&ia, &va) in r.indices.iter().zip(&r.values) {
                for (&ib, &vb) in r.indices.iter().zip(&r.values) {
                    triplets.push((ia, ib, va * vb));
                }
            }
        }
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::new();
        let mut vals: Vec<f64> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
            identity: factor.is_identity(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_factor(&SparseCholeskyFactor::identity(n))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    /// Nonzeros of row `i` as `(column, value)`.
    #[inline]
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, q)| q * v[j]).sum()).collect()
    }

    pub fn quad_form(&self, v: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| v[i] * self.row(i).map(|(j, q)| q * v[j]).sum::<f64>())
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DominanceReport {
    pub dominant: bool,
    /// `min_d (Q_dd - sum_{l != d} |Q_dl|)`
    pub xi: f64,
}

pub fn check_diagonal_dominance(factor: &SparseCholeskyFactor) -> DominanceReport {
    dominance_of(&PrecisionMatrix::from_factor(factor))
}

pub fn dominance_of(q: &PrecisionMatrix) -> DominanceReport {
    let xi = (0..q.n)
        .map(|i| {
            q.row(i)
                .map(|(j, v)| if j == i { v } else { -v.abs() })
                .sum::<f64>()
        })
        .min_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal))
        .unwrap_or(f64::INFINITY);
    DominanceReport { dominant: xi > 0.0, xi }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lattice(n: usize) -> Vec<Location> {
        (1..=n).map(|i| Location::line(i as f64)).collect()
    }

    fn dense_corr(zeta: f64, locs: &[Location]) -> DMatrix<f64> {
        DMatrix::from_fn(locs.len(), locs.len(), |i, j| exp_corr(zeta, &locs[i], &locs[j]))
    }

    #[test]
    fn lattice_ordering_is_identity() {
        let o = order_locations(&lattice(8), 3).unwrap();
        assert_eq!(o.permutation, (0..8).collect::<Vec<_>>());
        assert_eq!(o.neighbor_sets[0], Vec::<usize>::new());
        assert_eq!(o.neighbor_sets[1], vec![0]);
        assert_eq!(o.neighbor_sets[5], vec![4, 3, 2]);
        let one = order_locations(&lattice(1), 3).unwrap();
        assert_eq!(one.neighbor_sets, vec![Vec::<usize>::new()]);
    }

    #[test]
    fn three_point_example() {
        let locs = [Location::xy(0.0, 0.0), Location::xy(1.0, 0.0), Location::xy(0.4, 0.4)];
        let o = order_locations(&locs, 1).unwrap();
        assert_eq!(o.permutation, vec![0, 2, 1]);
        assert_eq!(o.neighbor_sets, vec![vec![], vec![0], vec![1]]);
    }

    #[test]
    fn neighbor_ties_prefer_smaller_position() {
        // positions 0 and 1 are equidistant from position 2
        let locs = [Location::line(0.0), Location::line(2.0), Location::line(1.0)];
        let o = order_locations(&locs, 1).unwrap();
        assert_eq!(o.permutation, vec![0, 2, 1]);
        let locs = [Location::xy(0.0, 1.0), Location::xy(1.0, 0.0), Location::xy(1.0, 1.0)];
        let o = order_locations(&locs, 1).unwrap();
        assert_eq!(o.permutation, vec![0, 1, 2]);
        assert_eq!(o.neighbor_sets[2], vec![0]);
    }

    #[test]
    fn identity_factor() {
        let spec = WorkingCorrelationSpec::identity();
        let f = factor_for(&spec, &lattice(5)).unwrap();
        assert_eq!(f.dense_q(), DMatrix::identity(5, 5));
        let v = vec![1.0, -2.0, 3.0, 0.5, 0.0];
        assert_eq!(apply_q(&f, &v).unwrap(), v);
        let d = check_diagonal_dominance(&f);
        assert!(d.dominant);
        assert_eq!(d.xi, 1.0);
    }

    #[test]
    fn first_row_is_unit() {
        let spec = WorkingCorrelationSpec::new(2.0, 3).unwrap();
        let f = factor_for(&spec, &lattice(4)).unwrap();
        assert_eq!(f.rows()[0].values, vec![1.0]);
    }

    #[test]
    fn full_conditioning_matches_dense_inverse() {
        let locs: Vec<Location> = (0..12)
            .map(|i| Location::xy((i as f64 * 0.37).fract(), (i as f64 * 0.61).fract()))
            .collect();
        let spec = WorkingCorrelationSpec::new(3.0, locs.len() - 1).unwrap();
        let f = factor_for(&spec, &locs).unwrap();
        let dense = dense_corr(3.0, &locs).try_inverse().unwrap();
        let q = f.dense_q();
        assert!((q - &dense).abs().max() < 1e-8);
        let v: Vec<f64> = (0..12).map(|i| (i as f64).sin()).collect();
        let applied = apply_q(&f, &v).unwrap();
        let expect = dense * DVector::from_vec(v);
        for i in 0..12 {
            assert!((applied[i] - expect[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn two_point_closed_form() {
        let locs = [Location::xy(0.1, 0.2), Location::xy(0.5, 0.5)];
        let zeta = 1.7;
        let spec = WorkingCorrelationSpec::new(zeta, 4).unwrap();
        let f = restrict_factor(&spec, &[0, 1], &locs).unwrap();
        let r = (-zeta * 0.5f64).exp();
        let q = f.dense_q();
        let c = 1.0 / (1.0 - r * r);
        assert!((q[(0, 0)] - c).abs() < 1e-12);
        assert!((q[(1, 1)] - c).abs() < 1e-12);
        assert!((q[(0, 1)] + r * c).abs() < 1e-12);
        let single = restrict_factor(&spec, &[1], &locs).unwrap();
        assert_eq!(single.dense_q(), DMatrix::identity(1, 1));
    }

    #[test]
    fn restrict_full_set_matches_build() {
        let locs: Vec<Location> = (0..15).map(|i| Location::xy(i as f64 * 0.1, (i * 7 % 5) as f64 * 0.2)).collect();
        let spec = WorkingCorrelationSpec::new(4.0, 3).unwrap();
        let full: Vec<usize> = (0..15).collect();
        assert_eq!(restrict_factor(&spec, &full, &locs).unwrap(), factor_for(&spec, &locs).unwrap());
    }

    #[test]
    fn ar1_lattice_q1() {
        let zeta = 0.8;
        let n = 7;
        let spec = WorkingCorrelationSpec::new(zeta, 1).unwrap();
        let f = factor_for(&spec, &lattice(n)).unwrap();
        let q = f.dense_q();
        let r = (-zeta as f64).exp();
        let c = 1.0 / (1.0 - r * r);
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j {
                    if i == 0 || i == n - 1 { c } else { (1.0 + r * r) * c }
                } else if i.abs_diff(j) == 1 {
                    -r * c
                } else {
                    0.0
                };
                assert!((q[(i, j)] - expect).abs() < 1e-12, "({i},{j})");
            }
        }
    }

    #[test]
    fn dominance_two_by_two() {
        // rows of L^T, so V^T V = L L^T = Q
        let l = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]).cholesky().unwrap().l();
        let f = SparseCholeskyFactor {
            n: 2,
            q: 1,
            rows: vec![
                SparseRow {
                    indices: vec![0, 1],
                    values: vec![l[(0, 0)], l[(1, 0)]],
                },
                SparseRow {
                    indices: vec![1],
                    values: vec![l[(1, 1)]],
                },
            ],
        };
        let d = check_diagonal_dominance(&f);
        assert!(d.dominant);
        assert!((d.xi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zeta_serde() {
        let s: WorkingCorrelationSpec = serde_json::from_str(r#"{"zeta":"inf"}"#).unwrap();
        assert!(s.is_identity());
        assert_eq!(s.q, DEFAULT_NEIGHBORS);
        let s: WorkingCorrelationSpec = serde_json::from_str(r#"{"zeta":4,"q":5}"#).unwrap();
        assert_eq!(s.zeta, Zeta::Finite(4.0));
        assert_eq!(serde_json::to_string(&Zeta::Infinite).unwrap(), "\"inf\"");
        assert!(serde_json::from_str::<WorkingCorrelationSpec>(r#"{"zeta":-1}"#).is_err());
        assert!(serde_json::from_str::<WorkingCorrelationSpec>(r#"{"zeta":1,"extra":2}"#).is_err());
    }
}
