//! Best-first classification tree grown on the size-weighted Gini decrease,
//! independent of the GLS machinery. Shares the feature-subsampling streams,
//! candidate cutoffs, tie rules and stopping rules with the GLS grower.

use rfgp::gls_tree::{select_features, strictly_better, TreeParams};
use rfgp::spatial::FeatureMatrix;

#[derive(Debug, Clone, PartialEq)]
pub enum OracleNode {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<OracleNode>,
        right: Box<OracleNode>,
    },
}

fn gini(ones: usize, n: usize) -> f64 {
    let p = ones as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = 0.5 * (lo + hi);
    if m < hi {
        m
    } else {
        lo
    }
}

#[derive(Clone, Copy)]
struct Best {
    value: f64,
    feature: usize,
    threshold: f64,
}

/// Weighted decrease `n_T / (2 n) * (I(T) - n_L/n_T I(L) - n_R/n_T I(R))`.
fn best_cut(x: &FeatureMatrix, y: &[u8], members: &[usize], feats: &[usize], t_c: usize, n: usize) -> Option<Best> {
    let nt = members.len();
    let ones: usize = members.iter().map(|&i| usize::from(y[i])).sum();
    let it = gini(ones, nt);
    let mut best: Option<Best> = None;
    for &f in feats {
        let mut order = members.to_vec();
        order.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(a.cmp(&b)));
        let mut left_ones = 0;
        for nl in 1..nt {
            left_ones += usize::from(y[order[nl - 1]]);
            let (lo, hi) = (x.get(order[nl - 1], f), x.get(order[nl], f));
            if nl < t_c || nt - nl < t_c || lo == hi {
                continue;
            }
            let nr = nt - nl;
            let d = it - nl as f64 / nt as f64 * gini(left_ones, nl) - nr as f64 / nt as f64 * gini(ones - left_ones, nr);
            let value = nt as f64 / (2.0 * n as f64) * d;
            if best.is_none_or(|b| strictly_better(value, b.value)) {
                best = Some(Best {
                    value,
                    feature: f,
                    threshold: midpoint(lo, hi),
                });
            }
        }
    }
    best
}

fn prefer(a: &Best, b: &Best) -> bool {
    if strictly_better(a.value, b.value) {
        return true;
    }
    if strictly_better(b.value, a.value) {
        return false;
    }
    (a.feature, a.threshold) < (b.feature, b.threshold)
}

enum Arena {
    Leaf(Vec<usize>),
    Split(usize, f64, usize, usize),
}

pub fn grow(x: &FeatureMatrix, y: &[u8], p: &TreeParams) -> OracleNode {
    let n = y.len();
    let ones: usize = y.iter().map(|&v| usize::from(v)).sum();
    // y'y / n for binary labels
    let floor = 1e-14 * (ones as f64 / n as f64).max(f64::MIN_POSITIVE);
    let mut arena = vec![Arena::Leaf((0..n).collect())];
    // arena ids of current leaves, in leaf-id order
    let mut leaves = vec![0usize];
    let max_leaves = p.max_leaves.unwrap_or(usize::MAX).max(1);
    while leaves.len() < max_leaves {
        let mut chosen: Option<(usize, Best)> = None;
        for (slot, &node) in leaves.iter().enumerate() {
            let Arena::Leaf(members) = &arena[node] else { unreachable!() };
            if members.len() < 2 * p.t_c {
                continue;
            }
            let feats = select_features(p.seed, node, x.n_cols(), p.m_try);
            let Some(c) = best_cut(x, y, members, &feats, p.t_c, n) else { continue };
            if c.value <= floor {
                continue;
            }
            let take = match &chosen {
                None => true,
                Some((cs, b)) => prefer(&c, b) || (!prefer(b, &c) && node < leaves[*cs]),
            };
            if take {
                chosen = Some((slot, c));
            }
        }
        let Some((slot, c)) = chosen else { break };
        let node = leaves[slot];
        let Arena::Leaf(members) = std::mem::replace(&mut arena[node], Arena::Leaf(Vec::new())) else {
            unreachable!()
        };
        let (l, r): (Vec<usize>, Vec<usize>) = members.iter().partition(|&&i| x.get(i, c.feature) <= c.threshold);
        let (li, ri) = (arena.len(), arena.len() + 1);
        arena[node] = Arena::Split(c.feature, c.threshold, li, ri);
        arena.push(Arena::Leaf(l));
        arena.push(Arena::Leaf(r));
        leaves[slot] = li;
        leaves.push(ri);
    }
    build(&arena, 0, y)
}

fn build(arena: &[Arena], id: usize, y: &[u8]) -> OracleNode {
    match &arena[id] {
        Arena::Leaf(m) => OracleNode::Leaf(m.iter().map(|&i| f64::from(y[i])).sum::<f64>() / m.len() as f64),
        &Arena::Split(feature, threshold, l, r) => OracleNode::Split {
            feature,
            threshold,
            left: Box::new(build(arena, l, y)),
            right: Box::new(build(arena, r, y)),
        },
    }
}

pub fn predict(node: &OracleNode, x: &[f64]) -> f64 {
    match node {
        OracleNode::Leaf(v) => *v,
        OracleNode::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            if x[*feature] <= *threshold {
                predict(left, x)
            } else {
                predict(right, x)
            }
        }
    }
}

/// Structure and cutoffs identical, leaf values within `tol`.
pub fn same_structure(tree: &rfgp::gls_tree::GlsTree, oracle: &OracleNode, tol: f64) -> bool {
    use rfgp::gls_tree::Node;
    fn walk(tree: &rfgp::gls_tree::GlsTree, id: usize, o: &OracleNode, tol: f64) -> bool {
        match (&tree.nodes()[id], o) {
            (Node::Leaf { leaf }, OracleNode::Leaf(v)) => (tree.leaf_values()[*leaf] - v).abs() < tol,
            (
                Node::Split { cut, left, right },
                OracleNode::Split {
                    feature,
                    threshold,
                    left: ol,
                    right: or,
                },
            ) => {
                cut.feature == *feature
                    && cut.threshold == *threshold
                    && walk(tree, *left, ol, tol)
                    && walk(tree, *right, or, tol)
            }
            _ => false,
        }
    }
    walk(tree, 0, oracle, tol)
}
