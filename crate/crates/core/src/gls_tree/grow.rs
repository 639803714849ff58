use super::gls::{GlsSystem, ScanScratch};
use super::{select_features, strictly_better, Cut, GlsTree, Node, TreeParams};
use crate::error::{Error, Result};
use crate::nngp::{PrecisionMatrix, SparseCholeskyFactor};
use crate::spatial::FeatureMatrix;

#[derive(Debug, Clone, Copy)]
struct Candidate {
    criterion: f64,
    cut: Cut,
    n_left: usize,
    order_slot: usize,
}

struct SortedFeature {
    feature: usize,
    order: Vec<usize>,
    values: Vec<f64>,
}

struct LeafState {
    node: usize,
    members: usize,
    sorted: Vec<SortedFeature>,
    best: Option<Candidate>,
    fresh: bool,
}

impl LeafState {
    fn new(node: usize, members: Vec<usize>, x: &FeatureMatrix, params: &TreeParams, splittable: bool) -> Self {
        let count = members.len();
        let sorted = if splittable {
            select_features(params.seed, node, x.n_cols(), params.m_try)
                .into_iter()
                .map(|f| {
                    let mut order = members.clone();
                    order.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(a.cmp(&b)));
                    let values = order.iter().map(|&i| x.get(i, f)).collect();
                    SortedFeature {
                        feature: f,
                        order,
                        values,
                    }
                })
                .collect()
        } else {
            // keep membership for the split bookkeeping only
            vec![SortedFeature {
                feature: usize::MAX,
                order: members,
                values: Vec::new(),
            }]
        };
        Self {
            node,
            members: count,
            sorted,
            best: None,
            fresh: true,
        }
    }

    fn member_list(&self) -> &[usize] {
        &self.sorted[0].order
    }
}

/// `a` preferred over `b`: larger criterion, ties to smaller covariate index
/// then smaller cutoff.
fn prefer(a: &Candidate, b: &Candidate) -> bool {
    if strictly_better(a.criterion, b.criterion) {
        return true;
    }
    if strictly_better(b.criterion, a.criterion) {
        return false;
    }
    (a.cut.feature, a.cut.threshold) < (b.cut.feature, b.cut.threshold)
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = 0.5 * (lo + hi);
    if m < hi {
        m
    } else {
        lo
    }
}

fn best_cut(sys: &GlsSystem<'_>, leaf: &LeafState, t_c: usize, n: f64, scratch: &mut ScanScratch) -> Option<Candidate> {
    let mut best: Option<Candidate> = None;
    for (slot, sf) in leaf.sorted.iter().enumerate() {
        sys.scan(&sf.order, &sf.values, t_c, scratch, |n_left, gain| {
            let c = Candidate {
                criterion: gain / n,
                cut: Cut::new(sf.feature, midpoint(sf.values[n_left - 1], sf.values[n_left])),
                n_left,
                order_slot: slot,
            };
            if best.as_ref().is_none_or(|b| strictly_better(c.criterion, b.criterion)) {
                best = Some(c);
            }
        });
    }
    best
}

/// Grows a tree from a factor of the working precision.
pub fn grow_tree(x: &FeatureMatrix, y: &[f64], factor: &SparseCholeskyFactor, params: &TreeParams) -> Result<GlsTree> {
    grow_tree_with(x, y, &PrecisionMatrix::from_factor(factor), params)
}

/// Best-first growth: each step splits the leaf whose best admissible cut
/// has the largest GLS criterion, then refits the whole system.
pub fn grow_tree_with(x: &FeatureMatrix, y: &[f64], q: &PrecisionMatrix, params: &TreeParams) -> Result<GlsTree> {
    let n = y.len();
    Error::check_len(n, x.n_rows())?;
    Error::check_len(n, q.n())?;
    if params.t_c == 0 || params.m_try == 0 {
        return Err(Error::InvalidParameter("t_c and m_try must be >= 1".into()));
    }
    if n < 2 * params.t_c {
        return Err(Error::TooFewSamples {
            needed: 2 * params.t_c,
            available: n,
        });
    }
    let t_c = params.t_c;
    let max_leaves = params.max_leaves.unwrap_or(usize::MAX).max(1);
    let nf = n as f64;
    // criteria at or below this count as zero
    let floor = 1e-14 * (q.quad_form(y) / nf).max(f64::MIN_POSITIVE);
    let reuse_cached = q.is_identity();

    let mut nodes = vec![Node::Leaf { leaf: 0 }];
    let mut assignment = vec![0usize; n];
    let mut leaves = vec![LeafState::new(0, (0..n).collect(), x, params, true)];
    let mut scratch = ScanScratch::default();

    while leaves.len() < max_leaves {
        let sys = GlsSystem::new(q, &assignment, leaves.len(), y)?;
        for leaf in leaves.iter_mut() {
            if leaf.members < 2 * t_c {
                leaf.best = None;
            } else if leaf.fresh || !reuse_cached {
                leaf.best = best_cut(&sys, leaf, t_c, nf, &mut scratch);
            }
            leaf.fresh = false;
        }
        let mut chosen: Option<(usize, Candidate)> = None;
        for (id, leaf) in leaves.iter().enumerate() {
            let Some(c) = leaf.best else { continue };
            if c.criterion <= floor {
                continue;
            }
            let take = match &chosen {
                None => true,
                Some((cid, b)) => prefer(&c, b) || (!prefer(b, &c) && leaf.node < leaves[*cid].node),
            };
            if take {
                chosen = Some((id, c));
            }
        }
        let Some((id, c)) = chosen else { break };

        let order = &leaves[id].sorted[c.order_slot].order;
        let left: Vec<usize> = order[..c.n_left].to_vec();
        let right: Vec<usize> = order[c.n_left..].to_vec();
        debug_assert!({
            let direct = sys.split_gain(&left) / nf;
            (direct - c.criterion).abs() <= 1e-8 * direct.abs().max(1e-300)
        });
        let new_id = leaves.len();
        for &i in &right {
            assignment[i] = new_id;
        }
        let (l_node, r_node) = (nodes.len(), nodes.len() + 1);
        nodes[leaves[id].node] = Node::Split {
            cut: c.cut,
            left: l_node,
            right: r_node,
        };
        nodes.push(Node::Leaf { leaf: id });
        nodes.push(Node::Leaf { leaf: new_id });
        let l_split = left.len() >= 2 * t_c;
        let r_split = right.len() >= 2 * t_c;
        leaves[id] = LeafState::new(l_node, left, x, params, l_split);
        leaves.push(LeafState::new(r_node, right, x, params, r_split));
    }

    let sys = GlsSystem::new(q, &assignment, leaves.len(), y)?;
    debug_assert!(leaves.iter().all(|l| !l.member_list().is_empty()));
    Ok(GlsTree::from_parts(nodes, sys.beta().to_vec(), params.seed))
}
