//! Regression trees grown with a global GLS loss.
//!
//! Each candidate split adds one column to the leaf-membership design `Z`;
//! its criterion is the drop in the quadratic loss
//! `(Y - Z b)^T Q (Y - Z b)` after refitting `b = (Z^T Q Z)^-1 Z^T Q Y` over
//! all leaves, divided by `n`. With `Q = I` this is the CART variance
//! reduction, which for binary labels is half the Gini decrease.

mod criteria;
mod gls;
mod grow;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub use criteria::{classification_split_criterion, gini_impurity, regression_split_criterion};
pub use gls::{gls_beta, gls_beta_with, gls_split_criterion, leaf_value_bound, GlsSystem};
pub use grow::{grow_tree, grow_tree_with};

/// Split direction and cutoff; rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    pub feature: usize,
    pub threshold: f64,
}

impl Cut {
    pub fn new(feature: usize, threshold: f64) -> Self {
        Self { feature, threshold }
    }
}

/// Leaf assignment of each in-bag sample.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipMatrix {
    assignment: Vec<usize>,
    leaf_count: usize,
}

impl MembershipMatrix {
    pub fn new(assignment: Vec<usize>, leaf_count: usize) -> Result<Self> {
        let mut seen = vec![false; leaf_count];
        for &a in &assignment {
            if a >= leaf_count {
                return Err(Error::InvalidParameter(format!("leaf id {a} >= leaf count {leaf_count}")));
            }
            seen[a] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::EmptyNode);
        }
        Ok(Self {
            assignment,
            leaf_count,
        })
    }

    pub fn single_leaf(n: usize) -> Self {
        Self {
            assignment: vec![0; n],
            leaf_count: 1,
        }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_count
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitEvaluation {
    pub cut: Cut,
    pub criterion_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    /// Minimum in-bag samples per leaf.
    pub t_c: usize,
    /// Covariates examined per node.
    pub m_try: usize,
    /// Leaf cap; `None` means growth is limited by `t_c` only.
    pub max_leaves: Option<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Split { cut: Cut, left: usize, right: usize },
    Leaf { leaf: usize },
}

/// A fitted tree. `nodes[0]` is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "TreeJson", try_from = "TreeJson")]
pub struct GlsTree {
    nodes: Vec<Node>,
    leaf_values: Vec<f64>,
    subsample: Vec<usize>,
    seed: u64,
}

impl GlsTree {
    /// Nodes are stored in pre-order regardless of the growth order.
    pub(crate) fn from_parts(nodes: Vec<Node>, leaf_values: Vec<f64>, seed: u64) -> Self {
        Self {
            nodes: preorder(&nodes),
            leaf_values,
            subsample: Vec::new(),
            seed,
        }
    }

    pub fn with_subsample(mut self, subsample: Vec<usize>) -> Self {
        self.subsample = subsample;
        self
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaf_values(&self) -> &[f64] {
        &self.leaf_values
    }

    pub fn n_leaves(&self) -> usize {
        self.leaf_values.len()
    }

    pub fn subsample(&self) -> &[usize] {
        &self.subsample
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Cuts in the order they were made (node-arena order).
    pub fn cuts(&self) -> Vec<Cut> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { cut, .. } => Some(*cut),
                Node::Leaf { .. } => None,
            })
            .collect()
    }

    pub fn leaf_of(&self, x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { leaf } => return leaf,
                Node::Split { cut, left, right } => {
                    at = if x[cut.feature] <= cut.threshold { left } else { right };
                }
            }
        }
    }
}

/// Value of the leaf containing `x`.
pub fn predict_tree(tree: &GlsTree, x: &[f64]) -> f64 {
    tree.leaf_values[tree.leaf_of(x)]
}

/// Default number of covariates tried per split: `max(1, floor(D / 3))`.
pub fn default_m_try(n_features: usize) -> usize {
    (n_features / 3).max(1)
}

/// Covariates examined at node `node_id` of the tree seeded with `tree_seed`,
/// ascending.
pub fn select_features(tree_seed: u64, node_id: usize, n_features: usize, m_try: usize) -> Vec<usize> {
    let m = m_try.clamp(1, n_features);
    if m == n_features {
        return (0..n_features).collect();
    }
    let mut rng = seed::rng(seed::derive(tree_seed, node_id as u64));
    let mut f = index::sample(&mut rng, n_features, m).into_vec();
    f.sort_unstable();
    f
}

/// Relative tolerance under which two criterion values count as tied.
pub const TIE_TOLERANCE: f64 = 1e-10;

/// `true` when `a` beats `b` by more than the tie tolerance.
#[inline]
pub fn strictly_better(a: f64, b: f64) -> bool {
    a - b > TIE_TOLERANCE * a.abs().max(b.abs())
}

fn preorder(nodes: &[Node]) -> Vec<Node> {
    let mut out = Vec::with_capacity(nodes.len());
    // (source id, parent in `out`, is right child)
    let mut stack = vec![(0usize, usize::MAX, false)];
    while let Some((src, parent, is_right)) = stack.pop() {
        let id = out.len();
        if let Some(Node::Split { left, right, .. }) = out.get_mut(parent) {
            if is_right {
                *right = id;
            } else {
                *left = id;
            }
        }
        out.push(nodes[src]);
        if let Node::Split { left, right, .. } = nodes[src] {
            stack.push((right, id, true));
            stack.push((left, id, false));
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum NodeJson {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<NodeJson>,
        right: Box<NodeJson>,
    },
    Leaf {
        leaf: usize,
        value: f64,
    },
}

#[derive(Serialize, Deserialize)]
struct TreeJson {
    seed: u64,
    subsample: Vec<usize>,
    root: NodeJson,
}

impl From<GlsTree> for TreeJson {
    fn from(t: GlsTree) -> Self {
        fn build(t: &GlsTree, at: usize) -> NodeJson {
            match t.nodes[at] {
                Node::Leaf { leaf } => NodeJson::Leaf {
                    leaf,
                    value: t.leaf_values[leaf],
                },
                Node::Split { cut, left, right } => NodeJson::Split {
                    feature: cut.feature,
                    threshold: cut.threshold,
                    left: Box::new(build(t, left)),
                    right: Box::new(build(t, right)),
                },
            }
        }
        TreeJson {
            seed: t.seed,
            root: build(&t, 0),
            subsample: t.subsample,
        }
    }
}

impl TryFrom<TreeJson> for GlsTree {
    type Error = Error;
    fn try_from(j: TreeJson) -> Result<Self> {
        // pre-order arena; prediction only needs valid child links
        let mut nodes = Vec::new();
        let mut values: Vec<Option<f64>> = Vec::new();
        let mut stack = vec![(j.root, usize::MAX, false)];
        while let Some((n, parent, is_right)) = stack.pop() {
            let id = nodes.len();
            if parent != usize::MAX {
                if let Node::Split { left, right, .. } = &mut nodes[parent] {
                    if is_right {
                        *right = id;
                    } else {
                        *left = id;
                    }
                }
            }
            match n {
                NodeJson::Leaf { leaf, value } => {
                    if leaf >= values.len() {
                        values.resize(leaf + 1, None);
                    }
                    if values[leaf].replace(value).is_some() || !value.is_finite() {
                        return Err(Error::InvalidParameter(format!("bad leaf {leaf} in tree json")));
                    }
                    nodes.push(Node::Leaf { leaf });
                }
                NodeJson::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    nodes.push(Node::Split {
                        cut: Cut::new(feature, threshold),
                        left: 0,
                        right: 0,
                    });
                    stack.push((*right, id, true));
                    stack.push((*left, id, false));
                }
            }
        }
        let leaf_values = values
            .into_iter()
            .map(|v| v.ok_or_else(|| Error::InvalidParameter("missing leaf id in tree json".into())))
            .collect::<Result<_>>()?;
        Ok(GlsTree {
            nodes,
            leaf_values,
            subsample: j.subsample,
            seed: j.seed,
        })
    }
}
