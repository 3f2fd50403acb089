//! Least-squares regression trees.
//!
//! A node is split on the (feature, threshold) pair with the largest drop
//! in the sum of squared errors, searched exhaustively over the midpoints
//! between consecutive distinct values of each candidate feature. Nodes
//! holding fewer than `min_node_size` training rows become leaves.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const TREE_FORMAT: &str = "powerforest-tree";
pub const TREE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitDecision {
    pub feature: usize,
    /// Rows with `value <= threshold` go left.
    pub threshold: f64,
    pub sse_reduction: f64,
    pub left_count: usize,
    pub right_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        prediction: f64,
        count: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        sse_reduction: f64,
        count: usize,
        left: usize,
        right: usize,
    },
}

impl Node {
    pub fn count(&self) -> usize {
        match *self {
            Node::Leaf { count, .. } | Node::Split { count, .. } => count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    /// Smallest node that may still be split.
    pub min_node_size: usize,
    /// Candidate features drawn (without replacement) at each split.
    pub features_per_split: usize,
    pub max_depth: Option<usize>,
}

impl TreeParams {
    /// Pure least-squares tree: every feature is a candidate at every node.
    pub fn exhaustive(min_node_size: usize, n_features: usize) -> Self {
        TreeParams {
            min_node_size,
            features_per_split: n_features,
            max_depth: None,
        }
    }

    fn validate(&self, n_features: usize) -> Result<()> {
        if self.min_node_size < 2 {
            return Err(Error::InvalidInput(format!(
                "min node size must be at least 2, got {}",
                self.min_node_size
            )));
        }
        if self.features_per_split == 0 || self.features_per_split > n_features {
            return Err(Error::InvalidInput(format!(
                "features per split must be in 1..={n_features}, got {}",
                self.features_per_split
            )));
        }
        Ok(())
    }
}

/// A fitted tree stored as a flat node list; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    n_features: usize,
    nodes: Vec<Node>,
    /// Summed SSE reduction of the splits on each feature.
    importance: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TreeDocument {
    format: String,
    version: u32,
    #[serde(flatten)]
    tree: RegressionTree,
}

impl RegressionTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn importance(&self) -> &[f64] {
        &self.importance
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::InvalidInput(format!(
                "expected {} features, got {}",
                self.n_features,
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite feature value".into()));
        }
        Ok(self.predict_unchecked(x))
    }

    #[inline]
    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(x)] {
            Node::Leaf { prediction, .. } => prediction,
            Node::Split { .. } => unreachable!(),
        }
    }

    /// Index of the leaf that `x` falls into.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = TreeDocument {
            format: TREE_FORMAT.into(),
            version: TREE_FORMAT_VERSION,
            tree: self.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TreeDocument = serde_json::from_str(text)?;
        if doc.format != TREE_FORMAT || doc.version != TREE_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported tree format {} v{}",
                doc.format, doc.version
            )));
        }
        doc.tree.validate()?;
        Ok(doc.tree)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(format!("malformed tree: {m}")));
        if self.nodes.is_empty() {
            return bad("no nodes".into());
        }
        if self.importance.len() != self.n_features {
            return bad("importance length".into());
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if let Node::Split {
                feature,
                left,
                right,
                ..
            } = *node
            {
                if feature >= self.n_features {
                    return bad(format!("node {i} splits on feature {feature}"));
                }
                if left <= i || right <= i || left >= self.nodes.len() || right >= self.nodes.len()
                {
                    return bad(format!("node {i} has invalid children"));
                }
            }
        }
        Ok(())
    }
}

/// Best split of all rows of `x` over the candidate features.
///
/// Returns `None` when no split lowers the SSE. Ties go to the lowest
/// feature index, then the lowest threshold.
pub fn best_split(x: &Matrix, y: &[f64], candidate_features: &[usize]) -> Option<SplitDecision> {
    if y.len() < 2 || x.rows() != y.len() {
        return None;
    }
    let mut features: Vec<usize> = candidate_features
        .iter()
        .copied()
        .filter(|&f| f < x.cols())
        .collect();
    features.sort_unstable();
    features.dedup();
    let rows: Vec<usize> = (0..y.len()).collect();
    let mut scratch = Vec::with_capacity(rows.len());
    best_split_rows(x, y, &rows, &features, &mut scratch)
}

/// `features` must be sorted ascending.
fn best_split_rows(
    x: &Matrix,
    y: &[f64],
    rows: &[usize],
    features: &[usize],
    scratch: &mut Vec<(f64, f64)>,
) -> Option<SplitDecision> {
    let n = rows.len();
    if n < 2 {
        return None;
    }
    let first = y[rows[0]];
    if rows.iter().all(|&r| y[r] == first) {
        return None;
    }
    let mean = rows.iter().map(|&r| y[r]).sum::<f64>() / n as f64;
    let nf = n as f64;

    let mut best: Option<SplitDecision> = None;
    for &f in features {
        scratch.clear();
        scratch.extend(rows.iter().map(|&r| (x.get(r, f), y[r] - mean)));
        scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        if scratch[0].0 == scratch[n - 1].0 {
            continue;
        }
        let total: f64 = scratch.iter().map(|p| p.1).sum();
        let mut left_sum = 0.0;
        for i in 0..n - 1 {
            left_sum += scratch[i].1;
            let (lo, hi) = (scratch[i].0, scratch[i + 1].0);
            if lo == hi {
                continue;
            }
            let nl = (i + 1) as f64;
            let nr = nf - nl;
            let gap = left_sum / nl - (total - left_sum) / nr;
            let reduction = nl * nr / nf * gap * gap;
            // identical partitions reached through different features differ only by
            // rounding; those count as ties
            if reduction > 0.0
                && best.is_none_or(|b| reduction > b.sse_reduction * (1.0 + TIE_TOLERANCE))
            {
                best = Some(SplitDecision {
                    feature: f,
                    threshold: midpoint(lo, hi),
                    sse_reduction: reduction,
                    left_count: i + 1,
                    right_count: n - i - 1,
                });
            }
        }
    }
    best
}

const TIE_TOLERANCE: f64 = 1e-12;

fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = (lo + hi) / 2.0;
    let m = if m.is_finite() {
        m
    } else {
        lo / 2.0 + hi / 2.0
    };
    // adjacent floats: keep `hi` on the right
    if m >= hi {
        lo
    } else {
        m
    }
}

/// Grows a tree on all rows of `x`.
pub fn fit_tree(x: &Matrix, y: &[f64], params: &TreeParams, seed: u64) -> Result<RegressionTree> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<usize> = (0..y.len()).collect();
    fit_tree_rows(x, y, &mut rows, params, &mut rng)
}

/// Grows a tree on the listed rows, which may repeat (bootstrap samples).
pub(crate) fn fit_tree_rows<R: Rng>(
    x: &Matrix,
    y: &[f64],
    rows: &mut [usize],
    params: &TreeParams,
    rng: &mut R,
) -> Result<RegressionTree> {
    if rows.is_empty() || y.is_empty() {
        return Err(Error::InvalidInput(
            "cannot fit a tree on empty input".into(),
        ));
    }
    if x.rows() != y.len() {
        return Err(Error::InvalidInput(format!(
            "{} feature rows for {} targets",
            x.rows(),
            y.len()
        )));
    }
    params.validate(x.cols())?;
    let mut grower = Grower {
        x,
        y,
        params,
        all_features: (0..x.cols()).collect(),
        scratch: Vec::with_capacity(rows.len()),
        nodes: Vec::new(),
        importance: vec![0.0; x.cols()],
    };
    grower.grow(rows, 0, rng);
    Ok(RegressionTree {
        n_features: x.cols(),
        nodes: grower.nodes,
        importance: grower.importance,
    })
}

struct Grower<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    params: &'a TreeParams,
    all_features: Vec<usize>,
    scratch: Vec<(f64, f64)>,
    nodes: Vec<Node>,
    importance: Vec<f64>,
}

impl Grower<'_> {
    fn grow<R: Rng>(&mut self, rows: &mut [usize], depth: usize, rng: &mut R) -> usize {
        let id = self.nodes.len();
        let count = rows.len();
        let leaf = Node::Leaf {
            prediction: rows.iter().map(|&r| self.y[r]).sum::<f64>() / count as f64,
            count,
        };
        self.nodes.push(leaf);

        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        if count < self.params.min_node_size || !depth_ok {
            return id;
        }
        let split = if self.params.features_per_split >= self.x.cols() {
            best_split_rows(self.x, self.y, rows, &self.all_features, &mut self.scratch)
        } else {
            let mut feats =
                index::sample(rng, self.x.cols(), self.params.features_per_split).into_vec();
            feats.sort_unstable();
            best_split_rows(self.x, self.y, rows, &feats, &mut self.scratch)
        };
        let Some(split) = split else {
            return id;
        };

        let mid = partition(rows, |r| self.x.get(r, split.feature) <= split.threshold);
        debug_assert_eq!(mid, split.left_count);
        self.importance[split.feature] += split.sse_reduction;
        let (l_rows, r_rows) = rows.split_at_mut(mid);
        let left = self.grow(l_rows, depth + 1, rng);
        let right = self.grow(r_rows, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            sse_reduction: split.sse_reduction,
            count,
            left,
            right,
        };
        id
    }
}

/// Stable partition; returns the number of rows satisfying `pred`.
fn partition(rows: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let (mut left, right): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| pred(r));
    let mid = left.len();
    left.extend(right);
    rows.copy_from_slice(&left);
    mid
}
