//! Greedy binary regression trees.
//!
//! Trees are grown by exhaustive search over every column and every midpoint
//! between consecutive distinct values, minimizing the sum of squared errors
//! (SSE). Growth is best-first so a cap on the number of splits keeps the most
//! valuable ones; without a cap the result is the same tree a depth-first
//! recursion would produce.

mod cv;
mod grow;
mod prune;
mod serde_tree;

pub use cv::{fit_cv, CvControls, CvFit};
pub(crate) use cv::fold_labels;
pub(crate) use grow::grow_nodes;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Predictor;
use crate::table::FeatureTable;

/// Stopping rules for tree growth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeControls {
    /// Nodes with fewer rows are not split.
    pub min_split: usize,
    /// Minimum rows in each child of a split.
    pub min_leaf: usize,
    /// A split must reduce SSE by at least `cp` times the root SSE.
    pub cp: f64,
    /// Upper bound on the number of internal nodes.
    pub max_splits: Option<usize>,
}

impl Default for TreeControls {
    fn default() -> Self {
        TreeControls {
            min_split: 20,
            min_leaf: 7,
            cp: 0.01,
            max_splits: None,
        }
    }
}

impl TreeControls {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.min_leaf == 0 {
            return Err(Error::config("min_leaf must be at least 1"));
        }
        if !(self.cp.is_finite() && self.cp >= 0.0) {
            return Err(Error::config(format!("cp must be finite and >= 0, got {}", self.cp)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        mean: f64,
        n: usize,
        sse: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        mean: f64,
        n: usize,
        sse: f64,
    },
}

impl Node {
    pub fn mean(&self) -> f64 {
        match *self {
            Node::Leaf { mean, .. } | Node::Split { mean, .. } => mean,
        }
    }

    pub fn n(&self) -> usize {
        match *self {
            Node::Leaf { n, .. } | Node::Split { n, .. } => n,
        }
    }

    pub fn sse(&self) -> f64 {
        match *self {
            Node::Leaf { sse, .. } | Node::Split { sse, .. } => sse,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Node::Leaf { .. })
    }
}

/// A fitted tree. Node 0 is the root; rows with `value < threshold` go left.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    features: Vec<String>,
    nodes: Vec<Node>,
    cp: f64,
}

impl RegressionTree {
    pub(crate) fn from_parts(features: Vec<String>, nodes: Vec<Node>, cp: f64) -> Self {
        RegressionTree { features, nodes, cp }
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Complexity parameter (or pruning alpha) this tree was produced with.
    pub fn cp(&self) -> f64 {
        self.cp
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn n_splits(&self) -> usize {
        self.nodes.len() - self.n_leaves()
    }

    /// Total training SSE over the leaves.
    pub fn leaf_sse(&self) -> f64 {
        self.nodes.iter().filter(|n| n.is_leaf()).map(Node::sse).sum()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Names of the columns used by at least one split, in feature order.
    pub fn used_features(&self) -> Vec<String> {
        let mut used = vec![false; self.features.len()];
        for n in &self.nodes {
            if let Node::Split { feature, .. } = n {
                used[*feature] = true;
            }
        }
        self.features
            .iter()
            .zip(used)
            .filter(|(_, u)| *u)
            .map(|(f, _)| f.clone())
            .collect()
    }

    /// Column indices in `table` for every feature the tree splits on.
    /// Unused features map to `usize::MAX` and need not be present.
    pub(crate) fn bind(&self, table: &FeatureTable) -> Result<Vec<usize>> {
        let mut used = vec![false; self.features.len()];
        for n in &self.nodes {
            if let Node::Split { feature, .. } = n {
                used[*feature] = true;
            }
        }
        self.features
            .iter()
            .zip(used)
            .map(|(f, u)| {
                if !u {
                    return Ok(usize::MAX);
                }
                table
                    .column_index(f)
                    .ok_or_else(|| Error::input(format!("missing split column '{f}'")))
            })
            .collect()
    }

    #[inline]
    pub(crate) fn leaf_for(&self, cols: &[&[f64]], row: usize) -> usize {
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
                } => i = if cols[feature][row] < threshold { left } else { right },
            }
        }
    }

    /// Node ids visited by `row` of `table`, root first.
    pub fn decision_path(&self, table: &FeatureTable, row: usize) -> Result<Vec<usize>> {
        let map = self.bind(table)?;
        let mut path = vec![0];
        let mut i = 0;
        while let Node::Split {
            feature,
            threshold,
            left,
            right,
            ..
        } = self.nodes[i]
        {
            i = if table.values(map[feature])[row] < threshold { left } else { right };
            path.push(i);
        }
        Ok(path)
    }

    pub(crate) fn bound_columns<'a>(&self, table: &'a FeatureTable) -> Result<Vec<&'a [f64]>> {
        let map = self.bind(table)?;
        Ok(map
            .iter()
            .map(|&j| if j == usize::MAX { &[][..] } else { table.values(j) })
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&serde_tree::TreeJson::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: serde_tree::TreeJson = serde_json::from_str(s)?;
        j.try_into()
    }
}

impl Predictor for RegressionTree {
    fn predict(&self, table: &FeatureTable) -> Result<Vec<f64>> {
        let cols = self.bound_columns(table)?;
        Ok((0..table.n_rows())
            .map(|r| self.nodes[self.leaf_for(&cols, r)].mean())
            .collect())
    }
}

impl Serialize for RegressionTree {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        serde_tree::TreeJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for RegressionTree {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = serde_tree::TreeJson::deserialize(d)?;
        j.try_into().map_err(serde::de::Error::custom)
    }
}

/// Grow a regression tree on every column of `train`.
pub fn grow(train: &FeatureTable, controls: &TreeControls) -> Result<RegressionTree> {
    controls.validate()?;
    let y = train.require_outcome()?;
    if train.n_rows() == 0 {
        return Err(Error::input("cannot grow a tree on an empty table"));
    }
    let cols: Vec<&[f64]> = (0..train.n_cols()).map(|j| train.values(j)).collect();
    let nodes = grow_nodes(&cols, y, (0..train.n_rows()).collect(), controls, None);
    Ok(RegressionTree::from_parts(train.names(), nodes, controls.cp))
}

pub use prune::PrunePath;

impl RegressionTree {
    /// Weakest-link cost-complexity pruning sequence: `(alpha, subtree)`
    /// pairs with strictly increasing alpha, each subtree nested in the
    /// previous one and ending with the root leaf.
    pub fn prune_path(&self) -> Vec<(f64, RegressionTree)> {
        let path = PrunePath::new(self);
        path.alphas()
            .iter()
            .map(|&a| (a, path.subtree(a)))
            .collect()
    }
}
