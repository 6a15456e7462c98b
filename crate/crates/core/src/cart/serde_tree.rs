//! Nested JSON form of a tree: `{column, threshold, left, right}` for splits
//! and `{mean, n}` for leaves (plus node statistics).

use serde::{Deserialize, Serialize};

use super::{Node, RegressionTree};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
pub(crate) struct TreeJson {
    features: Vec<String>,
    cp: f64,
    root: NodeJson,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum NodeJson {
    Split {
        column: String,
        threshold: f64,
        left: Box<NodeJson>,
        right: Box<NodeJson>,
        mean: f64,
        n: usize,
        sse: f64,
    },
    Leaf {
        mean: f64,
        n: usize,
        sse: f64,
    },
}

impl From<&RegressionTree> for TreeJson {
    fn from(t: &RegressionTree) -> Self {
        fn build(t: &RegressionTree, i: usize) -> NodeJson {
            match t.nodes()[i] {
                Node::Leaf { mean, n, sse } => NodeJson::Leaf { mean, n, sse },
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    mean,
                    n,
                    sse,
                } => NodeJson::Split {
                    column: t.features()[feature].clone(),
                    threshold,
                    left: Box::new(build(t, left)),
                    right: Box::new(build(t, right)),
                    mean,
                    n,
                    sse,
                },
            }
        }
        TreeJson {
            features: t.features().to_vec(),
            cp: t.cp(),
            root: build(t, 0),
        }
    }
}

impl TryFrom<TreeJson> for RegressionTree {
    type Error = Error;

    fn try_from(j: TreeJson) -> Result<Self> {
        fn flatten(features: &[String], node: NodeJson, out: &mut Vec<Node>) -> Result<usize> {
            let id = out.len();
            match node {
                NodeJson::Leaf { mean, n, sse } => out.push(Node::Leaf { mean, n, sse }),
                NodeJson::Split {
                    column,
                    threshold,
                    left,
                    right,
                    mean,
                    n,
                    sse,
                } => {
                    let feature = features
                        .iter()
                        .position(|f| *f == column)
                        .ok_or_else(|| Error::input(format!("tree json: unknown column '{column}'")))?;
                    out.push(Node::Leaf { mean, n, sse });
                    let l = flatten(features, *left, out)?;
                    let r = flatten(features, *right, out)?;
                    out[id] = Node::Split {
                        feature,
                        threshold,
                        left: l,
                        right: r,
                        mean,
                        n,
                        sse,
                    };
                }
            }
            Ok(id)
        }
        let mut nodes = Vec::new();
        flatten(&j.features, j.root, &mut nodes)?;
        Ok(RegressionTree::from_parts(j.features, nodes, j.cp))
    }
}
