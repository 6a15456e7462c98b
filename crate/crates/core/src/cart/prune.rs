use super::{Node, RegressionTree};

/// Weakest-link pruning schedule of a tree.
///
/// Every internal node gets the alpha at which it turns into a leaf. The
/// subtree optimal for a given alpha keeps exactly the internal nodes whose
/// collapse alpha exceeds it.
#[derive(Debug, Clone)]
pub struct PrunePath<'a> {
    tree: &'a RegressionTree,
    collapse: Vec<f64>,
    alphas: Vec<f64>,
}

impl<'a> PrunePath<'a> {
    pub fn new(tree: &'a RegressionTree) -> Self {
        let nodes = tree.nodes();
        let m = nodes.len();
        let mut collapse = vec![f64::INFINITY; m];
        let mut alive: Vec<bool> = nodes.iter().map(|n| !n.is_leaf()).collect();
        let mut alphas = vec![0.0];
        // Parent-before-child order lets a reverse sweep aggregate subtrees.
        let order = preorder(nodes);
        let mut sub_sse = vec![0.0; m];
        let mut sub_leaves = vec![0usize; m];
        loop {
            for &i in order.iter().rev() {
                match nodes[i] {
                    Node::Split { left, right, .. } if alive[i] => {
                        sub_sse[i] = sub_sse[left] + sub_sse[right];
                        sub_leaves[i] = sub_leaves[left] + sub_leaves[right];
                    }
                    _ => {
                        sub_sse[i] = nodes[i].sse();
                        sub_leaves[i] = 1;
                    }
                }
            }
            let strength = |i: usize| (nodes[i].sse() - sub_sse[i]) / (sub_leaves[i] - 1) as f64;
            let live: Vec<usize> = order.iter().copied().filter(|&i| alive[i]).collect();
            if live.is_empty() {
                break;
            }
            let weakest = live.iter().map(|&i| strength(i)).fold(f64::INFINITY, f64::min);
            let alpha = weakest.max(0.0);
            let tol = 1e-10 * alpha.abs().max(f64::MIN_POSITIVE);
            let last = *alphas.last().expect("non-empty");
            let alpha = if alpha > last { alpha } else { last };
            if alpha > last {
                alphas.push(alpha);
            }
            for &i in &live {
                if strength(i) <= alpha + tol {
                    collapse_subtree(nodes, i, alpha, &mut alive, &mut collapse);
                }
            }
        }
        PrunePath {
            tree,
            collapse,
            alphas,
        }
    }

    /// Distinct alphas of the sequence, starting at 0.
    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// Alpha at which each node becomes a leaf (infinite for leaves).
    pub fn collapse_alphas(&self) -> &[f64] {
        &self.collapse
    }

    /// The node reached by `row` under pruning level `alpha`.
    #[inline]
    pub(crate) fn node_for(&self, cols: &[&[f64]], row: usize, alpha: f64) -> usize {
        let nodes = self.tree.nodes();
        let mut i = 0;
        loop {
            match nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } if self.collapse[i] > alpha => {
                    i = if cols[feature][row] < threshold { left } else { right }
                }
                _ => return i,
            }
        }
    }

    /// Materialize the optimal subtree for `alpha`.
    pub fn subtree(&self, alpha: f64) -> RegressionTree {
        let nodes = self.tree.nodes();
        let mut out = Vec::new();
        let mut stack = vec![(0usize, usize::MAX, false)];
        // Iterative copy: (source node, parent slot in `out`, is right child).
        while let Some((src, parent, is_right)) = stack.pop() {
            let id = out.len();
            if parent != usize::MAX {
                if let Node::Split { left, right, .. } = &mut out[parent] {
                    if is_right {
                        *right = id;
                    } else {
                        *left = id;
                    }
                }
            }
            match nodes[src] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    mean,
                    n,
                    sse,
                } if self.collapse[src] > alpha => {
                    out.push(Node::Split {
                        feature,
                        threshold,
                        left: usize::MAX,
                        right: usize::MAX,
                        mean,
                        n,
                        sse,
                    });
                    stack.push((right, id, true));
                    stack.push((left, id, false));
                }
                ref other => out.push(Node::Leaf {
                    mean: other.mean(),
                    n: other.n(),
                    sse: other.sse(),
                }),
            }
        }
        RegressionTree::from_parts(self.tree.features().to_vec(), out, alpha)
    }
}

fn preorder(nodes: &[Node]) -> Vec<usize> {
    let mut order = Vec::with_capacity(nodes.len());
    let mut stack = vec![0];
    while let Some(i) = stack.pop() {
        order.push(i);
        if let Node::Split { left, right, .. } = nodes[i] {
            stack.push(right);
            stack.push(left);
        }
    }
    order
}

fn collapse_subtree(nodes: &[Node], root: usize, alpha: f64, alive: &mut [bool], collapse: &mut [f64]) {
    let mut stack = vec![root];
    while let Some(i) = stack.pop() {
        if let Node::Split { left, right, .. } = nodes[i] {
            if alive[i] {
                alive[i] = false;
                collapse[i] = alpha;
                stack.push(left);
                stack.push(right);
            }
        }
    }
}
