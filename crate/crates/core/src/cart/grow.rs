use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::seq::index;

use super::{Node, TreeControls};
use crate::seed::Rng;

#[derive(Debug, Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct Frontier {
    gain: f64,
    node: usize,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Frontier {}
impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Frontier {
    // Largest gain first; among equal gains the older node.
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.node.cmp(&self.node))
    }
}

const TIE_TOL: f64 = 1e-12;

/// Mean and SSE of `y` over `rows`, summing in row order.
pub(crate) fn node_stats(y: &[f64], rows: &[usize]) -> (f64, f64) {
    let n = rows.len() as f64;
    let mean = rows.iter().map(|&r| y[r]).sum::<f64>() / n;
    let sse = rows.iter().map(|&r| (y[r] - mean) * (y[r] - mean)).sum();
    (mean, sse)
}

struct Grower<'a> {
    cols: &'a [&'a [f64]],
    y: &'a [f64],
    controls: &'a TreeControls,
    sampler: Option<(&'a mut Rng, usize)>,
    buf: Vec<(f64, f64)>,
    min_gain: f64,
}

impl Grower<'_> {
    fn candidate_columns(&mut self) -> Vec<usize> {
        let p = self.cols.len();
        match self.sampler.as_mut() {
            Some((rng, mtry)) => {
                let mut c = index::sample(*rng, p, (*mtry).min(p)).into_vec();
                c.sort_unstable();
                c
            }
            None => (0..p).collect(),
        }
    }

    fn best_split(&mut self, rows: &[usize], mean: f64, sse: f64) -> Option<Candidate> {
        let min_leaf = self.controls.min_leaf;
        if rows.len() < self.controls.min_split || rows.len() < 2 * min_leaf || sse <= 0.0 {
            return None;
        }
        let features = self.candidate_columns();
        let n = rows.len();
        let total: f64 = rows.iter().map(|&r| self.y[r] - mean).sum();
        let base = total * total / n as f64;
        let mut best: Option<Candidate> = None;
        for f in features {
            let x = self.cols[f];
            self.buf.clear();
            self.buf.extend(rows.iter().map(|&r| (x[r], self.y[r] - mean)));
            self.buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = 0.0;
            for i in 0..n - 1 {
                left += self.buf[i].1;
                let nl = i + 1;
                let (lo, hi) = (self.buf[i].0, self.buf[i + 1].0);
                if nl < min_leaf {
                    continue;
                }
                if n - nl < min_leaf {
                    break;
                }
                if lo == hi {
                    continue;
                }
                let right = total - left;
                let gain = left * left / nl as f64 + right * right / (n - nl) as f64 - base;
                // Equal partitions reached through different columns must
                // tie regardless of summation order: first column wins.
                if best.is_none_or(|b| gain > b.gain + TIE_TOL * b.gain.abs().max(sse)) {
                    let mut threshold = 0.5 * (lo + hi);
                    if threshold <= lo {
                        threshold = hi;
                    }
                    best = Some(Candidate {
                        feature: f,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best.filter(|b| b.gain > 0.0 && b.gain >= self.min_gain)
    }
}

/// Grow node arena over `rows` (duplicates allowed, e.g. a bootstrap bag).
/// With a sampler, each node only considers `mtry` random columns.
pub(crate) fn grow_nodes(
    cols: &[&[f64]],
    y: &[f64],
    mut rows: Vec<usize>,
    controls: &TreeControls,
    sampler: Option<(&mut Rng, usize)>,
) -> Vec<Node> {
    rows.sort_unstable();
    let (mean, sse) = node_stats(y, &rows);
    let mut g = Grower {
        cols,
        y,
        controls,
        sampler,
        buf: Vec::with_capacity(rows.len()),
        min_gain: controls.cp * sse,
    };
    let max_splits = controls.max_splits.unwrap_or(usize::MAX);
    let mut nodes = vec![Node::Leaf {
        mean,
        n: rows.len(),
        sse,
    }];
    let mut pending: Vec<Option<(Vec<usize>, Candidate)>> = vec![None];
    let mut heap = BinaryHeap::new();
    if max_splits > 0 {
        if let Some(c) = g.best_split(&rows, mean, sse) {
            heap.push(Frontier { gain: c.gain, node: 0 });
            pending[0] = Some((rows, c));
        }
    }
    let mut splits = 0;
    while splits < max_splits {
        let Some(top) = heap.pop() else { break };
        let (rows, c) = pending[top.node].take().expect("frontier node has rows");
        let x = cols[c.feature];
        let (lrows, rrows): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| x[r] < c.threshold);
        let (mean, n, sse) = (nodes[top.node].mean(), rows.len(), nodes[top.node].sse());
        drop(rows);
        let left = nodes.len();
        let right = left + 1;
        nodes[top.node] = Node::Split {
            feature: c.feature,
            threshold: c.threshold,
            left,
            right,
            mean,
            n,
            sse,
        };
        splits += 1;
        for child in [lrows, rrows] {
            let (m, s) = node_stats(y, &child);
            let id = nodes.len();
            nodes.push(Node::Leaf {
                mean: m,
                n: child.len(),
                sse: s,
            });
            pending.push(None);
            if splits < max_splits {
                if let Some(c) = g.best_split(&child, m, s) {
                    heap.push(Frontier { gain: c.gain, node: id });
                    pending[id] = Some((child, c));
                }
            }
        }
    }
    nodes
}
