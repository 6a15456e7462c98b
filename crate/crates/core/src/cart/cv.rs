use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::prune::PrunePath;
use super::{grow_nodes, RegressionTree, TreeControls};
use crate::error::{Error, Result};
use crate::seed;
use crate::table::FeatureTable;

/// Cross-validated complexity selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvControls {
    pub folds: usize,
    pub seed: u64,
    /// Controls for the trees that get pruned; `cp` is normally 0.
    pub grow: TreeControls,
}

impl Default for CvControls {
    fn default() -> Self {
        CvControls {
            folds: 10,
            seed: 0,
            grow: TreeControls {
                cp: 0.0,
                ..TreeControls::default()
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct CvFit {
    pub tree: RegressionTree,
    /// Selected pruning alpha.
    pub alpha: f64,
    /// `(alpha, cross-validated MSE)` for each level of the pruning sequence.
    pub cv_mse: Vec<(f64, f64)>,
}

/// Random fold label for every row; fold sizes differ by at most one.
pub(crate) fn fold_labels(n: usize, folds: usize, seed_value: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::stream(seed_value, &[seed::TAG_FOLDS]));
    let mut labels = vec![0; n];
    for (pos, &r) in order.iter().enumerate() {
        labels[r] = pos % folds;
    }
    labels
}

/// Grow a full tree, pick the pruning level with the lowest cross-validated
/// MSE, and return the full-data tree pruned at that level.
pub fn fit_cv(train: &FeatureTable, cv: &CvControls) -> Result<CvFit> {
    cv.grow.validate()?;
    let n = train.n_rows();
    if cv.folds < 2 {
        return Err(Error::config("cross-validation needs at least 2 folds"));
    }
    if n < cv.folds {
        return Err(Error::config(format!("{n} rows is fewer than {} folds", cv.folds)));
    }
    let y = train.require_outcome()?;
    let cols: Vec<&[f64]> = (0..train.n_cols()).map(|j| train.values(j)).collect();
    let full = RegressionTree::from_parts(
        train.names(),
        grow_nodes(&cols, y, (0..n).collect(), &cv.grow, None),
        cv.grow.cp,
    );
    let path = PrunePath::new(&full);
    let alphas = path.alphas().to_vec();
    // Representative value inside each interval [a_k, a_{k+1}).
    let probes: Vec<f64> = (0..alphas.len())
        .map(|k| match alphas.get(k + 1) {
            Some(&next) => (alphas[k] * next).sqrt(),
            None => alphas[k],
        })
        .collect();

    let labels = fold_labels(n, cv.folds, cv.seed);
    let per_fold: Vec<Vec<f64>> = (0..cv.folds)
        .into_par_iter()
        .map(|f| {
            let rows: Vec<usize> = (0..n).filter(|&r| labels[r] != f).collect();
            let tree = RegressionTree::from_parts(
                train.names(),
                grow_nodes(&cols, y, rows, &cv.grow, None),
                cv.grow.cp,
            );
            let fold_path = PrunePath::new(&tree);
            let mut sse = vec![0.0; probes.len()];
            for r in (0..n).filter(|&r| labels[r] == f) {
                for (k, &a) in probes.iter().enumerate() {
                    let e = y[r] - tree.nodes()[fold_path.node_for(&cols, r, a)].mean();
                    sse[k] += e * e;
                }
            }
            sse
        })
        .collect();
    let cv_mse: Vec<(f64, f64)> = (0..probes.len())
        .map(|k| (alphas[k], per_fold.iter().map(|s| s[k]).sum::<f64>() / n as f64))
        .collect();
    // Lowest error; exact ties resolve to the simpler (larger alpha) tree.
    let best = (0..cv_mse.len())
        .rev()
        .min_by(|&a, &b| cv_mse[a].1.total_cmp(&cv_mse[b].1))
        .expect("non-empty path");
    let alpha = alphas[best];
    Ok(CvFit {
        tree: path.subtree(alpha),
        alpha,
        cv_mse,
    })
}
