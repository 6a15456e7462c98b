//! Bagged regression trees with per-node column subsampling.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cart::{grow_nodes, RegressionTree, TreeControls};
use crate::error::{Error, Result};
use crate::model::Predictor;
use crate::seed::{stream, TAG_FOREST};
use crate::table::FeatureTable;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestControls {
    pub trees: usize,
    /// Columns considered at each node; `None` means `max(1, p / 3)`.
    pub mtry: Option<usize>,
    pub tree: TreeControls,
    /// When false every tree sees each training row exactly once.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestControls {
    fn default() -> Self {
        ForestControls {
            trees: 200,
            mtry: None,
            tree: TreeControls {
                min_split: 10,
                min_leaf: 5,
                cp: 0.0,
                max_splits: None,
            },
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    features: Vec<String>,
    mtry: usize,
    seed: u64,
    trees: Vec<RegressionTree>,
    /// Training row indices drawn for each tree, sorted.
    bags: Vec<Vec<u32>>,
    n_train: usize,
}

/// Out-of-bag error summary.
#[derive(Debug, Clone, PartialEq)]
pub struct OobReport {
    pub mse: f64,
    /// Rows that appear in every bag and therefore have no OOB prediction.
    pub excluded: Vec<usize>,
}

pub fn fit_forest(train: &FeatureTable, controls: &ForestControls) -> Result<Forest> {
    controls.tree.validate()?;
    let y = train.require_outcome()?;
    let (n, p) = (train.n_rows(), train.n_cols());
    if p == 0 {
        return Err(Error::config("forest needs at least one feature column"));
    }
    if controls.trees == 0 {
        return Err(Error::config("forest needs at least one tree"));
    }
    if n == 0 {
        return Err(Error::input("cannot fit a forest on an empty table"));
    }
    if n > u32::MAX as usize {
        return Err(Error::input("too many rows for a forest"));
    }
    let mtry = controls.mtry.unwrap_or((p / 3).max(1));
    if mtry == 0 || mtry > p {
        return Err(Error::config(format!("mtry must be in 1..={p}, got {mtry}")));
    }
    let cols: Vec<&[f64]> = (0..p).map(|j| train.values(j)).collect();
    let fitted: Vec<(RegressionTree, Vec<u32>)> = (0..controls.trees)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(controls.seed, &[TAG_FOREST, b as u64]);
            let mut rows: Vec<usize> = if controls.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            rows.sort_unstable();
            let bag = rows.iter().map(|&r| r as u32).collect();
            let nodes = grow_nodes(&cols, y, rows, &controls.tree, Some((&mut rng, mtry)));
            (RegressionTree::from_parts(train.names(), nodes, controls.tree.cp), bag)
        })
        .collect();
    let (trees, bags) = fitted.into_iter().unzip();
    Ok(Forest {
        features: train.names(),
        mtry,
        seed: controls.seed,
        trees,
        bags,
        n_train: n,
    })
}

impl Forest {
    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn bags(&self) -> &[Vec<u32>] {
        &self.bags
    }

    pub fn mtry(&self) -> usize {
        self.mtry
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    /// Per-tree predictions, tree-major.
    pub fn predict_trees(&self, table: &FeatureTable) -> Result<Vec<Vec<f64>>> {
        self.trees.par_iter().map(|t| t.predict(table)).collect()
    }

    /// OOB mean squared error on the training table the forest was fit to.
    pub fn oob_mse(&self, train: &FeatureTable) -> Result<OobReport> {
        let y = train.require_outcome()?;
        if train.n_rows() != self.n_train {
            return Err(Error::input(format!(
                "OOB needs the {}-row training table, got {} rows",
                self.n_train,
                train.n_rows()
            )));
        }
        let n = self.n_train;
        let mut in_bag = vec![vec![false; n]; self.trees.len()];
        for (flags, bag) in in_bag.iter_mut().zip(&self.bags) {
            for &r in bag {
                flags[r as usize] = true;
            }
        }
        let bound: Vec<Vec<&[f64]>> = self
            .trees
            .iter()
            .map(|t| t.bound_columns(train))
            .collect::<Result<_>>()?;
        let per_row: Vec<Option<f64>> = (0..n)
            .into_par_iter()
            .map(|r| {
                let (mut sum, mut k) = (0.0, 0usize);
                for (b, tree) in self.trees.iter().enumerate() {
                    if !in_bag[b][r] {
                        sum += tree.nodes()[tree.leaf_for(&bound[b], r)].mean();
                        k += 1;
                    }
                }
                (k > 0).then(|| sum / k as f64)
            })
            .collect();
        let mut excluded = Vec::new();
        let (mut sse, mut used) = (0.0, 0usize);
        for (r, p) in per_row.iter().enumerate() {
            match p {
                Some(p) => {
                    sse += (y[r] - p) * (y[r] - p);
                    used += 1;
                }
                None => excluded.push(r),
            }
        }
        if !excluded.is_empty() {
            log::warn!("{} rows are in every bag and were left out of the OOB error", excluded.len());
        }
        if used == 0 {
            return Err(Error::numerical("no row has an out-of-bag prediction"));
        }
        Ok(OobReport {
            mse: sse / used as f64,
            excluded,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: Forest = serde_json::from_str(s)?;
        if f.trees.is_empty() || f.trees.len() != f.bags.len() {
            return Err(Error::input("forest json: tree and bag counts differ"));
        }
        Ok(f)
    }
}

impl Predictor for Forest {
    fn predict(&self, table: &FeatureTable) -> Result<Vec<f64>> {
        let bound: Vec<Vec<&[f64]>> = self
            .trees
            .iter()
            .map(|t| t.bound_columns(table))
            .collect::<Result<_>>()?;
        let b = self.trees.len() as f64;
        Ok((0..table.n_rows())
            .into_par_iter()
            .map(|r| {
                let mut sum = 0.0;
                for (tree, cols) in self.trees.iter().zip(&bound) {
                    sum += tree.nodes()[tree.leaf_for(cols, r)].mean();
                }
                sum / b
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cart::grow;
    use crate::table::Column;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn linear_table(seed: u64, n: usize) -> FeatureTable {
        let mut rng = crate::seed::Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.5).unwrap();
        let x: Vec<Vec<f64>> = (0..4).map(|_| (0..n).map(|_| rng.random::<f64>()).collect()).collect();
        let y = (0..n)
            .map(|i| 1.0 + 2.0 * x[0][i] - x[1][i] + noise.sample(&mut rng))
            .collect();
        FeatureTable::from_columns(
            x.into_iter()
                .enumerate()
                .map(|(j, v)| Column::numeric(format!("x{j}"), v))
                .collect(),
        )
        .unwrap()
        .with_outcome("y", y)
        .unwrap()
    }

    #[test]
    fn degenerate_forest_is_a_single_tree() {
        let t = linear_table(1, 200);
        let c = ForestControls {
            trees: 1,
            mtry: Some(4),
            bootstrap: false,
            ..ForestControls::default()
        };
        let f = fit_forest(&t, &c).unwrap();
        let tree = grow(&t, &c.tree).unwrap();
        assert_eq!(f.predict(&t).unwrap(), tree.predict(&t).unwrap());
    }

    #[test]
    fn prediction_is_mean_of_trees() {
        let t = linear_table(2, 150);
        let f = fit_forest(&t, &ForestControls { trees: 25, ..ForestControls::default() }).unwrap();
        let per_tree = f.predict_trees(&t).unwrap();
        let pred = f.predict(&t).unwrap();
        for r in 0..t.n_rows() {
            let m = per_tree.iter().map(|p| p[r]).sum::<f64>() / 25.0;
            assert!((m - pred[r]).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_outcome_predicts_constant() {
        let t = linear_table(3, 80);
        let y = vec![1.5; 80];
        let t = t.with_outcome("y", y).unwrap();
        let f = fit_forest(&t, &ForestControls { trees: 10, ..ForestControls::default() }).unwrap();
        assert!(f.predict(&t).unwrap().iter().all(|&p| p == 1.5));
    }

    #[test]
    fn bags_have_n_draws_and_oob_fraction_near_limit() {
        let t = linear_table(4, 1000);
        let f = fit_forest(&t, &ForestControls { trees: 200, ..ForestControls::default() }).unwrap();
        let mut frac = 0.0;
        for bag in f.bags() {
            assert_eq!(bag.len(), 1000);
            let mut seen = vec![false; 1000];
            bag.iter().for_each(|&r| seen[r as usize] = true);
            frac += seen.iter().filter(|s| !**s).count() as f64 / 1000.0;
        }
        frac /= 200.0;
        // (1 - 1/n)^n for n = 1000.
        let limit = (1.0 - 1e-3f64).powi(1000);
        assert!((frac - limit).abs() < 0.02, "{frac} vs {limit}");
    }

    #[test]
    fn oob_tracks_held_out_error() {
        let t = linear_table(5, 2000);
        let (train, test): (Vec<usize>, Vec<usize>) = (0..2000).partition(|r| r % 2 == 0);
        let tr = t.select_rows(&train);
        let te = t.select_rows(&test);
        let f = fit_forest(&tr, &ForestControls { trees: 200, seed: 9, ..ForestControls::default() }).unwrap();
        let oob = f.oob_mse(&tr).unwrap();
        assert!(oob.excluded.is_empty());
        let pred = f.predict(&te).unwrap();
        let y = te.outcome().unwrap();
        let test_mse = pred.iter().zip(y).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / y.len() as f64;
        assert!((oob.mse / test_mse - 1.0).abs() < 0.15, "oob {} test {test_mse}", oob.mse);
    }

    #[test]
    fn oob_prediction_uses_only_trees_missing_the_row() {
        let x = vec![0.0, 1.0, 2.0, 3.0];
        let t = FeatureTable::from_columns(vec![Column::numeric("x", x)])
            .unwrap()
            .with_outcome("y", vec![5.0, 1.0, 1.0, 1.0])
            .unwrap();
        let leaf = |v: f64| RegressionTree::from_parts(vec!["x".into()], vec![crate::cart::Node::Leaf { mean: v, n: 4, sse: 0.0 }], 0.0);
        let f = Forest {
            features: vec!["x".into()],
            mtry: 1,
            seed: 0,
            trees: vec![leaf(2.0), leaf(7.0)],
            bags: vec![vec![1, 1, 2, 3], vec![0, 1, 2, 3]],
            n_train: 4,
        };
        // Row 0 is out of bag for tree 0 only; rows 1..3 are in both bags.
        let oob = f.oob_mse(&t).unwrap();
        assert_eq!(oob.excluded, vec![1, 2, 3]);
        assert_eq!(oob.mse, 9.0);
    }

    #[test]
    fn rows_in_every_bag_are_excluded_from_oob() {
        let t = linear_table(6, 30);
        let f = fit_forest(
            &t,
            &ForestControls {
                trees: 2,
                bootstrap: false,
                ..ForestControls::default()
            },
        )
        .unwrap();
        assert!(f.oob_mse(&t).is_err());
    }

    #[test]
    fn mtry_out_of_range_is_config_error() {
        let t = linear_table(7, 50);
        let c = ForestControls { mtry: Some(5), ..ForestControls::default() };
        assert!(matches!(fit_forest(&t, &c), Err(Error::Config(_))));
    }

    #[test]
    fn determinism_and_json_round_trip() {
        let t = linear_table(8, 120);
        let c = ForestControls { trees: 15, seed: 77, ..ForestControls::default() };
        let a = fit_forest(&t, &c).unwrap();
        let b = fit_forest(&t, &c).unwrap();
        assert_eq!(a, b);
        let back = Forest::from_json(&a.to_json().unwrap()).unwrap();
        assert_eq!(back.predict(&t).unwrap(), a.predict(&t).unwrap());
        assert_eq!(back.bags(), a.bags());
    }

    #[test]
    fn forest_beats_median_tree() {
        for seed in 0..20 {
            let t = linear_table(100 + seed, 600);
            let rows: Vec<usize> = (0..300).collect();
            let test_rows: Vec<usize> = (300..600).collect();
            let (tr, te) = (t.select_rows(&rows), t.select_rows(&test_rows));
            let f = fit_forest(&tr, &ForestControls { trees: 50, seed, ..ForestControls::default() }).unwrap();
            let y = te.outcome().unwrap();
            let mse = |p: &[f64]| p.iter().zip(y).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / y.len() as f64;
            let mut tree_mse: Vec<f64> = f.predict_trees(&te).unwrap().iter().map(|p| mse(p)).collect();
            tree_mse.sort_by(f64::total_cmp);
            assert!(mse(&f.predict(&te).unwrap()) <= tree_mse[tree_mse.len() / 2]);
        }
    }
}
