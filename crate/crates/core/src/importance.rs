//! Permutation importance on held-out data, global and per observation.

use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Predictor;
use crate::seed::{self, TAG_IMPORTANCE};
use crate::table::{fmt_f64, FeatureTable, FeatureUnit};

/// Mean squared error.
pub fn mse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    if y.len() != yhat.len() {
        return Err(Error::input(format!(
            "mse: {} outcomes but {} predictions",
            y.len(),
            yhat.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::input("mse: no rows"));
    }
    Ok(y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImportanceControls {
    /// Permutation replicates per feature.
    pub k: usize,
    pub seed: u64,
    /// Permute each indicator on its own instead of whole one-hot blocks.
    pub per_indicator: bool,
    /// Also record the per-observation matrix.
    pub local: bool,
    /// Restrict to these units (unit or column names); all units when empty.
    pub features: Vec<String>,
}

impl Default for ImportanceControls {
    fn default() -> Self {
        ImportanceControls {
            k: 3,
            seed: 0,
            per_indicator: false,
            local: false,
            features: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureImportance {
    /// Unit name: a column, or the group of a one-hot block.
    pub name: String,
    pub columns: Vec<String>,
    /// `(mse_perm / mse_base - 1) * 100`.
    pub importance_pct: f64,
    /// Mean over replicates of the permuted-data MSE.
    pub mse_perm: f64,
}

/// Per-observation squared-error increases, averaged over replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalImportance {
    pub ids: Vec<String>,
    pub features: Vec<String>,
    /// `values[f][i]` for feature `f` and test row `i`.
    pub values: Vec<Vec<f64>>,
}

impl LocalImportance {
    pub fn column(&self, feature: &str) -> Option<&[f64]> {
        let j = self.features.iter().position(|f| f == feature)?;
        Some(&self.values[j])
    }

    /// CSV with header `id,<features...>`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        let mut header = vec!["id".to_string()];
        header.extend(self.features.iter().cloned());
        wr.write_record(&header)?;
        for (i, id) in self.ids.iter().enumerate() {
            let mut rec = vec![id.clone()];
            rec.extend(self.values.iter().map(|col| fmt_f64(col[i])));
            wr.write_record(&rec)?;
        }
        wr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let t = FeatureTable::read_csv(r, None)?;
        Ok(LocalImportance {
            ids: t.ids().to_vec(),
            features: t.names(),
            values: t.columns().iter().map(|c| c.values.clone()).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceReport {
    pub mse_base: f64,
    pub k: usize,
    pub seed: u64,
    /// In unit order of the test table.
    pub features: Vec<FeatureImportance>,
    pub local: Option<LocalImportance>,
}

impl ImportanceReport {
    pub fn get(&self, name: &str) -> Option<&FeatureImportance> {
        self.features.iter().find(|f| f.name == name)
    }

    /// Features by decreasing importance; ties keep table order.
    pub fn ranked(&self) -> Vec<&FeatureImportance> {
        let mut v: Vec<&FeatureImportance> = self.features.iter().collect();
        v.sort_by(|a, b| b.importance_pct.total_cmp(&a.importance_pct));
        v
    }

    /// CSV `feature,importance_pct,mse_perm,mse_base,k`, ranked.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        wr.write_record(["feature", "importance_pct", "mse_perm", "mse_base", "k"])?;
        for f in self.ranked() {
            wr.write_record([
                f.name.clone(),
                fmt_f64(f.importance_pct),
                fmt_f64(f.mse_perm),
                fmt_f64(self.mse_base),
                self.k.to_string(),
            ])?;
        }
        wr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

fn select_units(test: &FeatureTable, ctl: &ImportanceControls) -> Result<Vec<FeatureUnit>> {
    let units = test.feature_units(ctl.per_indicator);
    if ctl.features.is_empty() {
        return Ok(units);
    }
    ctl.features
        .iter()
        .map(|name| {
            if let Some(u) = units.iter().find(|u| &u.name == name) {
                return Ok(u.clone());
            }
            match test.column_index(name) {
                Some(i) => Ok(FeatureUnit {
                    name: name.clone(),
                    columns: vec![i],
                }),
                None => Err(Error::input(format!("feature '{name}' is not in the test table"))),
            }
        })
        .collect()
}

/// Replicate `k` of unit `u`: the row permutation, or `None` if it is the
/// identity.
fn permutation(seed: u64, u: usize, k: usize, n: usize) -> Option<Vec<usize>> {
    let mut rng = seed::stream(seed, &[TAG_IMPORTANCE, u as u64, k as u64]);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    (!perm.iter().enumerate().all(|(i, &p)| i == p)).then_some(perm)
}

/// Permutation importance of every feature unit of `test` (or the subset
/// named in `ctl.features`). Each replicate shuffles the rows of all columns
/// of a unit with one permutation drawn from its own derived stream.
pub fn permutation_importance<P: Predictor + ?Sized>(
    model: &P,
    test: &FeatureTable,
    ctl: &ImportanceControls,
) -> Result<ImportanceReport> {
    if ctl.k == 0 {
        return Err(Error::config("number of permutations must be at least 1"));
    }
    let y = test.require_outcome()?;
    let n = test.n_rows();
    let base = model.predict(test)?;
    let base_se: Vec<f64> = y.iter().zip(&base).map(|(a, b)| (a - b) * (a - b)).collect();
    let mse_base = mse(y, &base)?;
    let units = select_units(test, ctl)?;

    let jobs: Vec<(usize, usize)> = (0..units.len()).flat_map(|u| (0..ctl.k).map(move |k| (u, k))).collect();
    // Each job: (mse of the replicate, per-row SE increase if requested).
    let results: Vec<(f64, Option<Vec<f64>>)> = jobs
        .par_iter()
        .map(|&(u, k)| -> Result<(f64, Option<Vec<f64>>)> {
            let Some(perm) = permutation(ctl.seed, u, k, n) else {
                return Ok((mse_base, ctl.local.then(|| vec![0.0; n])));
            };
            let mut t = test.clone();
            for &c in &units[u].columns {
                let src = test.values(c);
                t.set_values(c, perm.iter().map(|&p| src[p]).collect());
            }
            let pred = model.predict(&t)?;
            let m = mse(y, &pred)?;
            let local = ctl.local.then(|| {
                y.iter()
                    .zip(&pred)
                    .zip(&base_se)
                    .map(|((a, b), e0)| (a - b) * (a - b) - e0)
                    .collect()
            });
            Ok((m, local))
        })
        .collect::<Result<_>>()?;

    let kf = ctl.k as f64;
    let mut features = Vec::with_capacity(units.len());
    let mut local_cols = Vec::new();
    for (u, unit) in units.iter().enumerate() {
        let reps = &results[u * ctl.k..(u + 1) * ctl.k];
        // Averaging the increases keeps an unaffected unit at exactly 0%.
        let mse_perm = mse_base + reps.iter().map(|r| r.0 - mse_base).sum::<f64>() / kf;
        features.push(FeatureImportance {
            name: unit.name.clone(),
            columns: unit.columns.iter().map(|&c| test.columns()[c].name.clone()).collect(),
            importance_pct: (mse_perm / mse_base - 1.0) * 100.0,
            mse_perm,
        });
        if ctl.local {
            let mut col = vec![0.0; n];
            for r in reps {
                for (c, v) in col.iter_mut().zip(r.1.as_ref().expect("local requested")) {
                    *c += v;
                }
            }
            col.iter_mut().for_each(|c| *c /= kf);
            local_cols.push(col);
        }
    }
    let local = ctl.local.then(|| LocalImportance {
        ids: test.ids().to_vec(),
        features: units.iter().map(|u| u.name.clone()).collect(),
        values: local_cols,
    });
    Ok(ImportanceReport {
        mse_base,
        k: ctl.k,
        seed: ctl.seed,
        features,
        local,
    })
}

/// The per-observation matrix alone.
pub fn local_importance<P: Predictor + ?Sized>(
    model: &P,
    test: &FeatureTable,
    ctl: &ImportanceControls,
) -> Result<LocalImportance> {
    let ctl = ImportanceControls {
        local: true,
        ..ctl.clone()
    };
    Ok(permutation_importance(model, test, &ctl)?.local.expect("local requested"))
}
