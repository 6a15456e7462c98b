//! Common prediction interface and the tagged union of fitted models.

use serde::{Deserialize, Serialize};

use crate::bart::{BartModel, Posterior};
use crate::cart::RegressionTree;
use crate::error::Result;
use crate::forest::Forest;
use crate::linear::LinearModel;
use crate::table::FeatureTable;

/// Anything that produces point predictions for the rows of a table.
pub trait Predictor: Sync {
    fn predict(&self, table: &FeatureTable) -> Result<Vec<f64>>;
}

/// Any fitted learner. Serialized as `{"kind": ..., "model": ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "lowercase")]
pub enum FittedModel {
    Ols(LinearModel),
    Lasso(LinearModel),
    Tree(RegressionTree),
    Forest(Forest),
    Bart(BartModel),
}

impl FittedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            FittedModel::Ols(_) => "ols",
            FittedModel::Lasso(_) => "lasso",
            FittedModel::Tree(_) => "tree",
            FittedModel::Forest(_) => "forest",
            FittedModel::Bart(_) => "bart",
        }
    }

    /// Input columns the model reads, in model order.
    pub fn features(&self) -> &[String] {
        match self {
            FittedModel::Ols(m) | FittedModel::Lasso(m) => &m.features,
            FittedModel::Tree(t) => t.features(),
            FittedModel::Forest(f) => f.features(),
            FittedModel::Bart(b) => b.features(),
        }
    }

    /// Posterior draws, for models that have them.
    pub fn posterior(&self, table: &FeatureTable) -> Option<Result<Posterior>> {
        match self {
            FittedModel::Bart(b) => Some(b.predict_posterior(table)),
            _ => None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: FittedModel = serde_json::from_str(s)?;
        if let FittedModel::Bart(b) = &m {
            // Re-run the layout check of the standalone loader.
            BartModel::from_json(&b.to_json()?)?;
        }
        if let FittedModel::Forest(f) = &m {
            Forest::from_json(&f.to_json()?)?;
        }
        Ok(m)
    }
}

impl Predictor for FittedModel {
    fn predict(&self, table: &FeatureTable) -> Result<Vec<f64>> {
        match self {
            FittedModel::Ols(m) | FittedModel::Lasso(m) => m.predict(table),
            FittedModel::Tree(t) => t.predict(table),
            FittedModel::Forest(f) => f.predict(table),
            FittedModel::Bart(b) => b.predict(table),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::Column;

    fn table() -> FeatureTable {
        let x: Vec<f64> = (0..40).map(f64::from).collect();
        let y = x.iter().map(|v| if *v < 20.0 { 1.0 } else { 3.0 } + 0.01 * v).collect();
        FeatureTable::from_columns(vec![Column::numeric("x", x)])
            .unwrap()
            .with_outcome("y", y)
            .unwrap()
    }

    #[test]
    fn json_round_trip_keeps_predictions() {
        let t = table();
        let models = vec![
            FittedModel::Ols(crate::linear::fit_ols(&t).unwrap()),
            FittedModel::Tree(crate::cart::grow(&t, &Default::default()).unwrap()),
            FittedModel::Forest(
                crate::forest::fit_forest(
                    &t,
                    &crate::forest::ForestControls {
                        trees: 5,
                        ..Default::default()
                    },
                )
                .unwrap(),
            ),
            FittedModel::Bart(
                crate::bart::fit_bart(
                    &t,
                    &crate::bart::BartControls {
                        trees: 3,
                        iters: 20,
                        burn: 10,
                        ..Default::default()
                    },
                )
                .unwrap(),
            ),
        ];
        for m in models {
            let json = m.to_json().unwrap();
            assert!(json.starts_with(&format!("{{\"kind\":\"{}\"", m.kind())));
            let back = FittedModel::from_json(&json).unwrap();
            assert_eq!(back.predict(&t).unwrap(), m.predict(&t).unwrap());
            assert_eq!(back.features(), ["x".to_string()]);
            assert_eq!(back.posterior(&t).is_some(), m.kind() == "bart");
        }
    }
}
