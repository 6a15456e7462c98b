//! Monte Carlo comparison of learners on synthetic proximity data.
//!
//! One replication draws a population over a gazetteer, a fresh set of
//! events, proximity features, and an outcome from a declared generating
//! process; it then splits the rows 50/50 and scores every method on the
//! held-out half.

use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bart::{fit_bart, BartControls};
use crate::cart::{fit_cv, CvControls};
use crate::dataset::{assemble, split, AttributeSpec, AttributeValues, Gazetteer, Observations, SplitSpec, TrainSize};
use crate::error::{Error, Result};
use crate::forest::{fit_forest, ForestControls};
use crate::importance::mse;
use crate::linear::{fit_lasso, fit_ols, threshold_dummies, LassoControls};
use crate::model::Predictor;
use crate::seed::{self, derive_seed, TAG_SIM};
use crate::spatial::{featurize, DistanceScale, Event, EventCatalog};
use crate::table::{fmt_f64, Column, FeatureTable};

/// Events per replication.
pub const N_EVENTS: usize = 15;

// Sub-stream labels inside one replication.
const S_POP: u64 = 1;
const S_EVENTS: u64 = 2;
const S_NOISE: u64 = 3;
const S_SPLIT: u64 = 4;
const S_METHOD: u64 = 5;
const S_EXTRA: u64 = 6;

/// Distribution of one respondent attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Marginal {
    /// The first level is the reference level of the encoding.
    Categorical {
        name: String,
        levels: Vec<String>,
        probs: Vec<f64>,
    },
    /// Uniform on `[lo, hi]`, on the integers when `integer` is set.
    Uniform {
        name: String,
        lo: f64,
        hi: f64,
        #[serde(default)]
        integer: bool,
    },
}

impl Marginal {
    fn validate(&self) -> Result<()> {
        match self {
            Marginal::Categorical { name, levels, probs } => {
                if levels.is_empty() || levels.len() != probs.len() {
                    return Err(Error::config(format!("marginal '{name}': levels and probs must match")));
                }
                if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || probs.iter().sum::<f64>() <= 0.0 {
                    return Err(Error::config(format!("marginal '{name}': invalid probabilities")));
                }
            }
            Marginal::Uniform { name, lo, hi, .. } => {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(Error::config(format!("marginal '{name}': need finite lo <= hi")));
                }
            }
        }
        Ok(())
    }

    fn spec(&self) -> AttributeSpec {
        match self {
            Marginal::Categorical { name, levels, .. } => AttributeSpec::Categorical {
                name: name.clone(),
                levels: levels.clone(),
            },
            Marginal::Uniform { name, .. } => AttributeSpec::Numeric { name: name.clone() },
        }
    }

    fn draw(&self, n: usize, rng: &mut seed::Rng) -> AttributeValues {
        match self {
            Marginal::Categorical { levels, probs, .. } => {
                let total: f64 = probs.iter().sum();
                AttributeValues::Categorical(
                    (0..n)
                        .map(|_| {
                            let u = rng.random::<f64>() * total;
                            let mut acc = 0.0;
                            for (l, p) in levels.iter().zip(probs) {
                                acc += p;
                                if u < acc {
                                    return l.clone();
                                }
                            }
                            levels.last().expect("nonempty").clone()
                        })
                        .collect(),
                )
            }
            Marginal::Uniform { lo, hi, integer, .. } => AttributeValues::Numeric(
                (0..n)
                    .map(|_| {
                        if *integer {
                            rng.random_range(lo.ceil() as i64..=hi.floor() as i64) as f64
                        } else if lo == hi {
                            *lo
                        } else {
                            rng.random_range(*lo..=*hi)
                        }
                    })
                    .collect(),
            ),
        }
    }
}

pub fn default_marginals() -> Vec<Marginal> {
    let cat = |name: &str, levels: &[&str], probs: &[f64]| Marginal::Categorical {
        name: name.into(),
        levels: levels.iter().map(|s| s.to_string()).collect(),
        probs: probs.to_vec(),
    };
    vec![
        cat("sex", &["F", "M"], &[0.5, 0.5]),
        cat("education", &["hs", "some_college", "college", "postgrad"], &[0.35, 0.25, 0.25, 0.15]),
        Marginal::Uniform {
            name: "age".into(),
            lo: 18.0,
            hi: 90.0,
            integer: true,
        },
        cat("party", &["I", "D", "R"], &[0.3, 0.35, 0.35]),
    ]
}

/// A synthetic population with the zip each respondent was placed in.
#[derive(Debug, Clone)]
pub struct Population {
    pub observations: Observations,
    pub zips: Vec<String>,
}

/// `n` respondents placed uniformly over the gazetteer centroids with
/// independently drawn attributes.
pub fn gen_population(n: usize, gazetteer: &Gazetteer, marginals: &[Marginal], seed: u64) -> Result<Population> {
    if gazetteer.is_empty() {
        return Err(Error::input("population needs a nonempty gazetteer"));
    }
    for m in marginals {
        m.validate()?;
    }
    let mut rng = seed::stream(seed, &[TAG_SIM, S_POP]);
    let entries = gazetteer.entries();
    let picks: Vec<usize> = (0..n).map(|_| rng.random_range(0..entries.len())).collect();
    let attributes = marginals.iter().map(|m| m.draw(n, &mut rng)).collect();
    Ok(Population {
        observations: Observations {
            ids: (1..=n).map(|i| i.to_string()).collect(),
            points: picks.iter().map(|&i| entries[i].1).collect(),
            specs: marginals.iter().map(Marginal::spec).collect(),
            attributes,
            outcome: None,
            row_errors: Vec::new(),
        },
        zips: picks.iter().map(|&i| entries[i].0.clone()).collect(),
    })
}

/// [`N_EVENTS`] events at distinct gazetteer centroids with time ~ U(0, 10)
/// and size ~ U(5, 30).
pub fn gen_events(gazetteer: &Gazetteer, seed: u64) -> Result<EventCatalog> {
    let entries = gazetteer.entries();
    if entries.len() < N_EVENTS {
        return Err(Error::input(format!(
            "gazetteer has {} zips, need at least {N_EVENTS} distinct",
            entries.len()
        )));
    }
    let mut rng = seed::stream(seed, &[TAG_SIM, S_EVENTS]);
    let mut picks = index::sample(&mut rng, entries.len(), N_EVENTS).into_vec();
    picks.sort_unstable();
    let events = picks
        .iter()
        .enumerate()
        .map(|(i, &z)| Event {
            id: i as i64 + 1,
            location: entries[z].1,
            time: rng.random_range(0.0..10.0),
            size: rng.random_range(5.0..30.0),
            flags: Vec::new(),
        })
        .collect();
    EventCatalog::new(Vec::new(), events)
}

/// One additive piece of a generating process. Values are read in the units
/// of the feature table (km for distances in the benchmark).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Term {
    /// `coef * scale * x`.
    Linear {
        column: String,
        coef: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `coef * 1{x < below}`, times the column `times` when given.
    Step {
        column: String,
        below: f64,
        coef: f64,
        #[serde(default)]
        times: Option<String>,
    },
    /// `coef * (x - center)^2`.
    Quadratic { column: String, center: f64, coef: f64 },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DgpKind {
    Linear,
    Complex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub kind: DgpKind,
    pub intercept: f64,
    pub terms: Vec<Term>,
    pub noise_sd: f64,
    /// Round and clamp the latent value to this inclusive integer range.
    pub clamp: Option<(f64, f64)>,
}

impl DgpSpec {
    /// Additive linear effects of the nearest-event distance (per 1000 km),
    /// its size, party and age.
    pub fn default_linear() -> Self {
        DgpSpec {
            kind: DgpKind::Linear,
            intercept: 2.0,
            terms: vec![
                Term::Linear {
                    column: "dist_near_1".into(),
                    coef: -1.2,
                    scale: 0.001,
                },
                Term::Linear {
                    column: "size_near_1".into(),
                    coef: 0.04,
                    scale: 1.0,
                },
                Term::Linear {
                    column: "party[D]".into(),
                    coef: 0.6,
                    scale: 1.0,
                },
                Term::Linear {
                    column: "party[R]".into(),
                    coef: -0.6,
                    scale: 1.0,
                },
                Term::Linear {
                    column: "age".into(),
                    coef: 0.01,
                    scale: 1.0,
                },
            ],
            noise_sd: 0.5,
            clamp: Some((0.0, 4.0)),
        }
    }

    /// The linear spec with the distance term replaced by a 200 km threshold
    /// and its interaction with Republican identity, plus curvature in age.
    pub fn default_complex() -> Self {
        let mut spec = DgpSpec::default_linear();
        spec.kind = DgpKind::Complex;
        spec.terms.retain(|t| !matches!(t, Term::Linear { column, .. } if column == "dist_near_1"));
        spec.terms.insert(
            0,
            Term::Step {
                column: "dist_near_1".into(),
                below: 200.0,
                coef: 0.8,
                times: None,
            },
        );
        spec.terms.insert(
            1,
            Term::Step {
                column: "dist_near_1".into(),
                below: 200.0,
                coef: 0.6,
                times: Some("party[R]".into()),
            },
        );
        spec.terms.push(Term::Quadratic {
            column: "age".into(),
            center: 45.0,
            coef: -0.0005,
        });
        spec
    }

    /// Structural checks: a linear spec has only linear terms; a complex
    /// spec has a threshold, a threshold interaction and a curved term.
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) || !self.intercept.is_finite() {
            return Err(Error::config("dgp: intercept and noise_sd must be finite, noise_sd >= 0"));
        }
        if let Some((lo, hi)) = self.clamp {
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(Error::config("dgp: clamp range must have lo <= hi"));
            }
        }
        let has = |f: fn(&Term) -> bool| self.terms.iter().any(f);
        match self.kind {
            DgpKind::Linear => {
                if !self.terms.iter().all(|t| matches!(t, Term::Linear { .. })) {
                    return Err(Error::config("dgp: a linear spec may only contain linear terms"));
                }
            }
            DgpKind::Complex => {
                if !has(|t| matches!(t, Term::Step { times: None, .. }))
                    || !has(|t| matches!(t, Term::Step { times: Some(_), .. }))
                    || !has(|t| matches!(t, Term::Quadratic { .. }))
                {
                    return Err(Error::config(
                        "dgp: a complex spec needs a threshold, a threshold interaction and a quadratic term",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Noise-free latent value per row.
    pub fn latent(&self, features: &FeatureTable) -> Result<Vec<f64>> {
        let mut out = vec![self.intercept; features.n_rows()];
        for term in &self.terms {
            match term {
                Term::Linear { column, coef, scale } => {
                    for (o, x) in out.iter_mut().zip(features.require(column)?) {
                        *o += coef * scale * x;
                    }
                }
                Term::Step {
                    column,
                    below,
                    coef,
                    times,
                } => {
                    let x = features.require(column)?;
                    let m = times.as_deref().map(|c| features.require(c)).transpose()?;
                    for (i, o) in out.iter_mut().enumerate() {
                        if x[i] < *below {
                            *o += coef * m.map_or(1.0, |m| m[i]);
                        }
                    }
                }
                Term::Quadratic { column, center, coef } => {
                    for (o, x) in out.iter_mut().zip(features.require(column)?) {
                        *o += coef * (x - center) * (x - center);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Maps a latent value to the observed scale.
    pub fn discretize(&self, v: f64) -> f64 {
        match self.clamp {
            Some((lo, hi)) => v.round().clamp(lo, hi),
            None => v,
        }
    }
}

/// Latent value plus Gaussian noise, then discretized.
pub fn apply_dgp(features: &FeatureTable, spec: &DgpSpec, seed: u64) -> Result<Vec<f64>> {
    spec.validate()?;
    let latent = spec.latent(features)?;
    let mut rng = seed::stream(seed, &[TAG_SIM, S_NOISE]);
    let noise = Normal::new(0.0, spec.noise_sd).map_err(|e| Error::config(format!("dgp noise: {e}")))?;
    Ok(latent
        .into_iter()
        .map(|v| spec.discretize(v + noise.sample(&mut rng)))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    OlsRaw,
    OlsDummyWrong,
    Lasso,
    TreeCv,
    Forest,
    Bart,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::OlsRaw,
        Method::OlsDummyWrong,
        Method::Lasso,
        Method::TreeCv,
        Method::Forest,
        Method::Bart,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::OlsRaw => "ols_raw",
            Method::OlsDummyWrong => "ols_dummy_wrong",
            Method::Lasso => "lasso",
            Method::TreeCv => "tree_cv",
            Method::Forest => "forest",
            Method::Bart => "bart",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown method '{s}'")))
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.as_str().to_string()
    }
}

/// Indicator coding deliberately at odds with the generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WrongDummies {
    pub distance_cutoff: f64,
    pub size_cutoff: f64,
}

impl Default for WrongDummies {
    fn default() -> Self {
        WrongDummies {
            distance_cutoff: 100.0,
            size_cutoff: 17.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n_train: usize,
    pub reps: usize,
    pub dgp: DgpSpec,
    pub methods: Vec<Method>,
    pub seed: u64,
    /// Gazetteer CSV; a synthetic one of `gazetteer_size` zips otherwise.
    pub gazetteer: Option<PathBuf>,
    pub gazetteer_size: usize,
    pub marginals: Vec<Marginal>,
    /// Pure-noise feature columns added to every design.
    pub irrelevant: usize,
    pub k: usize,
    pub wrong_dummies: WrongDummies,
    pub tree: CvControls,
    pub forest: ForestControls,
    pub bart: BartControls,
    pub lasso: LassoControls,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_train: 500,
            reps: 100,
            dgp: DgpSpec::default_complex(),
            methods: Method::ALL.to_vec(),
            seed: 1,
            gazetteer: None,
            gazetteer_size: 1000,
            marginals: default_marginals(),
            irrelevant: 2,
            k: 3,
            wrong_dummies: WrongDummies::default(),
            tree: CvControls::default(),
            forest: ForestControls::default(),
            bart: BartControls::default(),
            lasso: LassoControls::default(),
        }
    }
}

impl SimConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::config(format!("simulation config: {e}")))
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::config("reps must be at least 1"));
        }
        if self.n_train < 2 {
            return Err(Error::config("n_train must be at least 2"));
        }
        if self.methods.is_empty() {
            return Err(Error::config("no methods selected"));
        }
        self.dgp.validate()?;
        self.marginals.iter().try_for_each(Marginal::validate)
    }

    pub fn load_gazetteer(&self) -> Result<Gazetteer> {
        match &self.gazetteer {
            Some(p) => Gazetteer::load(p),
            None => Ok(Gazetteer::synthetic(self.gazetteer_size, self.seed)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    pub rep: usize,
    pub method: Method,
    pub mse: f64,
    /// Seed of the replication.
    pub seed: u64,
    pub n_train: usize,
}

/// Seed of replication `rep`.
pub fn rep_seed(master: u64, rep: usize) -> u64 {
    derive_seed(master, &[TAG_SIM, rep as u64])
}

/// Columns kept out of every design: running means duplicate their
/// constituents exactly and would make the OLS design singular.
fn is_averaged(name: &str) -> bool {
    name.contains("_mean_")
}

/// Drop columns identical to an earlier one. With few events the same event
/// can be, say, both the third most recent and the third largest, which
/// would duplicate a distance column.
fn drop_duplicates(cols: Vec<Column>) -> Vec<Column> {
    let mut kept: Vec<Column> = Vec::with_capacity(cols.len());
    for c in cols {
        if !kept.iter().any(|k| k.values == c.values) {
            kept.push(c);
        }
    }
    kept
}

/// Features and outcome of one replication, before splitting.
pub fn replication_table(cfg: &SimConfig, gazetteer: &Gazetteer, rep: usize) -> Result<FeatureTable> {
    let seed = rep_seed(cfg.seed, rep);
    let pop = gen_population(2 * cfg.n_train, gazetteer, &cfg.marginals, seed)?;
    let events = gen_events(gazetteer, seed)?;
    let cols: Vec<Column> = featurize(&pop.observations.points, &events, cfg.k, DistanceScale::Km)?
        .into_iter()
        .filter(|c| !is_averaged(&c.name))
        .collect();
    let mut cols = drop_duplicates(cols);
    let mut rng = seed::stream(seed, &[TAG_SIM, S_EXTRA]);
    let n = pop.observations.len();
    for j in 1..=cfg.irrelevant {
        cols.push(Column::numeric(
            format!("irrelevant_{j}"),
            (0..n).map(|_| rng.random::<f64>()).collect(),
        ));
    }
    let table = assemble(&pop.observations, cols)?;
    let y = apply_dgp(&table, &cfg.dgp, seed)?;
    table.with_outcome("y", y)
}

/// Fit `method` on `train` and return its test MSE.
pub fn score_method(
    method: Method,
    cfg: &SimConfig,
    train: &FeatureTable,
    test: &FeatureTable,
    seed: u64,
) -> Result<f64> {
    let y = test.require_outcome()?;
    let mseed = derive_seed(seed, &[TAG_SIM, S_METHOD, method as u64]);
    let pred = match method {
        Method::OlsRaw => fit_ols(train)?.predict(test)?,
        Method::OlsDummyWrong => {
            let (tr, te) = (wrong_dummy_design(cfg, train)?, wrong_dummy_design(cfg, test)?);
            // A dummy that never fires in training is aliased with the
            // intercept; drop it the way lm() would report NA for it.
            let flat: Vec<String> = ["near_small", "near_large"]
                .into_iter()
                .filter(|n| tr.require(n).is_ok_and(|v| v.iter().all(|&a| a == v[0])))
                .map(String::from)
                .collect();
            let flat: Vec<&str> = flat.iter().map(String::as_str).collect();
            fit_ols(&tr.without_columns(&flat))?.predict(&te.without_columns(&flat))?
        }
        Method::Lasso => fit_lasso(
            train,
            &LassoControls {
                seed: mseed,
                ..cfg.lasso.clone()
            },
        )?
        .model
        .predict(test)?,
        Method::TreeCv => fit_cv(
            train,
            &CvControls {
                seed: mseed,
                ..cfg.tree
            },
        )?
        .tree
        .predict(test)?,
        Method::Forest => fit_forest(
            train,
            &ForestControls {
                seed: mseed,
                ..cfg.forest
            },
        )?
        .predict(test)?,
        Method::Bart => fit_bart(
            train,
            &BartControls {
                seed: mseed,
                ..cfg.bart.clone()
            },
        )?
        .predict(test)?,
    };
    mse(y, &pred)
}

/// Distances replaced by near/far-by-size indicators for the nearest event.
pub fn wrong_dummy_design(cfg: &SimConfig, table: &FeatureTable) -> Result<FeatureTable> {
    let w = &cfg.wrong_dummies;
    let dummies = threshold_dummies(table, "dist_near_1", w.distance_cutoff, "size_near_1", w.size_cutoff)?;
    let names: Vec<String> = table.names().into_iter().filter(|n| n.starts_with("dist_")).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut out = table.without_columns(&refs);
    for c in dummies {
        out.push_column(c)?;
    }
    Ok(out)
}

/// Run every replication. Replications run in parallel; results are in
/// (rep, method) order and do not depend on the thread count.
pub fn run_benchmark(cfg: &SimConfig) -> Result<Vec<ReplicationResult>> {
    cfg.validate()?;
    let gazetteer = cfg.load_gazetteer()?;
    let per_rep: Vec<Vec<ReplicationResult>> = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| run_replication(cfg, &gazetteer, rep))
        .collect::<Result<_>>()?;
    Ok(per_rep.into_iter().flatten().collect())
}

pub fn run_replication(cfg: &SimConfig, gazetteer: &Gazetteer, rep: usize) -> Result<Vec<ReplicationResult>> {
    let seed = rep_seed(cfg.seed, rep);
    let table = replication_table(cfg, gazetteer, rep)?;
    let (train, test) = split(
        &table,
        &SplitSpec {
            train: TrainSize::Count(cfg.n_train),
            seed: derive_seed(seed, &[TAG_SIM, S_SPLIT]),
        },
    )?;
    cfg.methods
        .iter()
        .map(|&method| {
            let mse = score_method(method, cfg, &train, &test, seed)?;
            log::debug!("rep {rep} {}: mse {mse}", method.as_str());
            Ok(ReplicationResult {
                rep,
                method,
                mse,
                seed,
                n_train: cfg.n_train,
            })
        })
        .collect()
}

/// CSV `rep,method,mse,seed`.
pub fn write_results<W: Write>(results: &[ReplicationResult], w: W) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    wr.write_record(["rep", "method", "mse", "seed"])?;
    for r in results {
        wr.write_record([r.rep.to_string(), r.method.as_str().to_string(), fmt_f64(r.mse), r.seed.to_string()])?;
    }
    wr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Median test MSE of `method` over the replications.
pub fn median_mse(results: &[ReplicationResult], method: Method) -> Option<f64> {
    let v: Vec<f64> = results.iter().filter(|r| r.method == method).map(|r| r.mse).collect();
    (!v.is_empty()).then(|| crate::stats::median(&v))
}
