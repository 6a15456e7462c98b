//! Bayesian sum-of-trees regression fit by Metropolis-within-Gibbs
//! backfitting.
//!
//! The outcome is mapped to `[-0.5, 0.5]` before sampling; every stored
//! draw is mapped back, so predictions and sigma draws are in outcome units.

mod sampler;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::linear::fit_ols;
use crate::model::Predictor;
use crate::seed::{stream, TAG_BART};
use crate::stats;
use crate::table::{fmt_f64, FeatureTable};

pub(crate) use sampler::{Chain, Prepared};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BartControls {
    pub trees: usize,
    /// Total sweeps per chain, burn-in included.
    pub iters: usize,
    pub burn: usize,
    pub thin: usize,
    /// Tree prior: split probability `alpha * (1 + depth)^-beta`.
    pub alpha: f64,
    pub beta: f64,
    /// Leaf prior scale `0.5 / (k * sqrt(trees))` on the standardized outcome.
    pub k: f64,
    pub nu: f64,
    /// Prior probability that sigma is below the data-based estimate.
    pub q: f64,
    /// Cutpoints per column when a column has more distinct values.
    pub numcut: usize,
    pub min_leaf: usize,
    pub chains: usize,
    pub seed: u64,
    /// Replace the likelihood by a constant; the chain then samples the tree
    /// prior. Diagnostic only.
    #[doc(hidden)]
    pub prior_only: bool,
}

impl Default for BartControls {
    fn default() -> Self {
        BartControls {
            trees: 200,
            iters: 2000,
            burn: 1000,
            thin: 1,
            alpha: 0.95,
            beta: 2.0,
            k: 2.0,
            nu: 3.0,
            q: 0.90,
            numcut: 100,
            min_leaf: 5,
            chains: 1,
            seed: 0,
            prior_only: false,
        }
    }
}

impl BartControls {
    fn validate(&self) -> Result<()> {
        if self.trees == 0 || self.chains == 0 || self.thin == 0 {
            return Err(Error::config("trees, chains and thin must be at least 1"));
        }
        if self.burn >= self.iters {
            return Err(Error::config(format!(
                "burn-in ({}) must be smaller than iterations ({})",
                self.burn, self.iters
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) || self.beta < 0.0 {
            return Err(Error::config("need 0 < alpha < 1 and beta >= 0"));
        }
        if !(self.k > 0.0 && self.nu > 0.0 && self.q > 0.0 && self.q < 1.0) {
            return Err(Error::config("need k > 0, nu > 0 and 0 < q < 1"));
        }
        if self.numcut == 0 || self.min_leaf == 0 {
            return Err(Error::config("numcut and min_leaf must be at least 1"));
        }
        Ok(())
    }

    /// Retained draws per chain.
    pub fn kept(&self) -> usize {
        (self.iters - self.burn).div_ceil(self.thin)
    }
}

/// Tree node in a stored draw. Children are offsets from the node itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CNode {
    pub var: u32,
    pub threshold: f64,
    pub left: u32,
    pub right: u32,
    /// Leaf value on the standardized scale.
    pub mu: f64,
}

impl CNode {
    const LEAF: u32 = u32::MAX;

    fn leaf(mu: f64) -> Self {
        CNode {
            var: Self::LEAF,
            threshold: 0.0,
            left: 0,
            right: 0,
            mu,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.var == Self::LEAF
    }
}

/// Evaluate one stored tree rooted at `nodes[0]`.
#[inline]
fn eval_tree(nodes: &[CNode], cols: &[&[f64]], row: usize) -> f64 {
    let mut i = 0usize;
    loop {
        let n = &nodes[i];
        if n.is_leaf() {
            return n.mu;
        }
        i += if cols[n.var as usize][row] < n.threshold { n.left } else { n.right } as usize;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BartModel {
    features: Vec<String>,
    center: f64,
    scale: f64,
    controls: BartControls,
    trees_per_draw: usize,
    n_draws: usize,
    nodes: Vec<CNode>,
    /// Start of tree `d * trees_per_draw + t` in `nodes`.
    offsets: Vec<u32>,
    /// Residual standard deviation per retained draw, outcome units.
    sigma: Vec<f64>,
    /// Grow/prune/change/swap acceptance rates pooled over chains.
    acceptance: [f64; 4],
}

/// Cutpoints of one column: midpoints between distinct values, or an even
/// grid of `numcut` interior points when there are more than `numcut + 1`.
fn cutpoints(values: &[f64], numcut: usize) -> Vec<f64> {
    let mut u = values.to_vec();
    u.sort_by(f64::total_cmp);
    u.dedup();
    if u.len() <= 1 {
        return Vec::new();
    }
    if u.len() <= numcut + 1 {
        return u.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    }
    let (lo, hi) = (u[0], u[u.len() - 1]);
    let step = (hi - lo) / (numcut + 1) as f64;
    (1..=numcut).map(|k| lo + step * k as f64).collect()
}

pub(crate) fn prepare(train: &FeatureTable, numcut: usize, y: Vec<f64>) -> Prepared {
    let cuts: Vec<Vec<f64>> = (0..train.n_cols()).map(|j| cutpoints(train.values(j), numcut)).collect();
    let bins = cuts
        .iter()
        .enumerate()
        .map(|(j, c)| {
            train
                .values(j)
                .iter()
                .map(|x| c.partition_point(|cut| cut <= x) as u32)
                .collect()
        })
        .collect();
    Prepared { bins, cuts, y }
}

/// Data-based residual scale estimate on the standardized outcome.
fn sigma_estimate(train: &FeatureTable, y: &[f64]) -> f64 {
    let n = y.len();
    let p = train.n_cols();
    let ols = (n > p + 1)
        .then(|| train.clone().with_outcome("y", y.to_vec()).ok())
        .flatten()
        .and_then(|t| fit_ols(&t).ok().map(|m| (m, t)));
    let est = match ols {
        Some((m, t)) => {
            let pred = m.predict(&t).unwrap_or_default();
            let rss: f64 = y.iter().zip(&pred).map(|(a, b)| (a - b) * (a - b)).sum();
            (rss / (n - p - 1) as f64).sqrt()
        }
        None => stats::sample_sd(y),
    };
    if est.is_finite() && est > 1e-3 {
        est
    } else {
        1e-3
    }
}

/// Per chain: compacted nodes, tree offsets, sigma draws, proposal and
/// acceptance counts.
type ChainDraws = (Vec<CNode>, Vec<u32>, Vec<f64>, [u64; 4], [u64; 4]);

pub fn fit_bart(train: &FeatureTable, controls: &BartControls) -> Result<BartModel> {
    controls.validate()?;
    let y = train.require_outcome()?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("outcome has non-finite values"));
    }
    let n = train.n_rows();
    if n < 10 {
        return Err(Error::config(format!("BART needs at least 10 rows, got {n}")));
    }
    if train.n_cols() == 0 {
        return Err(Error::config("BART needs at least one feature column"));
    }
    let (min, max) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let center = 0.5 * (min + max);
    let scale = if max > min { max - min } else { 1.0 };
    let ys: Vec<f64> = y.iter().map(|v| (v - center) / scale).collect();
    let sigma_hat = sigma_estimate(train, &ys);
    let chi = ChiSquared::new(controls.nu).map_err(|e| Error::config(e.to_string()))?;
    let lambda = sigma_hat * sigma_hat * chi.inverse_cdf(1.0 - controls.q) / controls.nu;
    let data = prepare(train, controls.numcut, ys);

    let m = controls.trees;
    let chains: Vec<ChainDraws> = (0..controls.chains)
        .into_par_iter()
        .map(|c| {
            let rng = stream(controls.seed, &[TAG_BART, c as u64]);
            let mut chain = Chain::new(&data, controls, sigma_hat, lambda, rng);
            let mut nodes = Vec::new();
            let mut offsets = Vec::new();
            let mut sigma = Vec::new();
            for it in 0..controls.iters {
                chain.step();
                if it >= controls.burn && (it - controls.burn).is_multiple_of(controls.thin) {
                    for t in &chain.trees {
                        offsets.push(nodes.len() as u32);
                        t.compact(&data.cuts, &mut nodes);
                    }
                    sigma.push(chain.sigma2.sqrt() * scale);
                }
            }
            (nodes, offsets, sigma, chain.proposed, chain.accepted)
        })
        .collect();

    let mut nodes = Vec::new();
    let mut offsets = Vec::new();
    let mut sigma = Vec::new();
    let (mut prop, mut acc) = ([0u64; 4], [0u64; 4]);
    for (cn, co, cs, p, a) in chains {
        let base = nodes.len() as u32;
        offsets.extend(co.into_iter().map(|o| o + base));
        nodes.extend(cn);
        sigma.extend(cs);
        for k in 0..4 {
            prop[k] += p[k];
            acc[k] += a[k];
        }
    }
    let acceptance = std::array::from_fn(|k| if prop[k] > 0 { acc[k] as f64 / prop[k] as f64 } else { 0.0 });
    let n_draws = sigma.len();
    debug_assert_eq!(offsets.len(), n_draws * m);
    Ok(BartModel {
        features: train.names(),
        center,
        scale,
        controls: controls.clone(),
        trees_per_draw: m,
        n_draws,
        nodes,
        offsets,
        sigma,
        acceptance,
    })
}

impl BartModel {
    pub fn n_draws(&self) -> usize {
        self.n_draws
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn controls(&self) -> &BartControls {
        &self.controls
    }

    pub fn sigma_draws(&self) -> &[f64] {
        &self.sigma
    }

    pub fn acceptance(&self) -> [f64; 4] {
        self.acceptance
    }

    /// Nodes of tree `t` in draw `d`.
    pub fn tree(&self, d: usize, t: usize) -> &[CNode] {
        let k = d * self.trees_per_draw + t;
        let start = self.offsets[k] as usize;
        let end = self.offsets.get(k + 1).map_or(self.nodes.len(), |&e| e as usize);
        &self.nodes[start..end]
    }

    /// Single-tree output on the standardized scale, for independent checks.
    pub fn tree_output(&self, d: usize, t: usize, table: &FeatureTable, row: usize) -> Result<f64> {
        let cols = self.bind(table)?;
        Ok(eval_tree(self.tree(d, t), &cols, row))
    }

    pub fn to_standard_units(&self, sum: f64) -> f64 {
        self.center + self.scale * sum
    }

    fn bind<'a>(&self, table: &'a FeatureTable) -> Result<Vec<&'a [f64]>> {
        self.features.iter().map(|f| table.require(f)).collect()
    }

    /// Per-draw predictions for every row of `table`.
    pub fn predict_posterior(&self, table: &FeatureTable) -> Result<Posterior> {
        let cols = self.bind(table)?;
        let q = table.n_rows();
        let d = self.n_draws;
        const CHUNK: usize = 256;
        let chunks: Vec<Vec<f64>> = (0..q.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let rows = c * CHUNK..((c + 1) * CHUNK).min(q);
                let w = rows.len();
                let mut out = vec![0.0; d * w];
                for draw in 0..d {
                    let acc = &mut out[draw * w..(draw + 1) * w];
                    for t in 0..self.trees_per_draw {
                        let tree = self.tree(draw, t);
                        for (slot, r) in acc.iter_mut().zip(rows.clone()) {
                            *slot += eval_tree(tree, &cols, r);
                        }
                    }
                    for slot in acc.iter_mut() {
                        *slot = self.center + self.scale * *slot;
                    }
                }
                out
            })
            .collect();
        let mut draws = vec![0.0; d * q];
        for (c, out) in chunks.iter().enumerate() {
            let start = c * CHUNK;
            let w = out.len() / d.max(1);
            for draw in 0..d {
                draws[draw * q + start..draw * q + start + w].copy_from_slice(&out[draw * w..(draw + 1) * w]);
            }
        }
        Ok(Posterior {
            n_draws: d,
            n_rows: q,
            draws,
            sigma: self.sigma.clone(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: BartModel = serde_json::from_str(s)?;
        if m.offsets.len() != m.n_draws * m.trees_per_draw || m.sigma.len() != m.n_draws {
            return Err(Error::input("bart json: draw layout is inconsistent"));
        }
        Ok(m)
    }
}

impl Predictor for BartModel {
    fn predict(&self, table: &FeatureTable) -> Result<Vec<f64>> {
        Ok(self.predict_posterior(table)?.mean())
    }
}

/// Posterior predictive draws, draw-major: `draws[d * n_rows + r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    pub n_draws: usize,
    pub n_rows: usize,
    pub draws: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl Posterior {
    pub fn draw(&self, d: usize) -> &[f64] {
        &self.draws[d * self.n_rows..(d + 1) * self.n_rows]
    }

    pub fn row(&self, r: usize) -> Vec<f64> {
        (0..self.n_draws).map(|d| self.draws[d * self.n_rows + r]).collect()
    }

    /// Pointwise posterior mean, summing draws in order.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n_rows];
        for d in 0..self.n_draws {
            for (a, v) in m.iter_mut().zip(self.draw(d)) {
                *a += v;
            }
        }
        m.iter().map(|s| s / self.n_draws as f64).collect()
    }

    /// Pointwise empirical quantile (linear interpolation).
    pub fn quantile(&self, p: f64) -> Vec<f64> {
        (0..self.n_rows).map(|r| stats::quantile(&self.row(r), p)).collect()
    }

    /// Pointwise 2.5% and 97.5% quantiles.
    pub fn interval95(&self) -> (Vec<f64>, Vec<f64>) {
        (self.quantile(0.025), self.quantile(0.975))
    }

    /// CSV with one line per draw and one column per query row.
    pub fn write_csv<W: std::io::Write>(&self, w: W, ids: &[String]) -> Result<()> {
        if ids.len() != self.n_rows {
            return Err(Error::input("one id per posterior row is required"));
        }
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        let mut header = vec!["draw".to_string()];
        header.extend(ids.iter().cloned());
        out.write_record(&header)?;
        for d in 0..self.n_draws {
            let mut rec = vec![d.to_string()];
            rec.extend(self.draw(d).iter().map(|v| fmt_f64(*v)));
            out.write_record(&rec)?;
        }
        out.flush().map_err(|e| Error::io("posterior csv", e))?;
        Ok(())
    }
}
