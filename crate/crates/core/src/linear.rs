//! Linear baselines: ordinary least squares and the cross-validated LASSO.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cart::fold_labels;
use crate::error::{Error, Result};
use crate::model::Predictor;
use crate::table::{Column, FeatureTable};

/// A fitted linear model on the original column scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub features: Vec<String>,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// Classical standard errors, intercept first. OLS only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_errors: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adj_r2: Option<f64>,
    /// Penalty; 0 for OLS.
    pub lambda: f64,
    /// Column means and 1/n standard deviations used for LASSO fitting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standardization: Option<Vec<(f64, f64)>>,
}

impl LinearModel {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.features
            .iter()
            .position(|f| f == name)
            .map(|j| self.coefficients[j])
    }
}

impl Predictor for LinearModel {
    fn predict(&self, table: &FeatureTable) -> Result<Vec<f64>> {
        let cols: Vec<&[f64]> = self
            .features
            .iter()
            .map(|f| table.require(f))
            .collect::<Result<_>>()?;
        Ok((0..table.n_rows())
            .map(|r| {
                let mut v = self.intercept;
                for (c, col) in self.coefficients.iter().zip(&cols) {
                    v += c * col[r];
                }
                v
            })
            .collect())
    }
}

fn check_finite(table: &FeatureTable, y: &[f64]) -> Result<()> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("outcome has non-finite values"));
    }
    for c in table.columns() {
        if c.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::input(format!("column '{}' has non-finite values", c.name)));
        }
    }
    Ok(())
}

/// Relative size below which a scaled R diagonal entry marks dependence.
const RANK_TOL: f64 = 1e-9;

pub fn fit_ols(train: &FeatureTable) -> Result<LinearModel> {
    let y = train.require_outcome()?;
    check_finite(train, y)?;
    let (n, p) = (train.n_rows(), train.n_cols());
    if n <= p + 1 {
        return Err(Error::config(format!(
            "OLS needs more rows than coefficients: {n} rows, {} coefficients",
            p + 1
        )));
    }
    // Columns are scaled to unit norm so the rank test is scale-free.
    let mut scale = vec![1.0; p + 1];
    let mut x = DMatrix::<f64>::zeros(n, p + 1);
    x.column_mut(0).fill(1.0);
    scale[0] = (n as f64).sqrt();
    for j in 0..p {
        let v = train.values(j);
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        scale[j + 1] = if norm > 0.0 { norm } else { 1.0 };
        for (r, &a) in v.iter().enumerate() {
            x[(r, j + 1)] = a;
        }
    }
    let mut xs = x.clone();
    for (j, s) in scale.iter().enumerate() {
        xs.column_mut(j).scale_mut(1.0 / s);
    }
    let qr = xs.qr();
    let rmat = qr.r();
    let name = |j: usize| if j == 0 { "(intercept)".to_string() } else { train.names()[j - 1].clone() };
    for j in 0..=p {
        if rmat[(j, j)].abs() < RANK_TOL {
            // Express column j through the earlier ones to name the set.
            let mut deps = Vec::new();
            if j > 0 {
                let head = rmat.view((0, 0), (j, j)).into_owned();
                let rhs = rmat.view((0, j), (j, 1)).into_owned();
                if let Some(b) = head.solve_upper_triangular(&rhs) {
                    deps = (0..j).filter(|&i| b[i].abs() > 1e-8).map(name).collect();
                }
            }
            return Err(Error::numerical(format!(
                "rank-deficient design: '{}' is a linear combination of [{}]",
                name(j),
                deps.join(", ")
            )));
        }
    }
    let yv = DVector::from_column_slice(y);
    let qty = qr.q().transpose() * &yv;
    let beta_s = rmat
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::numerical("OLS triangular solve failed"))?;
    let beta: Vec<f64> = (0..=p).map(|j| beta_s[j] / scale[j]).collect();

    let fitted = &x * DVector::from_column_slice(&beta);
    let rss: f64 = (0..n).map(|r| (y[r] - fitted[r]).powi(2)).sum();
    let ybar = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    let df = (n - p - 1) as f64;
    let sigma2 = rss / df;
    let rinv = rmat
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::numerical("OLS: R is singular"))?;
    let se: Vec<f64> = (0..=p)
        .map(|j| (sigma2 * rinv.row(j).norm_squared()).sqrt() / scale[j])
        .collect();
    let adj_r2 = (tss > 0.0).then(|| 1.0 - (rss / df) / (tss / (n as f64 - 1.0)));
    Ok(LinearModel {
        features: train.names(),
        intercept: beta[0],
        coefficients: beta[1..].to_vec(),
        std_errors: Some(se),
        adj_r2,
        lambda: 0.0,
        standardization: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LassoControls {
    pub n_lambda: usize,
    /// Smallest lambda as a fraction of lambda_max.
    pub min_ratio: f64,
    /// Explicit decreasing path; overrides `n_lambda`/`min_ratio`.
    pub lambdas: Option<Vec<f64>>,
    pub folds: usize,
    pub seed: u64,
    /// Converged once no standardized coefficient moves by more than
    /// `sqrt(tol * var(y))` in a sweep.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoControls {
    fn default() -> Self {
        LassoControls {
            n_lambda: 100,
            min_ratio: 1e-4,
            lambdas: None,
            folds: 10,
            seed: 0,
            tol: 1e-7,
            max_sweeps: 100_000,
        }
    }
}

/// Standardized problem: Gram matrix and correlations with the centered outcome.
struct Standardized {
    means: Vec<f64>,
    sds: Vec<f64>,
    ybar: f64,
    ysd: f64,
    /// `Z'Z / n`, row-major p x p.
    gram: Vec<f64>,
    /// `Z'(y - ybar) / n`.
    corr: Vec<f64>,
}

impl Standardized {
    fn new(cols: &[&[f64]], y: &[f64], rows: &[usize]) -> Self {
        let p = cols.len();
        let n = rows.len() as f64;
        let ybar = rows.iter().map(|&r| y[r]).sum::<f64>() / n;
        let ysd = (rows.iter().map(|&r| (y[r] - ybar).powi(2)).sum::<f64>() / n).sqrt();
        let mut means = vec![0.0; p];
        let mut sds = vec![0.0; p];
        let mut z: Vec<Vec<f64>> = Vec::with_capacity(p);
        for j in 0..p {
            let m = rows.iter().map(|&r| cols[j][r]).sum::<f64>() / n;
            let v = rows.iter().map(|&r| (cols[j][r] - m).powi(2)).sum::<f64>() / n;
            let sd = v.sqrt();
            means[j] = m;
            sds[j] = sd;
            // Constant columns stay all-zero and never enter the model.
            let inv = if sd > 0.0 { 1.0 / sd } else { 0.0 };
            z.push(rows.iter().map(|&r| (cols[j][r] - m) * inv).collect());
        }
        let mut gram = vec![0.0; p * p];
        for a in 0..p {
            for b in a..p {
                let g = z[a].iter().zip(&z[b]).map(|(u, v)| u * v).sum::<f64>() / n;
                gram[a * p + b] = g;
                gram[b * p + a] = g;
            }
        }
        let corr = z
            .iter()
            .map(|zj| zj.iter().zip(rows).map(|(u, &r)| u * (y[r] - ybar)).sum::<f64>() / n)
            .collect();
        Standardized {
            means,
            sds,
            ybar,
            ysd,
            gram,
            corr,
        }
    }

    fn p(&self) -> usize {
        self.means.len()
    }

    fn lambda_max(&self) -> f64 {
        self.corr.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// `<z_j, r>/n` for the residual at `beta`.
    fn gradient(&self, beta: &[f64], j: usize) -> f64 {
        let p = self.p();
        let row = &self.gram[j * p..(j + 1) * p];
        self.corr[j] - row.iter().zip(beta).map(|(g, b)| g * b).sum::<f64>()
    }

    /// Coordinate descent from a warm start; returns sweeps used.
    fn solve(&self, lambda: f64, beta: &mut [f64], tol: f64, max_sweeps: usize) -> Result<usize> {
        let p = self.p();
        let tol = (tol * self.ysd * self.ysd).sqrt().max(f64::MIN_POSITIVE);
        let live: Vec<usize> = (0..p).filter(|&j| self.sds[j] > 0.0).collect();
        let mut sweeps = 0;
        loop {
            // Full sweep, then iterate on the active set until it settles.
            let mut delta = self.sweep(lambda, beta, &live);
            sweeps += 1;
            if delta < tol {
                self.polish(lambda, beta, &live);
                return Ok(sweeps);
            }
            if sweeps >= max_sweeps {
                return Err(Error::numerical(format!(
                    "coordinate descent did not converge at lambda {lambda}"
                )));
            }
            loop {
                let active: Vec<usize> = live.iter().copied().filter(|&j| beta[j] != 0.0).collect();
                delta = self.sweep(lambda, beta, &active);
                sweeps += 1;
                if delta < tol {
                    break;
                }
                if sweeps >= max_sweeps {
                    return Err(Error::numerical(format!(
                        "coordinate descent did not converge at lambda {lambda}"
                    )));
                }
            }
        }
    }

    /// Replace a converged iterate by the exact solution on its active set,
    /// `G_AA b_A = c_A - lambda s_A`, when that solution keeps every sign and
    /// leaves every inactive gradient within `lambda`. Otherwise keep `beta`.
    fn polish(&self, lambda: f64, beta: &mut [f64], live: &[usize]) {
        let p = self.p();
        let active: Vec<usize> = live.iter().copied().filter(|&j| beta[j] != 0.0).collect();
        if active.is_empty() {
            return;
        }
        let k = active.len();
        let g = DMatrix::from_fn(k, k, |a, b| self.gram[active[a] * p + active[b]]);
        let rhs = DVector::from_fn(k, |a, _| self.corr[active[a]] - lambda * beta[active[a]].signum());
        let Some(chol) = g.cholesky() else {
            return;
        };
        let sol = chol.solve(&rhs);
        let mut cand = beta.to_vec();
        for (a, &j) in active.iter().enumerate() {
            if !sol[a].is_finite() || sol[a] == 0.0 || sol[a].signum() != beta[j].signum() {
                return;
            }
            cand[j] = sol[a];
        }
        let slack = 1e-9 * self.ysd.max(lambda);
        for &j in live {
            if cand[j] == 0.0 && self.gradient(&cand, j).abs() > lambda + slack {
                return;
            }
        }
        beta.copy_from_slice(&cand);
    }

    fn sweep(&self, lambda: f64, beta: &mut [f64], coords: &[usize]) -> f64 {
        let mut delta: f64 = 0.0;
        for &j in coords {
            let old = beta[j];
            let z = self.gradient(beta, j) + old;
            let new = soft_threshold(z, lambda);
            if new != old {
                beta[j] = new;
                delta = delta.max((new - old).abs());
            }
        }
        delta
    }

    fn to_model(&self, names: &[String], beta: &[f64], lambda: f64) -> LinearModel {
        let coefficients: Vec<f64> = beta
            .iter()
            .zip(&self.sds)
            .map(|(b, sd)| if *sd > 0.0 { b / sd } else { 0.0 })
            .collect();
        let intercept = self.ybar
            - coefficients
                .iter()
                .zip(&self.means)
                .map(|(c, m)| c * m)
                .sum::<f64>();
        LinearModel {
            features: names.to_vec(),
            intercept,
            coefficients,
            std_errors: None,
            adj_r2: None,
            lambda,
            standardization: Some(self.means.iter().copied().zip(self.sds.iter().copied()).collect()),
        }
    }
}

pub fn soft_threshold(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

/// Solutions along a decreasing penalty path.
#[derive(Debug, Clone)]
pub struct LassoPath {
    pub lambdas: Vec<f64>,
    pub models: Vec<LinearModel>,
    /// Coefficients on the standardized scale, one vector per lambda.
    pub standardized: Vec<Vec<f64>>,
}

impl LassoPath {
    /// Largest `|<z_j, r>/n| - lambda` violation over inactive columns and
    /// largest `|<z_j, r>/n - lambda sign(b_j)|` over active ones.
    pub fn kkt_violation(&self, train: &FeatureTable) -> Result<f64> {
        let y = train.require_outcome()?;
        let cols: Vec<&[f64]> = (0..train.n_cols()).map(|j| train.values(j)).collect();
        let rows: Vec<usize> = (0..train.n_rows()).collect();
        let s = Standardized::new(&cols, y, &rows);
        let n = rows.len() as f64;
        let mut worst: f64 = 0.0;
        for (lambda, beta) in self.lambdas.iter().zip(&self.standardized) {
            // Explicit residuals rather than the Gram shortcut used by the solver.
            let resid: Vec<f64> = rows
                .iter()
                .map(|&r| {
                    let mut f = s.ybar;
                    for j in 0..s.p() {
                        if s.sds[j] > 0.0 {
                            f += beta[j] * (cols[j][r] - s.means[j]) / s.sds[j];
                        }
                    }
                    y[r] - f
                })
                .collect();
            for j in 0..s.p() {
                if s.sds[j] == 0.0 {
                    continue;
                }
                let g = rows
                    .iter()
                    .map(|&r| (cols[j][r] - s.means[j]) / s.sds[j] * resid[r])
                    .sum::<f64>()
                    / n;
                let v = if beta[j] != 0.0 {
                    (g - lambda * beta[j].signum()).abs()
                } else {
                    (g.abs() - lambda).max(0.0)
                };
                worst = worst.max(v);
            }
        }
        Ok(worst)
    }
}

fn path_lambdas(s: &Standardized, controls: &LassoControls) -> Result<Vec<f64>> {
    if let Some(l) = &controls.lambdas {
        if l.is_empty() || l.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::config("lambda path must be non-empty, finite and >= 0"));
        }
        if l.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::config("lambda path must be non-increasing"));
        }
        return Ok(l.clone());
    }
    if controls.n_lambda == 0 || !(controls.min_ratio > 0.0 && controls.min_ratio < 1.0) {
        return Err(Error::config("need n_lambda >= 1 and 0 < min_ratio < 1"));
    }
    let max = s.lambda_max();
    if max == 0.0 {
        return Ok(vec![0.0]);
    }
    let k = controls.n_lambda;
    if k == 1 {
        return Ok(vec![max]);
    }
    let step = controls.min_ratio.ln() / (k - 1) as f64;
    Ok((0..k).map(|i| max * (step * i as f64).exp()).collect())
}

fn solve_path(s: &Standardized, lambdas: &[f64], controls: &LassoControls) -> Result<Vec<Vec<f64>>> {
    let mut beta = vec![0.0; s.p()];
    let mut out = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        s.solve(l, &mut beta, controls.tol, controls.max_sweeps)?;
        out.push(beta.clone());
    }
    Ok(out)
}

/// LASSO solutions over the whole penalty path on `train`.
pub fn lasso_path(train: &FeatureTable, controls: &LassoControls) -> Result<LassoPath> {
    let y = train.require_outcome()?;
    check_finite(train, y)?;
    if train.n_rows() < 2 {
        return Err(Error::input("LASSO needs at least two rows"));
    }
    let cols: Vec<&[f64]> = (0..train.n_cols()).map(|j| train.values(j)).collect();
    let rows: Vec<usize> = (0..train.n_rows()).collect();
    let s = Standardized::new(&cols, y, &rows);
    let lambdas = path_lambdas(&s, controls)?;
    let standardized = solve_path(&s, &lambdas, controls)?;
    let names = train.names();
    let models = lambdas
        .iter()
        .zip(&standardized)
        .map(|(&l, b)| s.to_model(&names, b, l))
        .collect();
    Ok(LassoPath {
        lambdas,
        models,
        standardized,
    })
}

#[derive(Debug, Clone)]
pub struct LassoFit {
    pub model: LinearModel,
    pub lambda: f64,
    /// `(lambda, pooled CV MSE)` along the path.
    pub cv_mse: Vec<(f64, f64)>,
}

/// LASSO with the penalty chosen by K-fold cross-validation (minimum error).
pub fn fit_lasso(train: &FeatureTable, controls: &LassoControls) -> Result<LassoFit> {
    let y = train.require_outcome()?;
    check_finite(train, y)?;
    let n = train.n_rows();
    if controls.folds < 2 || n < controls.folds {
        return Err(Error::config(format!(
            "LASSO CV needs 2 <= folds <= rows, got {} folds for {n} rows",
            controls.folds
        )));
    }
    let path = lasso_path(train, controls)?;
    let cols: Vec<&[f64]> = (0..train.n_cols()).map(|j| train.values(j)).collect();
    let labels = fold_labels(n, controls.folds, controls.seed);
    let fold_sse: Vec<Vec<f64>> = (0..controls.folds)
        .into_par_iter()
        .map(|k| -> Result<Vec<f64>> {
            let (fit_rows, held): (Vec<usize>, Vec<usize>) = (0..n).partition(|&r| labels[r] != k);
            let s = Standardized::new(&cols, y, &fit_rows);
            let betas = solve_path(&s, &path.lambdas, controls)?;
            Ok(betas
                .iter()
                .map(|b| {
                    held.iter()
                        .map(|&r| {
                            let mut f = s.ybar;
                            for j in 0..s.p() {
                                if s.sds[j] > 0.0 {
                                    f += b[j] * (cols[j][r] - s.means[j]) / s.sds[j];
                                }
                            }
                            (y[r] - f).powi(2)
                        })
                        .sum()
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let cv_mse: Vec<(f64, f64)> = path
        .lambdas
        .iter()
        .enumerate()
        .map(|(i, &l)| (l, fold_sse.iter().map(|f| f[i]).sum::<f64>() / n as f64))
        .collect();
    // Lambdas decrease along the path, so the first minimum is the largest penalty.
    let mut best = 0;
    for (i, c) in cv_mse.iter().enumerate() {
        if c.1 < cv_mse[best].1 {
            best = i;
        }
    }
    Ok(LassoFit {
        model: path.models[best].clone(),
        lambda: path.lambdas[best],
        cv_mse,
    })
}

/// Near/far by size indicators: `near_small = (d < cutoff) & (size <= size_cutoff)`,
/// `near_large = (d < cutoff) & (size > size_cutoff)`.
pub fn threshold_dummies(
    table: &FeatureTable,
    distance: &str,
    cutoff: f64,
    size: &str,
    size_cutoff: f64,
) -> Result<[Column; 2]> {
    if !cutoff.is_finite() || !size_cutoff.is_finite() {
        return Err(Error::config("dummy cutoffs must be finite"));
    }
    let d = table.require(distance)?;
    let s = table.require(size)?;
    let near_small = d
        .iter()
        .zip(s)
        .map(|(&d, &s)| f64::from(u8::from(d < cutoff && s <= size_cutoff)))
        .collect();
    let near_large = d
        .iter()
        .zip(s)
        .map(|(&d, &s)| f64::from(u8::from(d < cutoff && s > size_cutoff)))
        .collect();
    Ok([
        Column::numeric("near_small", near_small),
        Column::numeric("near_large", near_large),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::Rng;
    use rand::{Rng as _, SeedableRng};
    use rand_distr::{Distribution, Normal};

    fn make(x: Vec<Vec<f64>>, y: Vec<f64>) -> FeatureTable {
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

    fn random_problem(seed: u64, n: usize, p: usize) -> FeatureTable {
        let mut rng = Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let x: Vec<Vec<f64>> = (0..p)
            .map(|j| (0..n).map(|_| normal.sample(&mut rng) * (1.0 + j as f64)).collect())
            .collect();
        let y = (0..n)
            .map(|r| {
                1.0 + x.iter().enumerate().map(|(j, c)| c[r] * if j % 2 == 0 { 0.5 } else { 0.0 }).sum::<f64>()
                    + normal.sample(&mut rng)
            })
            .collect();
        make(x, y)
    }

    /// Normal equations solved by Gauss-Jordan elimination with partial pivoting.
    #[allow(clippy::needless_range_loop)]
    fn normal_equations(t: &FeatureTable) -> Vec<f64> {
        let (n, p) = (t.n_rows(), t.n_cols() + 1);
        let y = t.outcome().unwrap();
        let col = |j: usize, r: usize| if j == 0 { 1.0 } else { t.values(j - 1)[r] };
        let mut a = vec![vec![0.0; p + 1]; p];
        for i in 0..p {
            for j in 0..p {
                a[i][j] = (0..n).map(|r| col(i, r) * col(j, r)).sum();
            }
            a[i][p] = (0..n).map(|r| col(i, r) * y[r]).sum();
        }
        for c in 0..p {
            let piv = (c..p).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
            a.swap(c, piv);
            for i in 0..p {
                if i != c {
                    let f = a[i][c] / a[c][c];
                    for k in c..=p {
                        a[i][k] -= f * a[c][k];
                    }
                }
            }
        }
        (0..p).map(|i| a[i][p] / a[i][i]).collect()
    }

    #[test]
    fn noiseless_line() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y = x.iter().map(|v| 3.0 + 2.0 * v).collect();
        let m = fit_ols(&make(vec![x], y)).unwrap();
        assert!((m.intercept - 3.0).abs() < 1e-12);
        assert!((m.coefficients[0] - 2.0).abs() < 1e-12);
        assert!(m.std_errors.unwrap().iter().all(|s| *s < 1e-12));
    }

    #[test]
    fn ols_matches_normal_equations_and_residuals_are_orthogonal() {
        let t = random_problem(1, 200, 5);
        let m = fit_ols(&t).unwrap();
        let oracle = normal_equations(&t);
        assert!((m.intercept - oracle[0]).abs() < 1e-8);
        for j in 0..5 {
            assert!((m.coefficients[j] - oracle[j + 1]).abs() < 1e-8);
        }
        let pred = m.predict(&t).unwrap();
        let y = t.outcome().unwrap();
        let r: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
        assert!(r.iter().sum::<f64>().abs() < 1e-8);
        for j in 0..5 {
            let dot: f64 = t.values(j).iter().zip(&r).map(|(a, b)| a * b).sum();
            assert!(dot.abs() < 1e-8, "column {j}: {dot}");
        }
    }

    #[test]
    fn ols_standard_errors_and_adjusted_r2() {
        let t = random_problem(2, 60, 2);
        let m = fit_ols(&t).unwrap();
        let (n, p) = (60.0, 2.0);
        let y = t.outcome().unwrap();
        let pred = m.predict(&t).unwrap();
        let rss: f64 = y.iter().zip(&pred).map(|(a, b)| (a - b).powi(2)).sum();
        let ybar = y.iter().sum::<f64>() / n;
        let tss: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
        let adj = 1.0 - (1.0 - (1.0 - rss / tss)) * (n - 1.0) / (n - p - 1.0);
        assert!((m.adj_r2.unwrap() - adj).abs() < 1e-12);
        // Slope SE for one column: sigma / sqrt(Sxx) when the columns are uncorrelated
        // is not exact here, so compare against the inverse of X'X directly.
        let x0 = t.values(0);
        let x1 = t.values(1);
        let s = |a: &dyn Fn(usize) -> f64, b: &dyn Fn(usize) -> f64| (0..60).map(|r| a(r) * b(r)).sum::<f64>();
        let one = |_r: usize| 1.0;
        let f0 = |r: usize| x0[r];
        let f1 = |r: usize| x1[r];
        let g = nalgebra::Matrix3::new(
            s(&one, &one), s(&one, &f0), s(&one, &f1),
            s(&f0, &one), s(&f0, &f0), s(&f0, &f1),
            s(&f1, &one), s(&f1, &f0), s(&f1, &f1),
        );
        let inv = g.try_inverse().unwrap();
        let sigma2 = rss / (n - p - 1.0);
        let se = m.std_errors.unwrap();
        for j in 0..3 {
            assert!((se[j] - (sigma2 * inv[(j, j)]).sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn rank_deficiency_names_dependent_columns() {
        let mut rng = Rng::seed_from_u64(3);
        let a: Vec<f64> = (0..30).map(|_| rng.random()).collect();
        let b: Vec<f64> = (0..30).map(|_| rng.random()).collect();
        let c: Vec<f64> = a.iter().zip(&b).map(|(u, v)| u + 2.0 * v).collect();
        let t = make(vec![a, b, c], (0..30).map(f64::from).collect());
        let err = fit_ols(&t).unwrap_err().to_string();
        assert!(err.contains("'x2'") && err.contains("x0") && err.contains("x1"), "{err}");
    }

    #[test]
    fn ols_predictions_invariant_to_affine_rescaling() {
        let t = random_problem(4, 100, 3);
        let base = fit_ols(&t).unwrap().predict(&t).unwrap();
        let mut t2 = t.clone();
        let v: Vec<f64> = t.values(1).iter().map(|x| 1000.0 * x - 17.0).collect();
        t2.set_values(1, v);
        let other = fit_ols(&t2).unwrap().predict(&t2).unwrap();
        for (a, b) in base.iter().zip(&other) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn lambda_max_zeroes_every_slope() {
        let t = random_problem(5, 80, 4);
        let path = lasso_path(&t, &LassoControls::default()).unwrap();
        let m = &path.models[0];
        assert!(m.coefficients.iter().all(|c| *c == 0.0));
        let ybar = t.outcome().unwrap().iter().sum::<f64>() / 80.0;
        assert!((m.intercept - ybar).abs() < 1e-12);
        assert!(path.models[1].coefficients.iter().any(|c| *c != 0.0));
        let big = lasso_path(&t, &LassoControls { lambdas: Some(vec![path.lambdas[0] * 3.0]), ..LassoControls::default() }).unwrap();
        assert!(big.models[0].coefficients.iter().all(|c| *c == 0.0));
    }

    #[test]
    fn zero_penalty_matches_ols() {
        let t = random_problem(6, 200, 5);
        let ols = fit_ols(&t).unwrap();
        let path = lasso_path(&t, &LassoControls { lambdas: Some(vec![0.0]), ..LassoControls::default() }).unwrap();
        let m = &path.models[0];
        assert!((m.intercept - ols.intercept).abs() < 1e-6);
        for (a, b) in m.coefficients.iter().zip(&ols.coefficients) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn orthonormal_design_soft_thresholds() {
        // Walsh columns on 16 rows: mean 0, variance 1, mutually orthogonal.
        let n = 16;
        let x: Vec<Vec<f64>> = [1usize, 2, 4, 8, 3]
            .iter()
            .map(|&mask| (0..n).map(|r: usize| if (r & mask).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 }).collect())
            .collect();
        let mut rng = Rng::seed_from_u64(7);
        let y: Vec<f64> = (0..n).map(|r| 0.5 + 2.0 * x[0][r] - 0.7 * x[1][r] + 0.2 * x[4][r] + rng.random::<f64>()).collect();
        let t = make(x, y);
        let ols = fit_ols(&t).unwrap();
        for lambda in [0.0, 0.1, 0.3, 0.8, 1.5, 5.0] {
            let path = lasso_path(
                &t,
                &LassoControls {
                    lambdas: Some(vec![lambda]),
                    ..LassoControls::default()
                },
            )
            .unwrap();
            for (a, b) in path.models[0].coefficients.iter().zip(&ols.coefficients) {
                assert!((a - soft_threshold(*b, lambda)).abs() < 1e-8, "lambda {lambda}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn nearly_collinear_columns_still_converge() {
        let mut rng = Rng::seed_from_u64(9);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let a: Vec<f64> = (0..300).map(|_| normal.sample(&mut rng)).collect();
        let b: Vec<f64> = a.iter().map(|v| v + 1e-7 * normal.sample(&mut rng)).collect();
        let c: Vec<f64> = (0..300).map(|_| normal.sample(&mut rng)).collect();
        let y = (0..300).map(|r| a[r] - 0.5 * c[r] + 0.3 * normal.sample(&mut rng)).collect();
        let t = make(vec![a, b, c], y);
        let path = lasso_path(&t, &LassoControls::default()).unwrap();
        // Too ill-conditioned for the exact active-set solve; only the
        // stopping rule bounds the residual here.
        assert!(path.kkt_violation(&t).unwrap() < 1e-4);
        fit_lasso(&t, &LassoControls::default()).unwrap();
    }

    #[test]
    fn kkt_holds_along_the_path() {
        for seed in 0..20 {
            let t = random_problem(100 + seed, 120, 6);
            let path = lasso_path(&t, &LassoControls::default()).unwrap();
            assert_eq!(path.lambdas.len(), 100);
            let ratio = path.lambdas[99] / path.lambdas[0];
            assert!((ratio - 1e-4).abs() < 1e-12);
            assert!(path.kkt_violation(&t).unwrap() < 1e-6);
        }
    }

    #[test]
    fn active_set_mostly_grows_as_lambda_falls() {
        let mut monotone = 0;
        for seed in 0..50 {
            let t = random_problem(200 + seed, 50, 8);
            let path = lasso_path(&t, &LassoControls::default()).unwrap();
            let counts: Vec<usize> = path
                .models
                .iter()
                .map(|m| m.coefficients.iter().filter(|c| **c != 0.0).count())
                .collect();
            if counts.windows(2).all(|w| w[1] >= w[0]) {
                monotone += 1;
            }
        }
        assert!(monotone >= 45, "{monotone}/50");
    }

    #[test]
    fn constant_column_gets_zero_coefficient() {
        let mut t = random_problem(8, 60, 3);
        t.set_values(2, vec![4.0; 60]);
        let fit = fit_lasso(&t, &LassoControls::default()).unwrap();
        assert_eq!(fit.model.coefficients[2], 0.0);
    }

    #[test]
    fn cv_is_deterministic_and_checks_folds() {
        let t = random_problem(9, 100, 4);
        let c = LassoControls { seed: 3, ..LassoControls::default() };
        let a = fit_lasso(&t, &c).unwrap();
        let b = fit_lasso(&t, &c).unwrap();
        assert_eq!(a.model, b.model);
        assert!(a.lambda > 0.0);
        let small = random_problem(9, 8, 2);
        assert!(matches!(fit_lasso(&small, &c), Err(Error::Config(_))));
        let json = serde_json::to_string(&a.model).unwrap();
        let back: LinearModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a.model);
    }

    #[test]
    fn dummy_coding() {
        let t = FeatureTable::from_columns(vec![
            Column::numeric("dist", vec![0.2, 0.3, 0.05, 0.2]),
            Column::numeric("size", vec![2.0, 2.0, 5.0, 3.0]),
        ])
        .unwrap();
        let [small, large] = threshold_dummies(&t, "dist", 0.25, "size", 3.0).unwrap();
        assert_eq!(small.name, "near_small");
        assert_eq!(small.values, vec![1.0, 0.0, 0.0, 1.0]);
        assert_eq!(large.values, vec![0.0, 0.0, 1.0, 0.0]);
        let [small, large] = threshold_dummies(&t, "dist", 0.1, "size", 3.0).unwrap();
        assert_eq!(small.values, vec![0.0, 0.0, 0.0, 0.0]);
        assert_eq!(large.values, vec![0.0, 0.0, 1.0, 0.0]);
        assert!(threshold_dummies(&t, "dist", f64::NAN, "size", 3.0).is_err());
        assert!(threshold_dummies(&t, "nope", 0.1, "size", 3.0).is_err());
    }
}
