//! Effect curves: predictions for one profile as a single feature sweeps a
//! grid, and their differences from a baseline grid point.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::importance::LocalImportance;
use crate::model::{FittedModel, Predictor};
use crate::stats;
use crate::table::{fmt_f64, Column, FeatureTable, Indicator};

/// A complete feature row.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub id: String,
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl Profile {
    pub fn from_row(table: &FeatureTable, row: usize) -> Self {
        Profile {
            id: table.ids()[row].clone(),
            names: table.names(),
            values: table.columns().iter().map(|c| c.values[row]).collect(),
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    fn set(&mut self, name: &str, v: f64) -> Result<()> {
        let i = self
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::input(format!("profile has no column '{name}'")))?;
        self.values[i] = v;
        Ok(())
    }

    /// Override an attribute. `name` is either a numeric column (value
    /// parsed as a number) or the group of a one-hot block (value is a
    /// level; the reference level clears every indicator).
    pub fn with_override(&self, name: &str, value: &str) -> Result<Profile> {
        let mut p = self.clone();
        if p.get(name).is_some() {
            let v: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::input(format!("override {name}={value}: not a number")))?;
            p.set(name, v)?;
            return Ok(p);
        }
        let block: Vec<usize> = (0..p.names.len())
            .filter(|&i| Indicator::parse(&p.names[i]).is_some_and(|ind| ind.group == name))
            .collect();
        if block.is_empty() {
            return Err(Error::input(format!("profile has no column or group '{name}'")));
        }
        for &i in &block {
            p.values[i] = 0.0;
        }
        if let Some(&i) = block.iter().find(|&&i| p.names[i] == Indicator::column_name(name, value)) {
            p.values[i] = 1.0;
        }
        Ok(p)
    }

    /// One row per grid value, with `feature` set to that value.
    pub fn sweep_table(&self, feature: &str, grid: &[f64]) -> Result<FeatureTable> {
        let j = self
            .names
            .iter()
            .position(|n| n == feature)
            .ok_or_else(|| Error::input(format!("profile has no column '{feature}'")))?;
        let cols = self
            .names
            .iter()
            .zip(&self.values)
            .enumerate()
            .map(|(i, (name, &v))| {
                let values = if i == j { grid.to_vec() } else { vec![v; grid.len()] };
                Column {
                    name: name.clone(),
                    values,
                    indicator: Indicator::parse(name),
                }
            })
            .collect();
        FeatureTable::new((0..grid.len()).map(|g| format!("{}@{g}", self.id)).collect(), cols)
    }

    pub fn to_table(&self) -> Result<FeatureTable> {
        let cols = self
            .names
            .iter()
            .zip(&self.values)
            .map(|(name, &v)| Column {
                name: name.clone(),
                values: vec![v],
                indicator: Indicator::parse(name),
            })
            .collect();
        FeatureTable::new(vec![self.id.clone()], cols)
    }

    /// One-row CSV `id,<features...>`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        self.to_table()?.write_csv(w)
    }

    /// First data row of a CSV written by [`Profile::write_csv`] or of any
    /// feature table.
    pub fn read_csv<R: Read>(r: R) -> Result<Profile> {
        let t = FeatureTable::read_csv(r, None)?;
        if t.n_rows() == 0 {
            return Err(Error::input("profile file has no rows"));
        }
        Ok(Profile::from_row(&t, 0))
    }
}

/// The test row with the largest local importance for `feature` (first row
/// on ties, so an all-zero column picks row 0), and a copy with `overrides`
/// applied.
pub fn pick_profile(
    local: &LocalImportance,
    test: &FeatureTable,
    feature: &str,
    overrides: &[(String, String)],
) -> Result<(Profile, Profile)> {
    let col = local
        .column(feature)
        .ok_or_else(|| Error::input(format!("local importance has no feature '{feature}'")))?;
    if col.is_empty() {
        return Err(Error::input("local importance matrix is empty"));
    }
    let mut best = 0;
    for (i, &v) in col.iter().enumerate() {
        if v > col[best] {
            best = i;
        }
    }
    let id = &local.ids[best];
    let row = test
        .ids()
        .iter()
        .position(|t| t == id)
        .ok_or_else(|| Error::input(format!("row id '{id}' is not in the test table")))?;
    let base = Profile::from_row(test, row);
    let mut other = base.clone();
    for (name, value) in overrides {
        other = other.with_override(name, value)?;
    }
    Ok((base, other))
}

/// Grid from `lo:hi:step` or a comma list. Generated points are rounded to
/// 12 decimals so that `0:1:0.1` yields exactly the literals 0.1, 0.2, ...
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let num = |t: &str| -> Result<f64> {
        let v: f64 = t
            .trim()
            .parse()
            .map_err(|_| Error::config(format!("grid: '{t}' is not a number")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::config("grid values must be finite"))
        }
    };
    let parts: Vec<&str> = s.split(':').collect();
    let grid = match parts.as_slice() {
        [lo, hi, step] => {
            let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
            if step <= 0.0 || hi < lo {
                return Err(Error::config("grid: need lo <= hi and step > 0"));
            }
            let n = ((hi - lo) / step + 1e-9).floor() as usize;
            (0..=n)
                .map(|i| ((lo + i as f64 * step) * 1e12).round() / 1e12)
                .collect()
        }
        [list] => list.split(',').map(num).collect::<Result<Vec<f64>>>()?,
        _ => return Err(Error::config(format!("grid: cannot parse '{s}'"))),
    };
    if grid.is_empty() {
        return Err(Error::config("grid is empty"));
    }
    Ok(grid)
}

/// Lower/upper band around each grid point; absent for point models.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectCurve {
    pub feature: String,
    pub grid: Vec<f64>,
    pub baseline: f64,
    pub pred_mean: Vec<f64>,
    pub pred_band: Option<Band>,
    pub effect_mean: Vec<f64>,
    pub effect_band: Option<Band>,
}

impl EffectCurve {
    /// CSV `grid,pred_mean,pred_lo,pred_hi,effect_mean,effect_lo,effect_hi`;
    /// band cells are empty for point models.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        wr.write_record([
            "grid",
            "pred_mean",
            "pred_lo",
            "pred_hi",
            "effect_mean",
            "effect_lo",
            "effect_hi",
        ])?;
        let cell = |b: &Option<Band>, i: usize, hi: bool| match b {
            Some(b) => fmt_f64(if hi { b.hi[i] } else { b.lo[i] }),
            None => String::new(),
        };
        for i in 0..self.grid.len() {
            wr.write_record([
                fmt_f64(self.grid[i]),
                fmt_f64(self.pred_mean[i]),
                cell(&self.pred_band, i, false),
                cell(&self.pred_band, i, true),
                fmt_f64(self.effect_mean[i]),
                cell(&self.effect_band, i, false),
                cell(&self.effect_band, i, true),
            ])?;
        }
        wr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

fn baseline_index(grid: &[f64], baseline: f64) -> Result<usize> {
    grid.iter()
        .position(|&g| (g - baseline).abs() <= 1e-9 * baseline.abs().max(1.0))
        .ok_or_else(|| Error::config(format!("baseline {baseline} is not a grid point")))
}

/// Sweep `feature` over `grid` for `profile`. With posterior draws, the
/// effect at each grid point is differenced from the baseline within each
/// draw before summarizing; without, the curve is the point-prediction
/// difference and carries no bands.
pub fn sweep(model: &FittedModel, profile: &Profile, feature: &str, grid: &[f64], baseline: f64) -> Result<EffectCurve> {
    if grid.is_empty() || grid.iter().any(|g| !g.is_finite()) {
        return Err(Error::config("grid must be nonempty and finite"));
    }
    let b = baseline_index(grid, baseline)?;
    for f in model.features() {
        let count = profile.names.iter().filter(|n| *n == f).count();
        if count != 1 {
            return Err(Error::input(format!("profile must contain model input '{f}' exactly once")));
        }
    }
    let table = profile.sweep_table(feature, grid)?;
    let g = grid.len();
    match model.posterior(&table) {
        Some(post) => {
            let post = post?;
            let mut pred_mean = Vec::with_capacity(g);
            let mut pred_band = Band {
                lo: Vec::with_capacity(g),
                hi: Vec::with_capacity(g),
            };
            let mut effect_mean = Vec::with_capacity(g);
            let mut effect_band = Band {
                lo: Vec::with_capacity(g),
                hi: Vec::with_capacity(g),
            };
            let base_draws = post.row(b);
            for i in 0..g {
                let draws = post.row(i);
                pred_mean.push(stats::mean(&draws));
                pred_band.lo.push(stats::quantile(&draws, 0.025));
                pred_band.hi.push(stats::quantile(&draws, 0.975));
                let diff: Vec<f64> = draws.iter().zip(&base_draws).map(|(a, z)| a - z).collect();
                effect_mean.push(stats::mean(&diff));
                effect_band.lo.push(stats::quantile(&diff, 0.025));
                effect_band.hi.push(stats::quantile(&diff, 0.975));
            }
            Ok(EffectCurve {
                feature: feature.to_string(),
                grid: grid.to_vec(),
                baseline: grid[b],
                pred_mean,
                pred_band: Some(pred_band),
                effect_mean,
                effect_band: Some(effect_band),
            })
        }
        None => {
            let pred = model.predict(&table)?;
            let effect_mean = pred.iter().map(|p| p - pred[b]).collect();
            Ok(EffectCurve {
                feature: feature.to_string(),
                grid: grid.to_vec(),
                baseline: grid[b],
                pred_mean: pred,
                pred_band: None,
                effect_mean,
                effect_band: None,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng as _, SeedableRng};

    use super::*;
    use crate::bart::{fit_bart, BartControls};
    use crate::linear::fit_ols;
    use crate::seed::Rng;

    fn table(seed: u64, n: usize) -> FeatureTable {
        let mut rng = Rng::seed_from_u64(seed);
        let d: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let r: Vec<f64> = (0..n).map(|_| f64::from(u8::from(rng.random::<f64>() < 0.5))).collect();
        let y = d
            .iter()
            .zip(&r)
            .map(|(d, r)| 1.0 - d + 0.5 * r + 0.2 * rng.random::<f64>())
            .collect();
        FeatureTable::from_columns(vec![Column::numeric("dist", d), Column::indicator("party", "R", r)])
            .unwrap()
            .with_outcome("y", y)
            .unwrap()
    }

    #[test]
    fn grid_parsing() {
        let g = parse_grid("0:1:0.1").unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(g[1], 0.1);
        assert_eq!(g[3], 0.3);
        assert_eq!(g[10], 1.0);
        assert_eq!(parse_grid("0,0.5,2").unwrap(), vec![0.0, 0.5, 2.0]);
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("a").is_err());
    }

    #[test]
    fn baseline_must_be_on_the_grid() {
        let t = table(1, 50);
        let m = FittedModel::Ols(fit_ols(&t).unwrap());
        let p = Profile::from_row(&t, 0);
        let err = sweep(&m, &p, "dist", &[0.0, 0.5], 0.1).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn point_model_curve_is_the_prediction_difference() {
        let t = table(2, 80);
        let ols = fit_ols(&t).unwrap();
        let m = FittedModel::Ols(ols.clone());
        let p = Profile::from_row(&t, 3);
        let grid = parse_grid("0:1:0.1").unwrap();
        let c = sweep(&m, &p, "dist", &grid, 0.1).unwrap();
        assert!(c.pred_band.is_none() && c.effect_band.is_none());
        let slope = ols.coefficient("dist").unwrap();
        for (i, g) in grid.iter().enumerate() {
            let direct = ols.predict(&p.sweep_table("dist", &[*g]).unwrap()).unwrap()[0];
            assert_eq!(c.pred_mean[i], direct);
            assert_eq!(c.effect_mean[i], c.pred_mean[i] - c.pred_mean[1]);
            assert!((c.effect_mean[i] - slope * (g - 0.1)).abs() < 1e-12);
        }
        assert_eq!(c.effect_mean[1], 0.0);
    }

    #[test]
    fn posterior_curve_is_paired() {
        let t = table(3, 120);
        let bart = fit_bart(
            &t,
            &BartControls {
                trees: 20,
                iters: 300,
                burn: 150,
                seed: 4,
                ..Default::default()
            },
        )
        .unwrap();
        let m = FittedModel::Bart(bart);
        let p = Profile::from_row(&t, 0);
        let grid = parse_grid("0:1:0.1").unwrap();
        let c = sweep(&m, &p, "dist", &grid, 0.1).unwrap();
        let (pb, eb) = (c.pred_band.as_ref().unwrap(), c.effect_band.as_ref().unwrap());
        assert_eq!((c.effect_mean[1], eb.lo[1], eb.hi[1]), (0.0, 0.0, 0.0));
        for i in 0..grid.len() {
            let w_eff = eb.hi[i] - eb.lo[i];
            let w_sum = (pb.hi[i] - pb.lo[i]) + (pb.hi[1] - pb.lo[1]);
            assert!(w_eff <= w_sum + 1e-12, "{i}: {w_eff} vs {w_sum}");
        }
        // Same inputs, same curve.
        assert_eq!(sweep(&m, &p, "dist", &grid, 0.1).unwrap(), c);
        // A decreasing truth shows up as a negative effect at the far end.
        assert!(c.effect_mean[10] < 0.0);
    }

    #[test]
    fn overrides_touch_only_their_block() {
        let t = table(4, 10);
        let p = Profile::from_row(&t, 0);
        let r = p.with_override("party", "R").unwrap();
        let i = p.with_override("party", "I").unwrap();
        assert_eq!(r.get("party[R]"), Some(1.0));
        assert_eq!(i.get("party[R]"), Some(0.0));
        assert_eq!(r.get("dist"), p.get("dist"));
        let moved = p.with_override("dist", "0.25").unwrap();
        assert_eq!(moved.get("dist"), Some(0.25));
        assert!(p.with_override("color", "red").is_err());
    }

    #[test]
    fn profile_pick_uses_argmax_then_row_order() {
        let t = table(5, 6);
        let mk = |v: Vec<f64>| LocalImportance {
            ids: t.ids().to_vec(),
            features: vec!["dist".into()],
            values: vec![v],
        };
        let (p, _) = pick_profile(&mk(vec![0.0; 6]), &t, "dist", &[]).unwrap();
        assert_eq!(p.id, t.ids()[0]);
        let (p, q) = pick_profile(
            &mk(vec![0.1, 0.5, 0.2, 0.5, 0.0, 0.3]),
            &t,
            "dist",
            &[("party".into(), "R".into())],
        )
        .unwrap();
        assert_eq!(p.id, t.ids()[1]);
        assert_eq!(q.get("party[R]"), Some(1.0));
        assert_eq!(q.get("dist"), p.get("dist"));
        assert!(pick_profile(&mk(vec![0.0; 6]), &t, "age", &[]).is_err());
    }

    #[test]
    fn profile_csv_round_trip() {
        let t = table(6, 5);
        let p = Profile::from_row(&t, 2);
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert_eq!(Profile::read_csv(buf.as_slice()).unwrap(), p);
    }
}
