use std::path::Path;

use serde::{Deserialize, Serialize};

use proxtree::bart::{fit_bart, BartControls};
use proxtree::cart::{fit_cv, CvControls};
use proxtree::dataset::{
    assemble, events_from_reader, observations_from_reader, split, Gazetteer, ObservationSchema, SplitSpec, TrainSize,
};
use proxtree::effects::{parse_grid, pick_profile, sweep, Profile};
use proxtree::forest::{fit_forest, ForestControls};
use proxtree::importance::{mse, permutation_importance, ImportanceControls, LocalImportance};
use proxtree::linear::{fit_lasso, fit_ols, LassoControls};
use proxtree::simulation::{median_mse, run_benchmark, write_results, SimConfig};
use proxtree::spatial::{featurize, DistanceScale};
use proxtree::table::fmt_f64;
use proxtree::{FeatureTable, FittedModel, Predictor};

use crate::args::{EffectsArgs, FeaturizeArgs, FitArgs, ImportanceArgs, ModelKind, SimulateArgs, SplitArgs};
use crate::failure::Failure;
use crate::manifest::{prepare_out, write_file, RunManifest};

type Outcome = Result<(), Failure>;

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> proxtree::Result<()>) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn emit(m: &mut RunManifest, dir: &Path, name: &str, bytes: &[u8]) -> Outcome {
    write_file(dir, name, bytes)?;
    m.outputs.push(name.to_string());
    Ok(())
}

fn read_table(m: &mut RunManifest, path: &Path, outcome: Option<&str>) -> Result<FeatureTable, Failure> {
    let bytes = m.read_input(path)?;
    FeatureTable::read_csv(bytes.as_slice(), outcome).map_err(|e| Failure::from(e).in_file(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(m: &mut RunManifest, path: &Path) -> Result<T, Failure> {
    let bytes = m.read_input(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn read_model(m: &mut RunManifest, path: &Path) -> Result<FittedModel, Failure> {
    let bytes = m.read_input(path)?;
    let text = String::from_utf8(bytes).map_err(|_| Failure::data(format!("{}: not UTF-8", path.display())))?;
    FittedModel::from_json(&text).map_err(|e| Failure::data(e.to_string()).in_file(path))
}

pub fn featurize_cmd(a: &FeaturizeArgs) -> Outcome {
    let mut m = RunManifest::start("featurize");
    let scale: DistanceScale = a.scale.parse()?;
    let mut schema: ObservationSchema = match &a.schema {
        Some(p) => read_json(&mut m, p)?,
        None => ObservationSchema::default(),
    };
    if a.outcome.is_some() {
        schema.outcome = a.outcome.clone();
    }
    let gazetteer = match &a.gazetteer {
        Some(p) => {
            let bytes = m.read_input(p)?;
            Some(Gazetteer::from_reader(bytes.as_slice()).map_err(|e| Failure::from(e).in_file(p))?)
        }
        None => None,
    };
    let obs_bytes = m.read_input(&a.respondents)?;
    let event_bytes = m.read_input(&a.events)?;
    let obs = observations_from_reader(obs_bytes.as_slice(), &schema, gazetteer.as_ref())
        .map_err(|e| Failure::from(e).in_file(&a.respondents))?;
    let catalog = events_from_reader(event_bytes.as_slice()).map_err(|e| Failure::from(e).in_file(&a.events))?;
    let proximity = featurize(&obs.points, &catalog, a.k, scale)?;
    let table = assemble(&obs, proximity)?;

    let dir = prepare_out(&a.out)?;
    emit(&mut m, &dir, "features.csv", &csv_bytes(|b| table.write_csv(b))?)?;
    if !obs.row_errors.is_empty() {
        log::warn!("{} observation rows skipped; see dropped_rows.csv", obs.row_errors.len());
        let mut text = String::from("line,message\n");
        for e in &obs.row_errors {
            text.push_str(&format!("{},\"{}\"\n", e.line, e.message.replace('"', "\"\"")));
        }
        emit(&mut m, &dir, "dropped_rows.csv", text.as_bytes())?;
    }
    m.set_config(&serde_json::json!({ "schema": schema, "k": a.k, "scale": scale }))?;
    m.metrics.insert("rows".into(), table.n_rows() as f64);
    m.metrics.insert("dropped_rows".into(), obs.row_errors.len() as f64);
    println!("rows\t{}\ncolumns\t{}", table.n_rows(), table.n_cols());
    m.finish(&dir)
}

fn parse_train_size(s: &str) -> Result<TrainSize, Failure> {
    if let Ok(c) = s.parse::<usize>() {
        return Ok(TrainSize::Count(c));
    }
    match s.parse::<f64>() {
        Ok(f) if (0.0..=1.0).contains(&f) => Ok(TrainSize::Fraction(f)),
        _ => Err(Failure::usage(format!("--train: '{s}' is neither a count nor a fraction in [0, 1]"))),
    }
}

pub fn split_cmd(a: &SplitArgs) -> Outcome {
    let mut m = RunManifest::start("split");
    let table = read_table(&mut m, &a.table, a.outcome.as_deref())?;
    let spec = SplitSpec {
        train: parse_train_size(&a.train)?,
        seed: a.seed,
    };
    let (train, test) = split(&table, &spec)?;
    let dir = prepare_out(&a.out)?;
    emit(&mut m, &dir, "train.csv", &csv_bytes(|b| train.write_csv(b))?)?;
    emit(&mut m, &dir, "test.csv", &csv_bytes(|b| test.write_csv(b))?)?;
    m.set_config(&spec)?;
    m.seeds.insert("split".into(), a.seed);
    println!("train\t{}\ntest\t{}", train.n_rows(), test.n_rows());
    m.finish(&dir)
}

/// Learner settings; any section may be omitted.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub tree: CvControls,
    pub forest: ForestControls,
    pub bart: BartControls,
    pub lasso: LassoControls,
}

fn predictions_csv(ids: &[String], y: Option<&[f64]>, pred: &[f64]) -> Vec<u8> {
    let mut s = String::from(if y.is_some() { "id,y,pred\n" } else { "id,pred\n" });
    for (i, id) in ids.iter().enumerate() {
        match y {
            Some(y) => s.push_str(&format!("{id},{},{}\n", fmt_f64(y[i]), fmt_f64(pred[i]))),
            None => s.push_str(&format!("{id},{}\n", fmt_f64(pred[i]))),
        }
    }
    s.into_bytes()
}

pub fn fit_cmd(a: &FitArgs) -> Outcome {
    let mut m = RunManifest::start("fit");
    let mut cfg: FitConfig = match &a.config {
        Some(p) => read_json(&mut m, p)?,
        None => FitConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.tree.seed = s;
        cfg.forest.seed = s;
        cfg.bart.seed = s;
        cfg.lasso.seed = s;
    }
    if let Some(ms) = a.max_splits {
        cfg.tree.grow.max_splits = Some(ms);
    }
    if let Some(t) = a.trees {
        cfg.forest.trees = t;
        cfg.bart.trees = t;
    }
    let train = read_table(&mut m, &a.train, Some(&a.outcome))?;
    let test = match &a.test {
        Some(p) => Some(read_table(&mut m, p, Some(&a.outcome))?),
        None => None,
    };
    let dir = prepare_out(&a.out)?;

    let model = match a.model {
        ModelKind::Ols => FittedModel::Ols(fit_ols(&train)?),
        ModelKind::Lasso => {
            let fit = fit_lasso(&train, &cfg.lasso)?;
            m.metrics.insert("lambda".into(), fit.lambda);
            let mut s = String::from("lambda,cv_mse\n");
            for (l, e) in &fit.cv_mse {
                s.push_str(&format!("{},{}\n", fmt_f64(*l), fmt_f64(*e)));
            }
            emit(&mut m, &dir, "cv.csv", s.as_bytes())?;
            FittedModel::Lasso(fit.model)
        }
        ModelKind::Tree => {
            let fit = fit_cv(&train, &cfg.tree)?;
            m.metrics.insert("alpha".into(), fit.alpha);
            m.metrics.insert("splits".into(), fit.tree.n_splits() as f64);
            let mut s = String::from("alpha,cv_mse\n");
            for (al, e) in &fit.cv_mse {
                s.push_str(&format!("{},{}\n", fmt_f64(*al), fmt_f64(*e)));
            }
            emit(&mut m, &dir, "cv.csv", s.as_bytes())?;
            FittedModel::Tree(fit.tree)
        }
        ModelKind::Forest => {
            let f = fit_forest(&train, &cfg.forest)?;
            if cfg.forest.bootstrap {
                m.metrics.insert("oob_mse".into(), f.oob_mse(&train)?.mse);
            }
            FittedModel::Forest(f)
        }
        ModelKind::Bart => FittedModel::Bart(fit_bart(&train, &cfg.bart)?),
    };
    emit(&mut m, &dir, "model.json", model.to_json()?.as_bytes())?;

    let y_train = train.require_outcome()?;
    let train_mse = mse(y_train, &model.predict(&train)?)?;
    m.metrics.insert("train_mse".into(), train_mse);
    println!("train_mse\t{}", fmt_f64(train_mse));

    let scored = test.as_ref().unwrap_or(&train);
    let pred = model.predict(scored)?;
    if let Some(t) = &test {
        let test_mse = mse(t.require_outcome()?, &pred)?;
        m.metrics.insert("test_mse".into(), test_mse);
        println!("test_mse\t{}", fmt_f64(test_mse));
        emit(&mut m, &dir, "predictions.csv", &predictions_csv(t.ids(), t.outcome(), &pred))?;
    }
    if let Some(post) = model.posterior(scored) {
        let post = post?;
        let mean = post.mean();
        let (lo, hi) = post.interval95();
        let mut s = String::from("id,mean,lo,hi\n");
        for (i, id) in scored.ids().iter().enumerate() {
            s.push_str(&format!("{id},{},{},{}\n", fmt_f64(mean[i]), fmt_f64(lo[i]), fmt_f64(hi[i])));
        }
        emit(&mut m, &dir, "posterior_summary.csv", s.as_bytes())?;
        if a.draws {
            emit(&mut m, &dir, "posterior.csv", &csv_bytes(|b| post.write_csv(b, scored.ids()))?)?;
        }
    }

    m.set_config(&serde_json::json!({ "model": model.kind(), "controls": cfg }))?;
    match a.model {
        ModelKind::Tree => m.seeds.insert("tree".into(), cfg.tree.seed),
        ModelKind::Forest => m.seeds.insert("forest".into(), cfg.forest.seed),
        ModelKind::Bart => m.seeds.insert("bart".into(), cfg.bart.seed),
        ModelKind::Lasso => m.seeds.insert("lasso".into(), cfg.lasso.seed),
        ModelKind::Ols => None,
    };
    m.finish(&dir)
}

pub fn importance_cmd(a: &ImportanceArgs) -> Outcome {
    let mut m = RunManifest::start("importance");
    let model = read_model(&mut m, &a.model)?;
    let test = read_table(&mut m, &a.test, Some(&a.outcome))?;
    let ctl = ImportanceControls {
        k: a.k_perms,
        seed: a.seed,
        per_indicator: a.per_indicator,
        local: a.local,
        features: a.features.clone(),
    };
    if ctl.k == 1 {
        log::info!("a single permutation per feature gives noisier estimates");
    }
    let report = permutation_importance(&model, &test, &ctl)?;
    let dir = prepare_out(&a.out)?;
    emit(&mut m, &dir, "importance.csv", &csv_bytes(|b| report.write_csv(b))?)?;
    if let Some(local) = &report.local {
        emit(&mut m, &dir, "local_importance.csv", &csv_bytes(|b| local.write_csv(b))?)?;
    }
    for f in report.ranked() {
        println!("{}\t{}", f.name, fmt_f64(f.importance_pct));
    }
    m.set_config(&serde_json::json!({ "model": model.kind(), "controls": ctl }))?;
    m.seeds.insert("importance".into(), a.seed);
    m.metrics.insert("mse_base".into(), report.mse_base);
    m.finish(&dir)
}

pub fn simulate_cmd(a: &SimulateArgs) -> Outcome {
    let mut m = RunManifest::start("simulate");
    let mut cfg = match &a.config {
        Some(p) => {
            let bytes = m.read_input(p)?;
            let text = String::from_utf8(bytes).map_err(|_| Failure::usage(format!("{}: not UTF-8", p.display())))?;
            SimConfig::from_json(&text).map_err(|e| Failure::from(e).in_file(p))?
        }
        None => SimConfig::default(),
    };
    if let Some(r) = a.reps {
        cfg.reps = r;
    }
    if let Some(n) = a.n_train {
        cfg.n_train = n;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(g) = &cfg.gazetteer {
        // Digest only; the harness loads it itself.
        m.read_input(&g.clone())?;
    }
    let results = run_benchmark(&cfg)?;
    let dir = prepare_out(&a.out)?;
    emit(&mut m, &dir, "results.csv", &csv_bytes(|b| write_results(&results, b))?)?;
    let mut s = String::from("method,median_mse,mean_mse,reps\n");
    for &method in &cfg.methods {
        let v: Vec<f64> = results.iter().filter(|r| r.method == method).map(|r| r.mse).collect();
        let med = median_mse(&results, method).unwrap_or(f64::NAN);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        s.push_str(&format!("{},{},{},{}\n", method.as_str(), fmt_f64(med), fmt_f64(mean), v.len()));
        m.metrics.insert(format!("median_mse.{}", method.as_str()), med);
        println!("{}\t{}", method.as_str(), fmt_f64(med));
    }
    emit(&mut m, &dir, "summary.csv", s.as_bytes())?;
    m.set_config(&cfg)?;
    m.seeds.insert("master".into(), cfg.seed);
    m.finish(&dir)
}

fn parse_override(s: &str) -> Result<(String, String), Failure> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(Failure::usage(format!("--set expects NAME=VALUE, got '{s}'"))),
    }
}

pub fn effects_cmd(a: &EffectsArgs) -> Outcome {
    let mut m = RunManifest::start("effects");
    let grid = parse_grid(&a.grid)?;
    let overrides = a.overrides.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>, _>>()?;
    let model = read_model(&mut m, &a.model)?;

    let (base, other) = if a.auto_profile {
        let local_path = a
            .local
            .as_ref()
            .filter(|p| p.is_file())
            .ok_or_else(|| Failure::usage("--auto-profile needs --local pointing at local_importance.csv from `importance --local`"))?;
        let test_path = a.test.as_ref().ok_or_else(|| Failure::usage("--auto-profile needs --test"))?;
        let local_bytes = m.read_input(local_path)?;
        let local = LocalImportance::read_csv(local_bytes.as_slice()).map_err(|e| Failure::from(e).in_file(local_path))?;
        let test = read_table(&mut m, test_path, a.outcome.as_deref())?;
        pick_profile(&local, &test, &a.feature, &overrides)?
    } else {
        let path = a
            .profile
            .as_ref()
            .ok_or_else(|| Failure::usage("give --profile or --auto-profile"))?;
        let bytes = m.read_input(path)?;
        let mut base = Profile::read_csv(bytes.as_slice()).map_err(|e| Failure::from(e).in_file(path))?;
        if let Some(o) = &a.outcome {
            if let Some(i) = base.names.iter().position(|n| n == o) {
                base.names.remove(i);
                base.values.remove(i);
            }
        }
        let mut other = base.clone();
        for (k, v) in &overrides {
            other = other.with_override(k, v)?;
        }
        (base, other)
    };

    let dir = prepare_out(&a.out)?;
    let curve = sweep(&model, &base, &a.feature, &grid, a.baseline)?;
    emit(&mut m, &dir, "profile.csv", &csv_bytes(|b| base.write_csv(b))?)?;
    emit(&mut m, &dir, "effects.csv", &csv_bytes(|b| curve.write_csv(b))?)?;
    if !overrides.is_empty() {
        let curve2 = sweep(&model, &other, &a.feature, &grid, a.baseline)?;
        emit(&mut m, &dir, "profile_override.csv", &csv_bytes(|b| other.write_csv(b))?)?;
        emit(&mut m, &dir, "effects_override.csv", &csv_bytes(|b| curve2.write_csv(b))?)?;
    }
    println!("profile\t{}\npoints\t{}", base.id, grid.len());
    m.set_config(&serde_json::json!({
        "model": model.kind(),
        "feature": a.feature,
        "grid": grid,
        "baseline": a.baseline,
        "profile_id": base.id,
        "overrides": overrides,
    }))?;
    m.finish(&dir)
}
