use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng as _, SeedableRng};

use proxtree::seed::Rng;
use proxtree::FittedModel;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_proxtree")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

struct Fixture {
    _tmp: tempfile::TempDir,
    root: PathBuf,
}

impl Fixture {
    /// Respondents and events on disk, already featurized and split.
    fn new() -> Self {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path().to_path_buf();
        let mut rng = Rng::seed_from_u64(3);
        let mut ev = String::from("id,lat,lon,time,size,school\n");
        for i in 1..=6 {
            ev.push_str(&format!(
                "{i},{:.3},{:.3},{:.2},{},{}\n",
                rng.random_range(30.0..45.0),
                rng.random_range(-120.0..-75.0),
                rng.random_range(0.0..10.0),
                rng.random_range(5..30),
                i % 2
            ));
        }
        std::fs::write(root.join("events.csv"), ev).unwrap();
        let mut resp = String::from("id,lat,lon,party,age,y\n");
        for i in 0..240 {
            let party = ["D", "I", "R"][i % 3];
            let y = 2.0 + if party == "R" { -1.0 } else { 0.5 } + rng.random_range(-0.5..0.5);
            resp.push_str(&format!(
                "p{i},{:.3},{:.3},{party},{},{y:.3}\n",
                rng.random_range(30.0..45.0),
                rng.random_range(-120.0..-75.0),
                rng.random_range(18..90)
            ));
        }
        std::fs::write(root.join("resp.csv"), resp).unwrap();
        let f = Fixture { _tmp: tmp, root };
        let o = bin(&[
            "featurize",
            "--respondents",
            &f.p("resp.csv"),
            "--events",
            &f.p("events.csv"),
            "--outcome",
            "y",
            "--scale",
            "thousand-km",
            "--out",
            &f.p("feat"),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let o = bin(&[
            "split",
            "--table",
            &f.p("feat/features.csv"),
            "--outcome",
            "y",
            "--train",
            "0.75",
            "--out",
            &f.p("split"),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        f
    }

    fn p(&self, rel: &str) -> String {
        s(&self.root.join(rel))
    }

    fn fit(&self, model: &str, extra: &[&str]) -> Output {
        let train = self.p("split/train.csv");
        let out = self.p(&format!("fit_{model}"));
        let mut args = vec!["fit", "--model", model, "--outcome", "y", "--train", &train, "--out", &out];
        args.extend_from_slice(extra);
        bin(&args)
    }
}

fn manifest(dir: &str) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(Path::new(dir).join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn featurize_emits_attribute_columns_for_each_neighbor() {
    let f = Fixture::new();
    let header = std::fs::read_to_string(f.root.join("feat/features.csv")).unwrap();
    let header = header.lines().next().unwrap();
    for i in 1..=3 {
        for stem in ["dist", "time", "size", "school"] {
            assert!(header.contains(&format!("{stem}_near_{i}")), "{header}");
        }
        assert!(header.contains(&format!("dist_recent_{i}")));
    }
    let m = manifest(&f.p("feat"));
    assert_eq!(m["command"], "featurize");
    assert_eq!(m["inputs"].as_array().unwrap().len(), 2);
    assert_eq!(m["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    let manifests = std::fs::read_dir(f.root.join("feat"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().contains("manifest"))
        .count();
    assert_eq!(manifests, 1);
}

#[test]
fn usage_errors_exit_with_two() {
    let f = Fixture::new();
    let o = bin(&[
        "featurize",
        "--respondents",
        &f.p("resp.csv"),
        "--events",
        &f.p("missing.csv"),
        "--out",
        &f.p("x"),
    ]);
    assert_eq!(code(&o), 2);
    let o = bin(&["fit", "--model", "gbm", "--train", "a", "--outcome", "y", "--out", "b"]);
    assert_eq!(code(&o), 2);
    let o = f.fit("tree", &[]);
    assert_eq!(code(&o), 0);
    let o = bin(&[
        "effects",
        "--model",
        &f.p("fit_tree/model.json"),
        "--auto-profile",
        "--test",
        &f.p("split/test.csv"),
        "--feature",
        "dist_near_1",
        "--baseline",
        "0.1",
        "--out",
        &f.p("eff"),
    ]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    let o = bin(&[
        "effects",
        "--model",
        &f.p("fit_tree/model.json"),
        "--profile",
        &f.p("split/test.csv"),
        "--feature",
        "dist_near_1",
        "--baseline",
        "0.15",
        "--out",
        &f.p("eff"),
    ]);
    assert_eq!(code(&o), 2, "baseline off the grid");
}

#[test]
fn data_and_numerical_errors_have_their_own_codes() {
    let f = Fixture::new();
    std::fs::write(f.root.join("bad.csv"), "id,x,y\n1,abc,2\n").unwrap();
    let o = bin(&["fit", "--model", "ols", "--train", &f.p("bad.csv"), "--outcome", "y", "--out", &f.p("o")]);
    assert_eq!(code(&o), 3);
    std::fs::write(f.root.join("dup.csv"), "id,a,b,y\n1,1,2,1\n2,2,4,3\n3,3,6,2\n4,4,8,5\n5,5,10,4\n").unwrap();
    let o = bin(&["fit", "--model", "ols", "--train", &f.p("dup.csv"), "--outcome", "y", "--out", &f.p("o")]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn fit_respects_split_budget_and_reports_test_mse() {
    let f = Fixture::new();
    let test = f.p("split/test.csv");
    let o = f.fit("tree", &["--max-splits", "10", "--test", &test]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("test_mse\t"));
    let json = std::fs::read_to_string(f.root.join("fit_tree/model.json")).unwrap();
    match FittedModel::from_json(&json).unwrap() {
        FittedModel::Tree(t) => assert!(t.n_splits() <= 10),
        other => panic!("expected a tree, got {}", other.kind()),
    }
    let m = manifest(&f.p("fit_tree"));
    assert!(m["metrics"]["test_mse"].as_f64().unwrap() >= 0.0);
    assert_eq!(m["config"]["controls"]["forest"]["trees"], 200);
    assert_eq!(m["config"]["controls"]["bart"]["trees"], 200);
}

#[test]
fn importance_and_effects_workflow() {
    let f = Fixture::new();
    let test = f.p("split/test.csv");
    let cfg = f.root.join("fit.json");
    std::fs::write(&cfg, r#"{"bart": {"iters": 300, "burn": 150}}"#).unwrap();
    let o = f.fit("bart", &["--trees", "30", "--config", &s(&cfg), "--seed", "5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(f.root.join("fit_bart/posterior_summary.csv").exists());

    let model = f.p("fit_bart/model.json");
    let o = bin(&[
        "importance",
        "--model",
        &model,
        "--test",
        &test,
        "--outcome",
        "y",
        "--k-perms",
        "1",
        "--local",
        "--out",
        &f.p("imp"),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(f.root.join("imp/importance.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "feature,importance_pct,mse_perm,mse_base,k");
    let pct: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(pct.windows(2).all(|w| w[0] >= w[1]));
    assert!(csv.contains("\nparty,"));

    let o = bin(&[
        "effects",
        "--model",
        &model,
        "--auto-profile",
        "--local",
        &f.p("imp/local_importance.csv"),
        "--test",
        &test,
        "--outcome",
        "y",
        "--feature",
        "dist_near_1",
        "--grid",
        "0:1:0.1",
        "--baseline",
        "0.1",
        "--set",
        "party=R",
        "--out",
        &f.p("eff"),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let curve = std::fs::read_to_string(f.root.join("eff/effects.csv")).unwrap();
    let rows: Vec<&str> = curve.lines().collect();
    assert_eq!(rows[0], "grid,pred_mean,pred_lo,pred_hi,effect_mean,effect_lo,effect_hi");
    assert_eq!(rows.len(), 12);
    assert!(rows[2].starts_with("0.1,") && rows[2].ends_with(",0,0,0"));
    let other = std::fs::read_to_string(f.root.join("eff/profile_override.csv")).unwrap();
    let header: Vec<&str> = other.lines().next().unwrap().split(',').collect();
    let values: Vec<&str> = other.lines().nth(1).unwrap().split(',').collect();
    let r = header.iter().position(|h| *h == "party[R]").unwrap();
    assert_eq!(values[r], "1");
}

#[test]
fn simulate_writes_results_and_summary() {
    let f = Fixture::new();
    let cfg = f.root.join("sim.json");
    std::fs::write(
        &cfg,
        r#"{"reps": 2, "n_train": 120, "gazetteer_size": 150, "methods": ["ols_raw", "tree_cv"]}"#,
    )
    .unwrap();
    let o = bin(&["simulate", "--config", &s(&cfg), "--seed", "9", "--out", &f.p("sim")]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let results = std::fs::read_to_string(f.root.join("sim/results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 2 * 2);
    let m = manifest(&f.p("sim"));
    assert_eq!(m["config"]["seed"], 9);
    std::fs::write(&cfg, r#"{"methods": ["knn"]}"#).unwrap();
    let o = bin(&["simulate", "--config", &s(&cfg), "--out", &f.p("sim2")]);
    assert_eq!(code(&o), 2);
}
