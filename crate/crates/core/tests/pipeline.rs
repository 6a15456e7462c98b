//! Observations and events in, effect curve out, through the public API only.

use rand::{Rng as _, SeedableRng};

use proxtree::bart::{fit_bart, BartControls};
use proxtree::cart::{fit_cv, CvControls};
use proxtree::dataset::{
    assemble, events_from_reader, observations_from_reader, split, Gazetteer, ObservationSchema, SplitSpec, TrainSize,
};
use proxtree::effects::{parse_grid, pick_profile, sweep};
use proxtree::forest::{fit_forest, ForestControls};
use proxtree::importance::{permutation_importance, ImportanceControls};
use proxtree::linear::{fit_lasso, LassoControls};
use proxtree::seed::Rng;
use proxtree::spatial::{featurize, DistanceScale};
use proxtree::{FeatureTable, FittedModel, Predictor};

const EVENTS: &str = "id,lat,lon,time,size,school
1,34.05,-118.24,1.5,12,1
2,40.71,-74.00,6.0,25,0
3,41.88,-87.63,3.2,8,0
4,29.76,-95.37,8.9,17,1
";

/// Respondents near event 1 lean toward higher outcomes.
fn respondents(n: usize) -> String {
    let gaz = Gazetteer::synthetic(300, 4);
    let mut rng = Rng::seed_from_u64(11);
    let mut s = String::from("id,zip,party,age,y\n");
    for i in 0..n {
        let (zip, p) = &gaz.entries()[rng.random_range(0..gaz.len())];
        let party = ["D", "I", "R"][rng.random_range(0..3)];
        let near = proxtree::spatial::haversine(*p, proxtree::spatial::GeoPoint::new(34.05, -118.24).unwrap());
        let y = (2.0 + if near < 1500.0 { 1.0 } else { 0.0 } + if party == "R" { -0.7 } else { 0.0 }
            + 0.4 * (rng.random::<f64>() - 0.5))
            .clamp(0.0, 4.0);
        s.push_str(&format!("{i},{zip},{party},{},{y}\n", rng.random_range(18..90)));
    }
    s
}

fn build_table() -> FeatureTable {
    let gaz = Gazetteer::synthetic(300, 4);
    let schema = ObservationSchema {
        outcome: Some("y".into()),
        ..ObservationSchema::default()
    };
    let text = respondents(600);
    let obs = observations_from_reader(text.as_bytes(), &schema, Some(&gaz)).unwrap();
    assert!(obs.row_errors.is_empty());
    let catalog = events_from_reader(EVENTS.as_bytes()).unwrap();
    let prox = featurize(&obs.points, &catalog, 2, DistanceScale::ThousandKm).unwrap();
    assemble(&obs, prox).unwrap()
}

#[test]
fn features_have_the_expected_layout() {
    let t = build_table();
    let names = t.names();
    assert_eq!(&names[..4], ["dist_near_1", "time_near_1", "size_near_1", "school_near_1"]);
    for want in ["dist_near_mean_2", "dist_recent_2", "dist_large_2", "party[I]", "party[R]", "age"] {
        assert!(names.iter().any(|n| n == want), "missing {want}");
    }
    assert_eq!(t.outcome_name(), Some("y"));
    assert_eq!(t.n_rows(), 600);
}

#[test]
fn learners_find_the_planted_signal() {
    let t = build_table();
    let (train, test) = split(
        &t,
        &SplitSpec {
            train: TrainSize::Count(450),
            seed: 2,
        },
    )
    .unwrap();
    let y = test.outcome().unwrap();
    let var = proxtree::stats::variance(y);
    let models = vec![
        FittedModel::Lasso(fit_lasso(&train, &LassoControls::default()).unwrap().model),
        FittedModel::Tree(fit_cv(&train, &CvControls::default()).unwrap().tree),
        FittedModel::Forest(
            fit_forest(
                &train,
                &ForestControls {
                    trees: 60,
                    ..Default::default()
                },
            )
            .unwrap(),
        ),
        FittedModel::Bart(
            fit_bart(
                &train,
                &BartControls {
                    trees: 50,
                    iters: 600,
                    burn: 300,
                    ..Default::default()
                },
            )
            .unwrap(),
        ),
    ];
    for m in &models {
        let pred = m.predict(&test).unwrap();
        let e = proxtree::importance::mse(y, &pred).unwrap();
        assert!(e < 0.6 * var, "{}: mse {e} vs variance {var}", m.kind());
        let back = FittedModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back.predict(&test).unwrap(), pred);
    }

    // The distance block and party carry the signal; age does not.
    let bart = &models[3];
    let rep = permutation_importance(
        bart,
        &test,
        &ImportanceControls {
            local: true,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(rep.get("party").unwrap().importance_pct > rep.get("age").unwrap().importance_pct);
    let ranked = rep.ranked();
    assert!(ranked.windows(2).all(|w| w[0].importance_pct >= w[1].importance_pct));

    let local = rep.local.unwrap();
    let (profile, republican) = pick_profile(&local, &test, "dist_near_1", &[("party".into(), "R".into())]).unwrap();
    let column = local.column("dist_near_1").unwrap();
    let mut sorted = column.to_vec();
    sorted.sort_by(f64::total_cmp);
    let p95 = proxtree::stats::quantile(&sorted, 0.95);
    let picked = local.ids.iter().position(|id| *id == profile.id).unwrap();
    assert!(column[picked] >= p95);
    assert_eq!(republican.get("party[R]"), Some(1.0));

    let grid = parse_grid("0:3:0.5").unwrap();
    let base = sweep(bart, &profile, "dist_near_1", &grid, 0.5).unwrap();
    let rep_curve = sweep(bart, &republican, "dist_near_1", &grid, 0.5).unwrap();
    assert_eq!(base.effect_mean[1], 0.0);
    // Moving far from event 1 lowers the outcome for both profiles.
    assert!(base.effect_mean[6] < 0.0 && rep_curve.effect_mean[6] < 0.0);
    // The Republican profile sits lower throughout.
    assert!(rep_curve.pred_mean.iter().zip(&base.pred_mean).all(|(r, b)| r <= b));
}
