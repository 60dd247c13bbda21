mod common;

use std::collections::BTreeMap;

use tmle_core::cart::{fit, FitConfig, TreeTask};
use tmle_core::harness::{
    emit_reports, evaluate_metrics, run_scenario, split_train_test, Metrics, Scenario, SplitRule,
    Toggles,
};
use tmle_core::measurement::{ObservedDataset, Provenance, Row};

const ALL_OFF: Toggles = Toggles {
    feature_noise: false,
    label_misclassification: false,
    frame_coverage: false,
    sampling: false,
    model_assumption: false,
    drift: false,
    nonresponse: false,
};

fn num(row: &BTreeMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap()
}

#[test]
fn baseline_configuration_is_exact() {
    let report = run_scenario(&Scenario::new(common::small_default(3)).unwrap(), Some(1)).unwrap();
    let row = report.decomposition.row("configuration", "cart_assisted", "baseline").unwrap();
    assert!(row.bias.abs() < 1e-9, "bias {}", row.bias);
    assert!(row.variance.unwrap() < 1e-12);
    for o in &report.outcomes {
        let c = &o.configurations[0];
        assert_eq!(c.key, "baseline");
        assert!((c.estimate.point_estimate - c.true_total).abs() <= 1e-9 * c.true_total.abs());
    }
}

#[test]
fn sampling_alone_is_unbiased_with_positive_variance() {
    let mut cfg = common::small_default(200);
    cfg.toggles = Toggles { sampling: true, ..ALL_OFF };
    let report = run_scenario(&Scenario::new(cfg).unwrap(), None).unwrap();
    let row = report.decomposition.row("configuration", "cart_assisted", "sampling").unwrap();
    let var = row.variance.unwrap();
    assert!(var > 0.0);
    assert!(row.bias.abs() < 3.0 * (var / 200.0).sqrt(), "bias {} var {var}", row.bias);
}

#[test]
fn drift_widens_the_validity_gap() {
    let mut cfg = common::scenario_config("drift.toml");
    cfg.replicates = 4;
    let report = run_scenario(&Scenario::new(cfg).unwrap(), None).unwrap();
    let gap = |key: &str| report.validity.row(key, "accuracy").unwrap().gap;
    assert!(gap("all_on") > gap("sampling"), "{} vs {}", gap("all_on"), gap("sampling"));
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let scenario = Scenario::new(common::small_default(4)).unwrap();
    let dirs: Vec<_> = [1, 3]
        .into_iter()
        .map(|threads| {
            let dir = tempfile::tempdir().unwrap();
            let report = run_scenario(&scenario, Some(threads)).unwrap();
            emit_reports(&report, dir.path()).unwrap();
            dir
        })
        .collect();
    let mut names: Vec<_> = std::fs::read_dir(dirs[0].path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 7);
    for name in names {
        let a = std::fs::read(dirs[0].path().join(&name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(&name)).unwrap();
        assert!(a == b, "{name:?} differs");
    }
}

#[test]
fn emitted_decomposition_is_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_scenario(&Scenario::new(common::small_default(10)).unwrap(), None).unwrap();
    emit_reports(&report, dir.path()).unwrap();
    let rows = common::read_csv(&dir.path().join("decomposition.csv"));
    for estimator in ["cart_assisted", "synthetic"] {
        let mine: Vec<_> = rows.iter().filter(|r| r["estimator"] == estimator).collect();
        let bias_of = |kind: &str, key: &str| {
            num(mine.iter().find(|r| r["kind"] == kind && r["configuration"] == key).unwrap(), "bias")
        };
        for r in mine.iter().filter(|r| r["kind"] == "configuration") {
            let (b, v, m) = (num(r, "bias"), num(r, "variance"), num(r, "mse"));
            assert!((m - (b * b + v)).abs() <= 1e-9 * m.max(1.0), "{r:?}");
        }
        let deltas: f64 = mine
            .iter()
            .filter(|r| r["kind"] == "attribution")
            .map(|r| num(r, "bias"))
            .sum();
        let lhs = bias_of("configuration", "baseline") + deltas;
        let rhs = bias_of("configuration", "all_on");
        assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0), "{estimator}: {lhs} vs {rhs}");
    }
    let manifest = std::fs::read_to_string(dir.path().join("run_manifest.txt")).unwrap();
    assert!(manifest.contains(&format!("config_hash = {}", report.config_hash)));
}

#[test]
fn holdout_membership_is_exchangeable() {
    let n = 100;
    let rows: Vec<Row> = (0..n as u64).map(|i| Row { id: i + 1, x: vec![0.0], y: 0.0 }).collect();
    let data = ObservedDataset::new(rows, Provenance::default()).unwrap();
    let reps = 1000;
    let mut counts = vec![0usize; n];
    for seed in 0..reps {
        let split = &split_train_test(&data, SplitRule::Holdout(0.25), seed).unwrap()[0];
        assert_eq!(split.test.len(), 25);
        for r in split.test.rows() {
            counts[r.id as usize - 1] += 1;
        }
    }
    let sd = (reps as f64 * 0.25 * 0.75).sqrt();
    for c in counts {
        assert!((c as f64 - 250.0).abs() < 5.0 * sd, "count {c}");
    }
}

#[test]
fn metrics_agree_with_confusion_counts() {
    let mut rows = Vec::new();
    for i in 0..600u64 {
        let x = (i % 37) as f64 / 37.0;
        let y = if (i * 7919) % 11 < (x * 11.0) as u64 { 1.0 } else { 0.0 };
        rows.push(Row { id: i + 1, x: vec![x], y });
    }
    let data = ObservedDataset::new(rows, Provenance::default()).unwrap();
    let model = fit(&data, &FitConfig::default(), TreeTask::Classification).unwrap();
    let metrics = evaluate_metrics(&model, &data, TreeTask::Classification).unwrap();
    let (mut tp, mut fp, mut tn, mut fn_) = (0.0, 0.0, 0.0, 0.0);
    for r in data.rows() {
        match (model.score(&r.x).unwrap() >= 0.5, r.y == 1.0) {
            (true, true) => tp += 1.0,
            (true, false) => fp += 1.0,
            (false, false) => tn += 1.0,
            (false, true) => fn_ += 1.0,
        }
    }
    let e: BTreeMap<_, _> = metrics.entries().into_iter().collect();
    assert_eq!((e["tp"], e["fp"], e["tn"], e["fn"]), (tp, fp, tn, fn_));
    let precision = tp / (tp + fp);
    let recall = tp / (tp + fn_);
    assert!((e["accuracy"] - (tp + tn) / 600.0).abs() < 1e-12);
    assert!((e["precision"] - precision).abs() < 1e-12);
    assert!((e["recall"] - recall).abs() < 1e-12);
    assert!((e["f1"] - 2.0 * precision * recall / (precision + recall)).abs() < 1e-12);
    assert!(matches!(metrics, Metrics::Classification { .. }));
}

#[test]
fn enabled_source_without_parameters_is_rejected() {
    let mut cfg = common::small_default(1);
    cfg.drift = None;
    assert!(Scenario::new(cfg).unwrap_err().is_config());
    let mut cfg = common::small_default(1);
    cfg.replicates = 0;
    assert!(Scenario::new(cfg).unwrap_err().is_config());
}
