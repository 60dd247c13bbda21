mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tmle_core::cart::{design_weighted_leaves, fit, FitConfig, Node, Predict, TreeTask};
use tmle_core::measurement::{ObservedDataset, Provenance, Row};
use tmle_core::population::{realize_population, Dependence, FeatureLaw, SuperPopulationSpec};
use tmle_core::sampling::{draw, Design};

fn stump() -> FitConfig {
    FitConfig {
        max_depth: 1,
        min_leaf: 1,
        min_split_improvement: 0.0,
    }
}

fn sse_of_split(xs: &[f64], ys: &[f64], t: f64) -> f64 {
    let side = |left: bool| -> f64 {
        let v: Vec<f64> = xs.iter().zip(ys).filter(|(x, _)| (**x < t) == left).map(|(_, y)| *y).collect();
        if v.is_empty() {
            return 0.0;
        }
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|y| (y - m) * (y - m)).sum()
    };
    side(true) + side(false)
}

#[test]
fn stump_matches_exhaustive_search() {
    for (xs, ys) in common::supplied_datasets() {
        let model = fit(&common::dataset_1d(&xs, &ys), &stump(), TreeTask::Regression).unwrap();
        let expected = common::brute_force_split(&xs, &ys);
        match (&model.nodes()[0], expected) {
            (Node::Split { feature, threshold, .. }, Some(t)) => {
                assert_eq!(*feature, 0);
                assert!((threshold - t).abs() <= 1e-12, "xs {xs:?} ys {ys:?}: {threshold} vs {t}");
                let (a, b) = (sse_of_split(&xs, &ys, *threshold), sse_of_split(&xs, &ys, t));
                assert!((a - b).abs() <= 1e-9 * (1.0 + b));
            }
            (Node::Leaf(_), None) => {}
            (node, t) => panic!("xs {xs:?} ys {ys:?}: fitted {node:?}, expected {t:?}"),
        }
    }
}

fn random_tree_data(n: usize, seed: u64) -> ObservedDataset {
    let spec = SuperPopulationSpec::regression(
        vec![
            FeatureLaw::Normal { mean: 0.0, sd: 1.0 },
            FeatureLaw::Categorical {
                probabilities: vec![0.2, 0.5, 0.3],
            },
        ],
        Dependence::Linear {
            intercept: 0.0,
            coefficients: vec![2.0, -1.0],
        },
        0.5,
    )
    .unwrap();
    common::observed(&realize_population(&spec, n, seed))
}

#[test]
fn leaves_partition_feature_space() {
    let data = random_tree_data(2000, 1);
    let model = fit(&data, &FitConfig::default(), TreeTask::Regression).unwrap();
    let regions: Vec<usize> = model.leaves().map(|l| l.region).collect();
    assert_eq!(regions, (0..model.leaf_count()).collect::<Vec<_>>());
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10_000 {
        let x = [rng.random_range(-6.0..6.0), rng.random_range(-1..4) as f64];
        // exactly one leaf along the single routing path
        let leaf = model.route(&x).unwrap();
        let hits = model.leaves().filter(|l| l.region == leaf.region).count();
        assert_eq!(hits, 1);
    }
}

#[test]
fn leaf_value_is_mean_of_routed_rows() {
    let data = random_tree_data(3000, 3);
    let model = fit(&data, &FitConfig::default(), TreeTask::Regression).unwrap();
    let mut sums = vec![(0.0, 0usize); model.leaf_count()];
    for r in data.rows() {
        let leaf = model.route(&r.x).unwrap();
        sums[leaf.region].0 += r.y;
        sums[leaf.region].1 += 1;
    }
    for leaf in model.leaves() {
        let (s, c) = sums[leaf.region];
        assert_eq!(c, leaf.count);
        assert!((s / c as f64 - leaf.weight).abs() < 1e-9);
    }
}

#[test]
fn uniform_inclusion_keeps_census_leaf_values() {
    let pop = common::linear_population(1500, 4);
    let data = common::observed(&pop);
    let model = fit(&data, &FitConfig::default(), TreeTask::Regression).unwrap();
    let census = draw(&Design::Census, &pop, 0).unwrap();
    let reweighted = design_weighted_leaves(&model, &census, &data).unwrap();
    for (a, b) in model.leaves().zip(reweighted.leaves()) {
        assert!((a.weight - b.design_weight.unwrap()).abs() < 1e-9);
    }
    assert_eq!(reweighted.fallback_count(), 0);
}

#[test]
fn classification_scores_average_to_positive_share() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rows: Vec<Row> = (0..4000)
        .map(|i| {
            let x: f64 = rng.random_range(-3.0..3.0);
            let y = if rng.random::<f64>() < 1.0 / (1.0 + (-2.0 * x).exp()) { 1.0 } else { 0.0 };
            Row { id: i + 1, x: vec![x], y }
        })
        .collect();
    let data = ObservedDataset::new(rows, Provenance::default()).unwrap();
    let model = fit(&data, &FitConfig::default(), TreeTask::Classification).unwrap();
    let mean_score: f64 = data.rows().iter().map(|r| model.score(&r.x).unwrap()).sum::<f64>() / 4000.0;
    let share = data.targets().iter().sum::<f64>() / 4000.0;
    assert!((mean_score - share).abs() < 1e-9);
    for r in data.rows() {
        let s = model.predict(&r.x).unwrap();
        assert!((0.0..=1.0).contains(&s));
    }
}

#[test]
fn fitting_is_deterministic_and_round_trips_as_text() {
    let data = random_tree_data(1000, 6);
    let a = fit(&data, &FitConfig::default(), TreeTask::Regression).unwrap();
    let b = fit(&data, &FitConfig::default(), TreeTask::Regression).unwrap();
    assert_eq!(a, b);
    let back = tmle_core::cart::TreeModel::from_text(&a.to_text()).unwrap();
    for r in data.rows() {
        assert_eq!(a.predict(&r.x).unwrap(), back.predict(&r.x).unwrap());
    }
}
