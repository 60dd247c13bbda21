#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tmle_core::measurement::{ObservedDataset, Provenance, Row};
use tmle_core::population::{
    realize_population, Dependence, FeatureLaw, FinitePopulation, SuperPopulationSpec,
};
use tmle_core::UnitId;

pub fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

pub fn linear_spec(noise_sd: f64) -> SuperPopulationSpec {
    SuperPopulationSpec::regression(
        vec![
            FeatureLaw::Normal { mean: 0.0, sd: 1.0 },
            FeatureLaw::Uniform { low: 0.0, high: 4.0 },
        ],
        Dependence::Linear {
            intercept: 5.0,
            coefficients: vec![3.0, 1.5],
        },
        noise_sd,
    )
    .unwrap()
}

pub fn linear_population(n: usize, seed: u64) -> FinitePopulation {
    realize_population(&linear_spec(1.0), n, seed)
}

/// True features and targets as an observed dataset.
pub fn observed(pop: &FinitePopulation) -> ObservedDataset {
    let rows = pop
        .units()
        .iter()
        .map(|u| Row {
            id: u.id,
            x: u.x0.clone(),
            y: u.y0,
        })
        .collect();
    ObservedDataset::new(rows, Provenance::default()).unwrap()
}

pub fn targets(pop: &FinitePopulation) -> BTreeMap<UnitId, f64> {
    pop.units().iter().map(|u| (u.id, u.y0)).collect()
}

/// Mean and standard error of the mean.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Empirical variance with divisor `n`.
pub fn pop_var(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

fn sse(ys: &[f64]) -> f64 {
    if ys.is_empty() {
        return 0.0;
    }
    let m = ys.iter().sum::<f64>() / ys.len() as f64;
    ys.iter().map(|y| (y - m) * (y - m)).sum()
}

/// Exhaustive depth-1 split over the midpoints of a single feature: the
/// threshold with the smallest two-sided SSE, ties to the smallest threshold.
/// `None` when no candidate lowers the parent SSE.
pub fn brute_force_split(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let mut distinct = xs.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let parent = sse(ys);
    let mut best: Option<(f64, f64)> = None;
    for w in distinct.windows(2) {
        let t = 0.5 * (w[0] + w[1]);
        let (l, r): (Vec<f64>, Vec<f64>) = {
            let mut l = Vec::new();
            let mut r = Vec::new();
            for (x, y) in xs.iter().zip(ys) {
                if *x < t {
                    l.push(*y)
                } else {
                    r.push(*y)
                }
            }
            (l, r)
        };
        let cost = sse(&l) + sse(&r);
        let scale = parent.abs().max(1e-300);
        match best {
            Some((c, _)) if cost >= c - 1e-10 * scale => {}
            _ => best = Some((cost, t)),
        }
    }
    best.filter(|(c, _)| *c < parent - 1e-10 * parent.abs())
        .map(|(_, t)| t)
}

/// One-feature datasets of every size up to 16: integer-grid values with
/// ties, continuous values, and binary targets.
pub fn supplied_datasets() -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut out = Vec::new();
    for n in 1..=16usize {
        for case in 0..60 {
            let xs: Vec<f64> = (0..n)
                .map(|_| match case % 3 {
                    0 => rng.random_range(0..5) as f64,
                    _ => rng.random_range(-10.0..10.0),
                })
                .collect();
            let ys: Vec<f64> = (0..n)
                .map(|_| match case % 2 {
                    0 => rng.random_range(0..2) as f64,
                    _ => rng.random_range(-5.0..5.0),
                })
                .collect();
            out.push((xs, ys));
        }
    }
    out
}

pub fn dataset_1d(xs: &[f64], ys: &[f64]) -> ObservedDataset {
    let rows = xs
        .iter()
        .zip(ys)
        .enumerate()
        .map(|(i, (x, y))| Row {
            id: i as UnitId + 1,
            x: vec![*x],
            y: *y,
        })
        .collect();
    ObservedDataset::new(rows, Provenance::default()).unwrap()
}

pub fn scenario_config(name: &str) -> tmle_core::harness::ScenarioConfig {
    tmle_core::harness::ScenarioConfig::load(&scenarios_dir().join(name)).unwrap()
}

/// The default scenario shrunk for quick runs.
pub fn small_default(replicates: usize) -> tmle_core::harness::ScenarioConfig {
    use tmle_core::harness::DesignConfig;
    let mut cfg = scenario_config("default.toml");
    cfg.replicates = replicates;
    cfg.training.size = 2000;
    cfg.training.design = DesignConfig::Srswor { n: 600 };
    cfg.target.size = 2000;
    cfg.target.design = DesignConfig::Srswor { n: 200 };
    cfg
}

pub fn read_csv(path: &std::path::Path) -> Vec<BTreeMap<String, String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().clone();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            header.iter().zip(rec.iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect()
        })
        .collect()
}
