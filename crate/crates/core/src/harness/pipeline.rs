use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;

use crate::calibration::{
    bias_metric, calibrate_score, ensemble_calibrated, estimate_positive_total, Calibrated,
    CalibrationParams, CountMode, Table1Row,
};
use crate::cart::{design_weighted_leaves, fit, Predict, TreeModel, TreeTask};
use crate::estimator::{cart_assisted_total, EstimateRecord};
use crate::measurement::{
    distort_features, distort_target, misclassify, FeatureNoiseModel, ObservedDataset, Provenance,
    Row,
};
use crate::numeric::sigmoid;
use crate::population::{realize_population, true_total, FinitePopulation, SuperPopulationSpec, Unit};
use crate::representativity::{
    conditional_representativity, coverage_report, Binning, RepresentativityReport,
};
use crate::rng::{self, derive_seed, tag};
use crate::sampling::{apply_nonresponse, draw, Design, Sample};
use crate::{Error, Result, UnitId};

use super::config::{EstimatorMode, Scenario, SplitRule};
use super::report::EnrichmentRow;
use super::{ActiveSources, Configuration, ErrorSource};

const TRAINING_PHASE: u64 = 0;
const TARGET_PHASE: u64 = 1;

/// Threshold turning scores into predicted labels.
const LABEL_THRESHOLD: f64 = 0.5;

/// Confusion counts (classification) or error summaries (regression).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Metrics {
    Classification { tp: u64, fp: u64, tn: u64, fn_: u64 },
    Regression { rmse: f64, mean_error: f64 },
}

impl Metrics {
    pub fn accuracy(&self) -> Option<f64> {
        match *self {
            Metrics::Classification { tp, fp, tn, fn_ } => {
                Some((tp + tn) as f64 / (tp + fp + tn + fn_) as f64)
            }
            Metrics::Regression { .. } => None,
        }
    }

    /// `(name, value)` pairs in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        match *self {
            Metrics::Classification { tp, fp, tn, fn_ } => {
                let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
                let precision = ratio(tp, tp + fp);
                let recall = ratio(tp, tp + fn_);
                let f1 = if precision + recall == 0.0 {
                    0.0
                } else {
                    2.0 * precision * recall / (precision + recall)
                };
                vec![
                    ("accuracy", ratio(tp + tn, tp + fp + tn + fn_)),
                    ("precision", precision),
                    ("recall", recall),
                    ("f1", f1),
                    ("tp", tp as f64),
                    ("fp", fp as f64),
                    ("tn", tn as f64),
                    ("fn", fn_ as f64),
                ]
            }
            Metrics::Regression { rmse, mean_error } => {
                vec![("rmse", rmse), ("mean_error", mean_error)]
            }
        }
    }
}

/// Scores `data` with `model`. Classification labels are `score >= 0.5`.
pub fn evaluate_metrics<P: Predict + ?Sized>(
    model: &P,
    data: &ObservedDataset,
    task: TreeTask,
) -> Result<Metrics> {
    if data.is_empty() {
        return Err(Error::data("cannot evaluate metrics on an empty dataset"));
    }
    match task {
        TreeTask::Classification => {
            let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
            for r in data.rows() {
                let predicted = model.predict(&r.x)? >= LABEL_THRESHOLD;
                match (predicted, r.y == 1.0) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, false) => tn += 1,
                    (false, true) => fn_ += 1,
                }
            }
            Ok(Metrics::Classification { tp, fp, tn, fn_ })
        }
        TreeTask::Regression => {
            let mut sq = 0.0;
            let mut sum = 0.0;
            for r in data.rows() {
                let e = model.predict(&r.x)? - r.y;
                sq += e * e;
                sum += e;
            }
            let n = data.len() as f64;
            Ok(Metrics::Regression {
                rmse: (sq / n).sqrt(),
                mean_error: sum / n,
            })
        }
    }
}

#[derive(Clone, Debug)]
pub struct Split {
    pub train: ObservedDataset,
    pub test: ObservedDataset,
}

/// Uniform random partition of `data`: one holdout split, or one split per
/// fold.
pub fn split_train_test(data: &ObservedDataset, rule: SplitRule, seed: u64) -> Result<Vec<Split>> {
    let n = data.len();
    if n == 0 {
        return Err(Error::data("cannot split an empty sample"));
    }
    let mut rng = rng::stream(seed, &[tag::SPLIT]);
    let part_of = |assign: &[usize], k: usize, want: bool| {
        let mut i = 0;
        data.filter(|_| {
            let hit = (assign[i] == k) == want;
            i += 1;
            hit
        })
    };
    match rule {
        SplitRule::Holdout(h) => {
            let n_test = (h * n as f64).round() as usize;
            if n_test == 0 || n_test >= n {
                return Err(Error::config(format!(
                    "holdout {h} of {n} rows leaves an empty part"
                )));
            }
            let mut assign = vec![0; n];
            for i in index::sample(&mut rng, n, n_test) {
                assign[i] = 1;
            }
            Ok(vec![Split {
                train: part_of(&assign, 0, true),
                test: part_of(&assign, 1, true),
            }])
        }
        SplitRule::Folds(k) => {
            if k < 2 || n < k {
                return Err(Error::config(format!("{k} folds over {n} rows")));
            }
            let perm = index::sample(&mut rng, n, n).into_vec();
            let mut assign = vec![0; n];
            for (pos, &i) in perm.iter().enumerate() {
                assign[i] = pos % k;
            }
            Ok((0..k)
                .map(|f| Split {
                    train: part_of(&assign, f, false),
                    test: part_of(&assign, f, true),
                })
                .collect())
        }
    }
}

/// Labels known so far, by unit id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabeledFrame {
    pub labels: BTreeMap<UnitId, f64>,
}

impl LabeledFrame {
    pub fn positives(&self) -> usize {
        self.labels.values().filter(|y| **y == 1.0).count()
    }
}

/// Labels a simple random batch of the units of `oracle` that `frame` does
/// not hold yet, using their true targets.
pub fn enrich_training_frame(
    frame: &LabeledFrame,
    oracle: &FinitePopulation,
    batch: usize,
    seed: u64,
) -> Result<LabeledFrame> {
    let pool: Vec<&Unit> = oracle
        .units()
        .iter()
        .filter(|u| !frame.labels.contains_key(&u.id))
        .collect();
    if batch > pool.len() {
        return Err(Error::config(format!(
            "enrichment batch {batch} exceeds the unlabeled pool of {}",
            pool.len()
        )));
    }
    let mut out = frame.clone();
    let mut rng = rng::stream(seed, &[tag::ENRICH]);
    for i in index::sample(&mut rng, pool.len(), batch) {
        out.labels.insert(pool[i].id, pool[i].y0);
    }
    Ok(out)
}

/// Results of one configuration within one replicate.
#[derive(Clone, Debug)]
pub struct ConfigurationOutcome {
    pub key: String,
    pub active: ActiveSources,
    pub true_total: f64,
    pub estimate: EstimateRecord,
    pub leaf_count: usize,
    pub sample_size: usize,
    pub internal: Vec<(&'static str, f64)>,
    pub external: Vec<(&'static str, f64)>,
    /// Replicate 0 only: training data against the target population, and
    /// frame coverage of the training population.
    pub representativity: Option<(RepresentativityReport, (f64, f64))>,
}

#[derive(Clone, Debug)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub configurations: Vec<ConfigurationOutcome>,
}

fn tree_task(sc: &Scenario) -> TreeTask {
    if sc.is_classification() {
        TreeTask::Classification
    } else {
        TreeTask::Regression
    }
}

fn replicate_seed(sc: &Scenario, replicate: usize) -> u64 {
    derive_seed(sc.config.seed, &[replicate as u64])
}

fn observe_features(
    model: &FeatureNoiseModel,
    unit: &Unit,
    seed: u64,
    phase: u64,
) -> Result<Vec<f64>> {
    let mut rng = rng::unit_stream(seed, &[tag::FEATURE_NOISE, phase], unit.id);
    distort_features(&unit.x0, model, &mut rng)
}

fn observe_label(sc: &Scenario, active: ActiveSources, unit: &Unit, seed: u64, phase: u64) -> Result<f64> {
    if !active.contains(ErrorSource::LabelMisclassification) {
        return Ok(unit.y0);
    }
    let mut rng = rng::unit_stream(seed, &[tag::LABEL_NOISE, phase], unit.id);
    match &sc.matrix {
        Some(t) => Ok(misclassify(unit.y0 as usize, t, &mut rng)? as f64),
        None => Ok(distort_target(unit.y0, sc.config.noise.label_sd, &mut rng)),
    }
}

/// Frame over `pop`: undercoverage and overcoverage when active, then the
/// case-control selection when configured.
fn materialize_frame(
    sc: &Scenario,
    active: ActiveSources,
    pop: &FinitePopulation,
    seed: u64,
) -> Result<FinitePopulation> {
    let frame_cfg = &sc.config.frame;
    let coverage = active.contains(ErrorSource::FrameCoverage);
    let mut units: Vec<Unit> = pop
        .units()
        .iter()
        .filter(|u| match (&frame_cfg.undercoverage, coverage) {
            (Some(uc), true) if u.x0[uc.feature] > uc.above => {
                rng::unit_stream(seed, &[tag::FRAME, 1], u.id).random::<f64>() >= uc.rate
            }
            _ => true,
        })
        .cloned()
        .collect();
    if let Some(share) = frame_cfg.positive_share {
        let (pos, neg): (Vec<Unit>, Vec<Unit>) = units.into_iter().partition(|u| u.y0 == 1.0);
        let want = ((pos.len() as f64) * (1.0 - share) / share).round() as usize;
        let mut rng = rng::stream(seed, &[tag::FRAME, 0]);
        let keep: BTreeSet<usize> = index::sample(&mut rng, neg.len(), want.min(neg.len()))
            .into_iter()
            .collect();
        units = pos;
        units.extend(neg.into_iter().enumerate().filter(|(i, _)| keep.contains(i)).map(|(_, u)| u));
    }
    if coverage && frame_cfg.overcoverage > 0.0 {
        let extra = (frame_cfg.overcoverage * pop.len() as f64).round() as usize;
        let stray = realize_population(&sc.spec, extra, derive_seed(seed, &[tag::OVERCOVERAGE]));
        let offset = pop.max_id();
        units.extend(stray.units().iter().map(|u| Unit {
            id: offset + u.id,
            x0: u.x0.clone(),
            y0: 0.0,
        }));
    }
    FinitePopulation::from_units(units, pop.task(), format!("frame({})", pop.source()))
}

struct TrainingPhase {
    frame: FinitePopulation,
    /// Observed rows of the training sample.
    data: ObservedDataset,
    /// Rows the final model was fitted on.
    fit_set: ObservedDataset,
    model: TreeModel,
    internal: Vec<(&'static str, f64)>,
}

fn mean_entries(sets: &[Vec<(&'static str, f64)>]) -> Vec<(&'static str, f64)> {
    let k = sets.len() as f64;
    sets[0]
        .iter()
        .enumerate()
        .map(|(i, (name, _))| (*name, sets.iter().map(|s| s[i].1).sum::<f64>() / k))
        .collect()
}

fn training_phase(
    sc: &Scenario,
    active: ActiveSources,
    seed: u64,
    pop: &FinitePopulation,
) -> Result<TrainingPhase> {
    let frame = materialize_frame(sc, active, pop, seed)?;
    let design = if active.contains(ErrorSource::Sampling) {
        sc.training_design.clone()
    } else {
        Design::Census
    };
    let sample = draw(&design, &frame, derive_seed(seed, &[tag::TRAIN_DESIGN]))?;
    let noise = sc.noise_model(active);
    let rows = sample
        .ids()
        .map(|id| {
            let unit = frame.get(id).ok_or(Error::Lookup(id))?;
            Ok(Row {
                id,
                x: observe_features(&noise, unit, seed, TRAINING_PHASE)?,
                y: observe_label(sc, active, unit, seed, TRAINING_PHASE)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let data = ObservedDataset::new(
        rows,
        Provenance {
            population: pop.source().to_string(),
            sample: design.label(),
            noise_model: format!("{active}"),
            matrix: sc.matrix.as_ref().map(|m| format!("{:?}", m.rows())).unwrap_or_default(),
        },
    )?;
    let task = tree_task(sc);
    let splits = split_train_test(&data, sc.config.training.split, derive_seed(seed, &[tag::SPLIT]))?;
    let (model, fit_set, internal) = if let [only] = splits.as_slice() {
        let model = fit(&only.train, &sc.fit, task)?;
        let internal = evaluate_metrics(&model, &only.test, task)?.entries();
        (model, only.train.clone(), internal)
    } else {
        let per_fold = splits
            .iter()
            .map(|s| Ok(evaluate_metrics(&fit(&s.train, &sc.fit, task)?, &s.test, task)?.entries()))
            .collect::<Result<Vec<_>>>()?;
        (fit(&data, &sc.fit, task)?, data.clone(), mean_entries(&per_fold))
    };
    Ok(TrainingPhase {
        frame,
        data,
        fit_set,
        model,
        internal,
    })
}

fn positive_share(data: &ObservedDataset) -> f64 {
    data.rows().iter().filter(|r| r.y == 1.0).count() as f64 / data.len() as f64
}

fn calibration_for(sc: &Scenario, fit_set: &ObservedDataset) -> Result<Option<CalibrationParams>> {
    match &sc.calibration {
        None => Ok(None),
        Some(base) => CalibrationParams::new(positive_share(fit_set), base.p_target())
            .map(Some)
            .map_err(|e| Error::Estimation(format!("training prevalence: {e}"))),
    }
}

/// Observed features and true targets of every unit of `pop`.
fn observe_population(
    pop: &FinitePopulation,
    noise: &FeatureNoiseModel,
    seed: u64,
) -> Result<ObservedDataset> {
    let rows = pop
        .units()
        .iter()
        .map(|u| {
            Ok(Row {
                id: u.id,
                x: observe_features(noise, u, seed, TARGET_PHASE)?,
                y: u.y0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ObservedDataset::new(
        rows,
        Provenance {
            population: pop.source().to_string(),
            ..Provenance::default()
        },
    )
}

fn binning_for(sc: &Scenario, data: &ObservedDataset) -> Result<Binning> {
    let features: Vec<usize> = match &sc.config.representativity {
        Some(r) => r.features.clone(),
        None => (0..data.dim().min(2)).collect(),
    };
    Binning::quartiles(data, &features)
}

fn run_configuration(
    sc: &Scenario,
    config: &Configuration,
    replicate: usize,
    seed: u64,
    train_pop: &FinitePopulation,
    target_pop: &FinitePopulation,
) -> Result<ConfigurationOutcome> {
    let active = config.active;
    let task = tree_task(sc);
    let training = training_phase(sc, active, seed, train_pop)?;

    let noise = sc.noise_model(active);
    let target_obs = observe_population(target_pop, &noise, seed)?;
    let design = if active.contains(ErrorSource::Sampling) {
        sc.target_design.clone()
    } else {
        Design::Census
    };
    let mut sample = draw(&design, target_pop, derive_seed(seed, &[tag::TARGET_DESIGN]))?;
    if active.contains(ErrorSource::Nonresponse) {
        let nr = sc.config.nonresponse.as_ref().expect("validated");
        let propensity: BTreeMap<UnitId, f64> = sample
            .ids()
            .map(|id| {
                let y0 = target_pop.get(id).map_or(0.0, |u| u.y0);
                (id, sigmoid(nr.intercept + nr.slope * y0).max(nr.floor))
            })
            .collect();
        sample = apply_nonresponse(&sample, &propensity, derive_seed(seed, &[tag::NONRESPONSE]))?;
    }
    let mut values = BTreeMap::new();
    let mut sample_rows = Vec::with_capacity(sample.len());
    let mut truth_rows = Vec::with_capacity(sample.len());
    for id in sample.ids() {
        let unit = target_pop.get(id).ok_or(Error::Lookup(id))?;
        let pos = target_pop.position(id).ok_or(Error::Lookup(id))?;
        let x = target_obs.rows()[pos].x.clone();
        let y = observe_label(sc, active, unit, seed, TARGET_PHASE)?;
        values.insert(id, y);
        sample_rows.push(Row { id, x: x.clone(), y });
        truth_rows.push(Row { id, x, y: unit.y0 });
    }
    let sample_obs = ObservedDataset::new(sample_rows, Provenance::default())?;
    let sample_truth = ObservedDataset::new(truth_rows, Provenance::default())?;

    let (estimate, leaf_count) = estimate_total(sc, &training, &sample, &sample_obs, &target_obs, &values)?;
    if sample_truth.is_empty() {
        return Err(Error::Estimation("the target sample is empty".into()));
    }
    let external = evaluate_metrics(&training.model, &sample_truth, task)?.entries();
    let representativity = if replicate == 0 {
        let binning = binning_for(sc, &training.data)?;
        Some((
            conditional_representativity(&training.data, &target_obs, &binning)?,
            coverage_report(&training.frame, train_pop)?,
        ))
    } else {
        None
    };
    Ok(ConfigurationOutcome {
        key: config.key.clone(),
        active,
        true_total: true_total(target_pop),
        estimate,
        leaf_count,
        sample_size: sample.len(),
        internal: training.internal,
        external,
        representativity,
    })
}

fn estimate_total(
    sc: &Scenario,
    training: &TrainingPhase,
    sample: &Sample,
    sample_obs: &ObservedDataset,
    target_obs: &ObservedDataset,
    values: &BTreeMap<UnitId, f64>,
) -> Result<(EstimateRecord, usize)> {
    match sc.config.estimator.mode {
        EstimatorMode::FixedModel => {
            let model = &training.model;
            let record = match calibration_for(sc, &training.fit_set)? {
                Some(params) => {
                    let calibrated = Calibrated { inner: model, params };
                    cart_assisted_total(target_obs, sample, values, &calibrated)?
                }
                None => cart_assisted_total(target_obs, sample, values, model)?,
            };
            Ok((record, model.leaf_count()))
        }
        EstimatorMode::Reweighted => {
            let model = design_weighted_leaves(&training.model, sample, sample_obs)?;
            Ok((cart_assisted_total(target_obs, sample, values, &model)?, model.leaf_count()))
        }
        EstimatorMode::Assisting => {
            if sample_obs.is_empty() {
                return Err(Error::Estimation("no sampled units to fit an assisting model".into()));
            }
            let local = fit(sample_obs, &sc.fit, tree_task(sc))?;
            let model = design_weighted_leaves(&local, sample, sample_obs)?;
            Ok((cart_assisted_total(target_obs, sample, values, &model)?, model.leaf_count()))
        }
    }
}

struct SharedPopulations {
    seed: u64,
    training: FinitePopulation,
    target: FinitePopulation,
    drifted: Option<FinitePopulation>,
}

fn shared_populations(sc: &Scenario, replicate: usize, configs: &[Configuration]) -> SharedPopulations {
    let seed = replicate_seed(sc, replicate);
    let target_seed = derive_seed(seed, &[tag::TARGET_POPULATION]);
    let realize = |spec: &SuperPopulationSpec| realize_population(spec, sc.config.target.size, target_seed);
    let drift_used = configs.iter().any(|c| c.active.contains(ErrorSource::Drift));
    SharedPopulations {
        seed,
        training: realize_population(
            &sc.spec,
            sc.config.training.size,
            derive_seed(seed, &[tag::TRAIN_POPULATION]),
        ),
        target: realize(&sc.spec),
        drifted: match &sc.drifted {
            Some(d) if drift_used => Some(realize(d)),
            _ => None,
        },
    }
}

impl SharedPopulations {
    fn target_for(&self, active: ActiveSources) -> &FinitePopulation {
        match &self.drifted {
            Some(d) if active.contains(ErrorSource::Drift) => d,
            _ => &self.target,
        }
    }
}

/// One replicate over every configuration. Populations and random streams are
/// shared across configurations, so their differences are paired.
pub fn replicate_once(
    sc: &Scenario,
    configs: &[Configuration],
    replicate: usize,
) -> Result<ReplicateOutcome> {
    let pops = shared_populations(sc, replicate, configs);
    let configurations = configs
        .iter()
        .map(|c| {
            run_configuration(
                sc,
                c,
                replicate,
                pops.seed,
                &pops.training,
                pops.target_for(c.active),
            )
            .map_err(|e| match e {
                Error::Estimation(m) => Error::Estimation(format!("{}: {m}", c.key)),
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReplicateOutcome {
        replicate,
        configurations,
    })
}

#[derive(Clone, Debug, Default)]
pub(crate) struct Extras {
    pub table1: Vec<Table1Row>,
    pub enrichment: Vec<EnrichmentRow>,
}

fn external_accuracy<P: Predict + ?Sized>(model: &P, target: &ObservedDataset) -> Result<f64> {
    let m = evaluate_metrics(model, target, TreeTask::Classification)?;
    Ok(m.accuracy().expect("classification metrics"))
}

fn label_accuracy(scores: &[f64], target: &ObservedDataset, threshold: f64) -> f64 {
    let hits = scores
        .iter()
        .zip(target.rows())
        .filter(|(s, r)| (**s >= threshold) == (r.y == 1.0))
        .count();
    hits as f64 / scores.len() as f64
}

fn bootstrap(data: &ObservedDataset, seed: u64) -> Result<ObservedDataset> {
    let mut rng = rng::stream(seed, &[]);
    let n = data.len();
    let rows = (0..n)
        .map(|i| {
            let r = &data.rows()[rng.random_range(0..n)];
            Row {
                id: i as UnitId + 1,
                x: r.x.clone(),
                y: r.y,
            }
        })
        .collect();
    ObservedDataset::new(rows, data.provenance.clone())
}

/// The positive-count comparison and the enrichment loop, on replicate 0 of
/// the all-on configuration over the whole target population.
pub(crate) fn single_run_experiments(sc: &Scenario, configs: &[Configuration]) -> Result<Extras> {
    if sc.calibration.is_none() && sc.config.enrichment.is_none() {
        return Ok(Extras::default());
    }
    let all_on = configs.last().expect("configurations end with all_on");
    let pops = shared_populations(sc, 0, configs);
    let active = all_on.active;
    let training = training_phase(sc, active, pops.seed, &pops.training)?;
    let target_pop = pops.target_for(active);
    let target = observe_population(target_pop, &sc.noise_model(active), pops.seed)?;
    let mut extras = Extras::default();

    if let Some(cal) = &sc.config.calibration {
        let true_pos = true_total(target_pop) as u64;
        let n_total = target.len() as u64;
        let params = calibration_for(sc, &training.fit_set)?.expect("calibration configured");
        let raw = target
            .rows()
            .iter()
            .map(|r| training.model.predict(&r.x))
            .collect::<Result<Vec<_>>>()?;
        let calibrated = raw
            .iter()
            .map(|s| calibrate_score(*s, &params))
            .collect::<Result<Vec<_>>>()?;
        let members = (0..cal.ensemble)
            .into_par_iter()
            .map(|m| {
                let member_seed = derive_seed(pops.seed, &[tag::ENSEMBLE, m as u64]);
                let data = bootstrap(&training.fit_set, member_seed)?;
                let model = fit(&data, &sc.fit, TreeTask::Classification)?;
                let params = CalibrationParams::new(positive_share(&data), params.p_target())
                    .map_err(|e| Error::Estimation(format!("ensemble member {m}: {e}")))?;
                let scores = target
                    .rows()
                    .iter()
                    .map(|r| model.predict(&r.x))
                    .collect::<Result<Vec<_>>>()?;
                Ok((scores, params))
            })
            .collect::<Result<Vec<_>>>()?;
        let (member_scores, member_params): (Vec<_>, Vec<_>) = members.into_iter().unzip();
        let ensemble = ensemble_calibrated(&member_scores, &member_params)?;
        let tau = cal.threshold;
        let rows = [
            ("threshold", estimate_positive_total(&raw, CountMode::Threshold(tau))?, &raw),
            ("probability_sum", estimate_positive_total(&raw, CountMode::ProbabilitySum)?, &raw),
            (
                "calibrated_probability_sum",
                estimate_positive_total(&calibrated, CountMode::ProbabilitySum)?,
                &calibrated,
            ),
            (
                "ensemble_calibrated",
                estimate_positive_total(&ensemble, CountMode::ProbabilitySum)?,
                &ensemble,
            ),
        ];
        extras.table1 = rows
            .into_iter()
            .map(|(method, est_pos, scores)| Table1Row {
                method: method.into(),
                true_pos,
                est_pos,
                bias: bias_metric(est_pos, true_pos, n_total),
                accuracy: label_accuracy(scores, &target, tau),
            })
            .collect();
    }

    if let Some(en) = &sc.config.enrichment {
        let noise = sc.noise_model(active);
        let mut known: BTreeMap<UnitId, Vec<f64>> = training
            .fit_set
            .rows()
            .iter()
            .map(|r| (r.id, r.x.clone()))
            .collect();
        let mut frame = LabeledFrame {
            labels: training.fit_set.rows().iter().map(|r| (r.id, r.y)).collect(),
        };
        let mut model = training.model.clone();
        for it in 0..=en.iterations {
            if it > 0 {
                let seed = derive_seed(pops.seed, &[tag::ENRICH, it as u64]);
                frame = enrich_training_frame(&frame, &pops.training, en.batch, seed)?;
                let rows = frame
                    .labels
                    .iter()
                    .map(|(&id, &y)| {
                        let x = match known.get(&id) {
                            Some(x) => x.clone(),
                            None => {
                                let unit = pops.training.get(id).ok_or(Error::Lookup(id))?;
                                let x = observe_features(&noise, unit, pops.seed, TRAINING_PHASE)?;
                                known.insert(id, x.clone());
                                x
                            }
                        };
                        Ok(Row { id, x, y })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let data = ObservedDataset::new(rows, Provenance::default())?;
                model = fit(&data, &sc.fit, TreeTask::Classification)?;
            }
            extras.enrichment.push(EnrichmentRow {
                iteration: it,
                labeled: frame.labels.len(),
                positives: frame.positives(),
                external_accuracy: external_accuracy(&model, &target)?,
            });
        }
    }
    Ok(extras)
}
