//! Super-populations (generative data laws) and the finite populations
//! realized from them.
//!
//! A [`SuperPopulationSpec`] is never represented as a density. It is a
//! sampler: a feature law per feature, a functional dependence `f(x; theta)`
//! and a noise law. Regression targets are `f(x) + N(0, sigma)`. Class labels
//! are obtained by thresholding the latent `f(x) + L` (standard logistic `L`)
//! at cutpoints solved so that the class shares match the requested
//! prevalence.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Open01, StandardNormal};
use sha2::{Digest, Sha256};

use crate::numeric::{pairwise_sum, sigmoid};
use crate::rng::{self, tag};
use crate::{Error, Result, UnitId};

/// Number of feature draws used to solve classification cutpoints.
pub const CUTPOINT_DRAWS: usize = 1 << 20;
/// Relative tolerance on the achieved tail share when solving cutpoints.
pub const CUTPOINT_RTOL: f64 = 1e-6;
const CUTPOINT_SEED: u64 = 0x5eed_c0de;

#[derive(Clone, Debug, PartialEq)]
pub enum FeatureLaw {
    Uniform { low: f64, high: f64 },
    Normal { mean: f64, sd: f64 },
    /// Takes the values `0, 1, .., K-1` with the given probabilities.
    Categorical { probabilities: Vec<f64> },
}

impl FeatureLaw {
    fn validate(&self, j: usize) -> Result<()> {
        match self {
            FeatureLaw::Uniform { low, high } => {
                if !(low.is_finite() && high.is_finite() && low < high) {
                    return Err(Error::config(format!(
                        "feature {j}: uniform bounds must be finite with low < high"
                    )));
                }
            }
            FeatureLaw::Normal { mean, sd } => {
                if !mean.is_finite() || !sd.is_finite() || *sd < 0.0 {
                    return Err(Error::config(format!(
                        "feature {j}: normal law needs a finite mean and sd >= 0"
                    )));
                }
            }
            FeatureLaw::Categorical { probabilities } => {
                check_probability_vector(probabilities)
                    .map_err(|m| Error::config(format!("feature {j}: {m}")))?;
            }
        }
        Ok(())
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            FeatureLaw::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
            FeatureLaw::Normal { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            }
            FeatureLaw::Categorical { probabilities } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (i, p) in probabilities.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return i as f64;
                    }
                }
                (probabilities.len() - 1) as f64
            }
        }
    }
}

fn check_probability_vector(p: &[f64]) -> std::result::Result<(), String> {
    if p.is_empty() {
        return Err("probability vector is empty".into());
    }
    if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err("probabilities must lie in [0, 1]".into());
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(format!("probabilities sum to {s}, not 1"));
    }
    Ok(())
}

/// Functional dependence `f(x; theta)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Dependence {
    Linear {
        intercept: f64,
        coefficients: Vec<f64>,
    },
    /// Step function of one feature: `levels[i]` on the `i`-th interval cut by
    /// the ascending `cuts`.
    PiecewiseConstant {
        feature: usize,
        cuts: Vec<f64>,
        levels: Vec<f64>,
    },
    /// `amplitude * sigmoid(intercept + coefficients . x)`.
    LogisticThreshold {
        intercept: f64,
        coefficients: Vec<f64>,
        amplitude: f64,
    },
}

impl Dependence {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Dependence::Linear {
                intercept,
                coefficients,
            } => intercept + dot(coefficients, x),
            Dependence::PiecewiseConstant {
                feature,
                cuts,
                levels,
            } => levels[cuts.partition_point(|c| *c <= x[*feature])],
            Dependence::LogisticThreshold {
                intercept,
                coefficients,
                amplitude,
            } => amplitude * sigmoid(intercept + dot(coefficients, x)),
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|c| c.is_finite());
        match self {
            Dependence::Linear {
                intercept,
                coefficients,
            }
            | Dependence::LogisticThreshold {
                intercept,
                coefficients,
                ..
            } => {
                if coefficients.len() != dim {
                    return Err(Error::config(format!(
                        "dependence has {} coefficients for {dim} features",
                        coefficients.len()
                    )));
                }
                if !intercept.is_finite() || !finite(coefficients) {
                    return Err(Error::config("dependence parameters must be finite"));
                }
            }
            Dependence::PiecewiseConstant {
                feature,
                cuts,
                levels,
            } => {
                if *feature >= dim {
                    return Err(Error::config(format!(
                        "piecewise dependence on feature {feature} of {dim}"
                    )));
                }
                if levels.len() != cuts.len() + 1 {
                    return Err(Error::config("piecewise dependence needs one more level than cuts"));
                }
                if cuts.windows(2).any(|w| w[0] >= w[1]) || !finite(cuts) || !finite(levels) {
                    return Err(Error::config("piecewise cuts must be finite and strictly ascending"));
                }
            }
        }
        Ok(())
    }

    /// The parameter vector perturbed by theta-rotation drift.
    fn theta_mut(&mut self) -> &mut Vec<f64> {
        match self {
            Dependence::Linear { coefficients, .. }
            | Dependence::LogisticThreshold { coefficients, .. } => coefficients,
            Dependence::PiecewiseConstant { levels, .. } => levels,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Regression,
    Classification { classes: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub enum DriftKind {
    /// Adds the magnitude to the location of one feature law.
    MeanShift { feature: usize },
    /// Multiplies the spread of one feature law by `1 + magnitude`.
    Scale { feature: usize },
    /// Rotates the parameter vector by `magnitude` radians in each consecutive
    /// coordinate plane `(0,1), (2,3), ..`.
    ThetaRotation,
}

impl DriftKind {
    pub fn from_name(name: &str, feature: Option<usize>) -> Result<Self> {
        let need_feature = || {
            feature.ok_or_else(|| Error::config(format!("drift '{name}' needs a feature index")))
        };
        match name {
            "mean-shift" => Ok(DriftKind::MeanShift {
                feature: need_feature()?,
            }),
            "scale" => Ok(DriftKind::Scale {
                feature: need_feature()?,
            }),
            "theta-rotation" => Ok(DriftKind::ThetaRotation),
            other => Err(Error::config(format!("unknown drift operator '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DriftKind::MeanShift { .. } => "mean-shift",
            DriftKind::Scale { .. } => "scale",
            DriftKind::ThetaRotation => "theta-rotation",
        }
    }
}

/// A named drift operator and the magnitude a scenario applies by default.
#[derive(Clone, Debug, PartialEq)]
pub struct Drift {
    pub kind: DriftKind,
    pub magnitude: f64,
}

/// The infinite population `F(Y | X) F(X)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperPopulationSpec {
    features: Vec<FeatureLaw>,
    dependence: Dependence,
    noise_sd: f64,
    task: Task,
    prevalence: Option<Vec<f64>>,
    cutpoints: Vec<f64>,
    drift: Option<Drift>,
}

impl SuperPopulationSpec {
    pub fn regression(
        features: Vec<FeatureLaw>,
        dependence: Dependence,
        noise_sd: f64,
    ) -> Result<Self> {
        validate_common(&features, &dependence)?;
        if !noise_sd.is_finite() || noise_sd < 0.0 {
            return Err(Error::config(format!("noise sd must be >= 0, got {noise_sd}")));
        }
        Ok(Self {
            features,
            dependence,
            noise_sd,
            task: Task::Regression,
            prevalence: None,
            cutpoints: Vec::new(),
            drift: None,
        })
    }

    /// Classification spec whose cutpoints are solved (bisection) so that the
    /// class shares match `prevalence`.
    pub fn classification(
        features: Vec<FeatureLaw>,
        dependence: Dependence,
        prevalence: Vec<f64>,
    ) -> Result<Self> {
        validate_common(&features, &dependence)?;
        if prevalence.len() < 2 {
            return Err(Error::config("classification needs at least two classes"));
        }
        check_probability_vector(&prevalence)
            .map_err(|m| Error::config(format!("prevalence: {m}")))?;
        let cutpoints = solve_cutpoints(&features, &dependence, &prevalence);
        Ok(Self {
            features,
            dependence,
            noise_sd: 0.0,
            task: Task::Classification {
                classes: prevalence.len(),
            },
            prevalence: Some(prevalence),
            cutpoints,
            drift: None,
        })
    }

    pub fn with_drift(mut self, drift: Drift) -> Result<Self> {
        if !drift.magnitude.is_finite() || drift.magnitude < 0.0 {
            return Err(Error::config("drift magnitude must be >= 0"));
        }
        check_drift_applicable(&self, &drift.kind)?;
        self.drift = Some(drift);
        Ok(self)
    }

    pub fn features(&self) -> &[FeatureLaw] {
        &self.features
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }

    pub fn dependence(&self) -> &Dependence {
        &self.dependence
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    pub fn task(&self) -> Task {
        self.task
    }

    /// Prevalence the cutpoints were solved for. Drift keeps the cutpoints, so
    /// a drifted spec may realize a different class mix.
    pub fn prevalence(&self) -> Option<&[f64]> {
        self.prevalence.as_deref()
    }

    pub fn cutpoints(&self) -> &[f64] {
        &self.cutpoints
    }

    pub fn drift(&self) -> Option<&Drift> {
        self.drift.as_ref()
    }

    /// Short stable digest identifying this spec in provenance records.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(format!("{self:?}").as_bytes());
        digest[..8].iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    fn draw_unit<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, f64) {
        let x: Vec<f64> = self.features.iter().map(|law| law.sample(rng)).collect();
        let signal = self.dependence.eval(&x);
        let y = match self.task {
            Task::Regression => {
                if self.noise_sd > 0.0 {
                    let z: f64 = StandardNormal.sample(rng);
                    signal + self.noise_sd * z
                } else {
                    signal
                }
            }
            Task::Classification { .. } => {
                let u: f64 = Open01.sample(rng);
                let latent = signal + (u / (1.0 - u)).ln();
                self.cutpoints.iter().filter(|c| latent > **c).count() as f64
            }
        };
        (x, y)
    }
}

fn validate_common(features: &[FeatureLaw], dependence: &Dependence) -> Result<()> {
    if features.is_empty() {
        return Err(Error::config("a super-population needs at least one feature"));
    }
    for (j, law) in features.iter().enumerate() {
        law.validate(j)?;
    }
    dependence.validate(features.len())
}

fn check_drift_applicable(spec: &SuperPopulationSpec, kind: &DriftKind) -> Result<()> {
    match kind {
        DriftKind::MeanShift { feature } | DriftKind::Scale { feature } => {
            match spec.features.get(*feature) {
                None => Err(Error::config(format!(
                    "drift targets feature {feature} of {}",
                    spec.dim()
                ))),
                Some(FeatureLaw::Categorical { .. }) => Err(Error::config(format!(
                    "drift '{}' is not defined for categorical feature {feature}",
                    kind.name()
                ))),
                Some(_) => Ok(()),
            }
        }
        DriftKind::ThetaRotation => {
            let mut dep = spec.dependence.clone();
            if dep.theta_mut().len() < 2 {
                Err(Error::config("theta-rotation needs at least two parameters"))
            } else {
                Ok(())
            }
        }
    }
}

/// Solves `E[sigmoid(f(X) - c_j)] = P(Y >= j)` for every class boundary on a
/// fixed large draw of the feature law.
fn solve_cutpoints(features: &[FeatureLaw], dependence: &Dependence, prevalence: &[f64]) -> Vec<f64> {
    let mut rng = rng::stream(CUTPOINT_SEED, &[tag::CALIBRATION]);
    let signals: Vec<f64> = (0..CUTPOINT_DRAWS)
        .map(|_| {
            let x: Vec<f64> = features.iter().map(|law| law.sample(&mut rng)).collect();
            dependence.eval(&x)
        })
        .collect();
    let (lo_sig, hi_sig) = signals
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| (lo.min(s), hi.max(s)));
    let tail_share = |c: f64| {
        let terms: Vec<f64> = signals.iter().map(|s| sigmoid(s - c)).collect();
        pairwise_sum(&terms) / signals.len() as f64
    };
    (1..prevalence.len())
        .map(|j| {
            let tail: f64 = prevalence[j..].iter().sum();
            if tail <= 0.0 {
                return f64::INFINITY;
            }
            if tail >= 1.0 {
                return f64::NEG_INFINITY;
            }
            let (mut lo, mut hi) = (lo_sig - 60.0, hi_sig + 60.0);
            let mut mid = 0.5 * (lo + hi);
            for _ in 0..200 {
                mid = 0.5 * (lo + hi);
                let share = tail_share(mid);
                if (share - tail).abs() <= CUTPOINT_RTOL * tail {
                    break;
                }
                if share > tail {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            mid
        })
        .collect()
}

/// Returns a new spec with the spec's drift operator applied at `magnitude`.
pub fn apply_drift(spec: &SuperPopulationSpec, magnitude: f64) -> Result<SuperPopulationSpec> {
    if !magnitude.is_finite() || magnitude < 0.0 {
        return Err(Error::config(format!("drift magnitude must be >= 0, got {magnitude}")));
    }
    let drift = spec
        .drift
        .as_ref()
        .ok_or_else(|| Error::config("spec declares no drift operator"))?;
    let mut out = spec.clone();
    if magnitude == 0.0 {
        return Ok(out);
    }
    match drift.kind {
        DriftKind::MeanShift { feature } => match &mut out.features[feature] {
            FeatureLaw::Normal { mean, .. } => *mean += magnitude,
            FeatureLaw::Uniform { low, high } => {
                *low += magnitude;
                *high += magnitude;
            }
            FeatureLaw::Categorical { .. } => unreachable!("checked by with_drift"),
        },
        DriftKind::Scale { feature } => match &mut out.features[feature] {
            FeatureLaw::Normal { sd, .. } => *sd *= 1.0 + magnitude,
            FeatureLaw::Uniform { low, high } => {
                let centre = 0.5 * (*low + *high);
                let half = 0.5 * (*high - *low) * (1.0 + magnitude);
                *low = centre - half;
                *high = centre + half;
            }
            FeatureLaw::Categorical { .. } => unreachable!("checked by with_drift"),
        },
        DriftKind::ThetaRotation => {
            let (sin, cos) = magnitude.sin_cos();
            for pair in out.dependence.theta_mut().chunks_exact_mut(2) {
                let (a, b) = (pair[0], pair[1]);
                pair[0] = cos * a - sin * b;
                pair[1] = sin * a + cos * b;
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Unit {
    pub id: UnitId,
    pub x0: Vec<f64>,
    pub y0: f64,
}

/// A set of identifiable units with fixed true features and targets.
///
/// Populations from [`realize_population`] number their units `1..=N`. Frames
/// derived from them keep the source ids, so they may have gaps, and may carry
/// extraneous units with ids above `N`.
#[derive(Clone, Debug, PartialEq)]
pub struct FinitePopulation {
    units: Vec<Unit>,
    task: Task,
    source: String,
}

impl FinitePopulation {
    /// Builds a population from arbitrary units. Units are ordered by id;
    /// duplicate ids are rejected.
    pub fn from_units(mut units: Vec<Unit>, task: Task, source: impl Into<String>) -> Result<Self> {
        units.sort_by_key(|u| u.id);
        if units.windows(2).any(|w| w[0].id == w[1].id) {
            return Err(Error::data("duplicate unit ids"));
        }
        if let Some(first) = units.first() {
            let dim = first.x0.len();
            if units.iter().any(|u| u.x0.len() != dim) {
                return Err(Error::data("units have inconsistent feature dimensions"));
            }
        }
        if let Task::Classification { classes } = task {
            if units
                .iter()
                .any(|u| u.y0.fract() != 0.0 || u.y0 < 0.0 || u.y0 >= classes as f64)
            {
                return Err(Error::data(format!("class labels must lie in 0..{classes}")));
            }
        }
        Ok(Self {
            units,
            task,
            source: source.into(),
        })
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn task(&self) -> Task {
        self.task
    }

    /// `spec fingerprint @ seed` for realized populations.
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn get(&self, id: UnitId) -> Option<&Unit> {
        self.units
            .binary_search_by_key(&id, |u| u.id)
            .ok()
            .map(|i| &self.units[i])
    }

    pub fn position(&self, id: UnitId) -> Option<usize> {
        self.units.binary_search_by_key(&id, |u| u.id).ok()
    }

    pub fn feature_column(&self, j: usize) -> Vec<f64> {
        self.units.iter().map(|u| u.x0[j]).collect()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.units.iter().map(|u| u.y0).collect()
    }

    pub fn max_id(&self) -> UnitId {
        self.units.last().map_or(0, |u| u.id)
    }
}

/// Realizes `n` iid units. Unit `k` draws from substream `(seed, k)`, so a
/// larger population extends a smaller one with the same seed.
pub fn realize_population(spec: &SuperPopulationSpec, n: usize, seed: u64) -> FinitePopulation {
    let units = (1..=n as u64)
        .map(|id| {
            let mut rng = rng::unit_stream(seed, &[tag::POPULATION], id);
            let (x0, y0) = spec.draw_unit(&mut rng);
            Unit { id, x0, y0 }
        })
        .collect();
    FinitePopulation {
        units,
        task: spec.task,
        source: format!("{}@{seed}", spec.fingerprint()),
    }
}

/// Population total of the target. Classification populations count the
/// units of the positive class `1`.
pub fn true_total(pop: &FinitePopulation) -> f64 {
    let values: Vec<f64> = match pop.task {
        Task::Regression => pop.units.iter().map(|u| u.y0).collect(),
        Task::Classification { .. } => pop
            .units
            .iter()
            .map(|u| if u.y0 == 1.0 { 1.0 } else { 0.0 })
            .collect(),
    };
    pairwise_sum(&values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_spec(noise: f64) -> SuperPopulationSpec {
        SuperPopulationSpec::regression(
            vec![
                FeatureLaw::Normal { mean: 0.0, sd: 1.0 },
                FeatureLaw::Uniform { low: 0.0, high: 2.0 },
            ],
            Dependence::Linear {
                intercept: 1.0,
                coefficients: vec![2.0, -1.0],
            },
            noise,
        )
        .unwrap()
    }

    #[test]
    fn empty_population() {
        let pop = realize_population(&linear_spec(1.0), 0, 3);
        assert!(pop.is_empty());
        assert_eq!(true_total(&pop), 0.0);
    }

    #[test]
    fn noiseless_targets_follow_dependence() {
        let spec = linear_spec(0.0);
        let pop = realize_population(&spec, 200, 11);
        for u in pop.units() {
            assert_eq!(u.y0, spec.dependence().eval(&u.x0));
        }
    }

    #[test]
    fn ids_contiguous_and_prefix_stable() {
        let spec = linear_spec(1.0);
        let small = realize_population(&spec, 50, 5);
        let big = realize_population(&spec, 80, 5);
        assert!(small.units().iter().map(|u| u.id).eq(1..=50));
        assert_eq!(small.units(), &big.units()[..50]);
        assert_eq!(small, realize_population(&spec, 50, 5));
    }

    #[test]
    fn invalid_specs_rejected() {
        let f = vec![FeatureLaw::Normal { mean: 0.0, sd: 1.0 }];
        let d = Dependence::Linear {
            intercept: 0.0,
            coefficients: vec![1.0],
        };
        assert!(matches!(
            SuperPopulationSpec::regression(f.clone(), d.clone(), -1.0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            SuperPopulationSpec::classification(f.clone(), d.clone(), vec![0.5, 0.6]),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            SuperPopulationSpec::regression(vec![FeatureLaw::Normal { mean: 0.0, sd: -2.0 }], d, 1.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn true_total_arithmetic() {
        let units = [1.0, 2.0, 3.5]
            .iter()
            .enumerate()
            .map(|(i, &y)| Unit {
                id: i as u64 + 1,
                x0: vec![0.0],
                y0: y,
            })
            .collect();
        let pop = FinitePopulation::from_units(units, Task::Regression, "t").unwrap();
        assert_eq!(true_total(&pop), 6.5);
    }

    #[test]
    fn classification_total_counts_positives() {
        let units = (1..=1000u64)
            .map(|id| Unit {
                id,
                x0: vec![0.0],
                y0: if id <= 220 { 1.0 } else { 0.0 },
            })
            .collect();
        let pop =
            FinitePopulation::from_units(units, Task::Classification { classes: 2 }, "t").unwrap();
        assert_eq!(true_total(&pop), 220.0);
    }

    #[test]
    fn drift_zero_is_identity_and_mean_shift_moves_mean() {
        let spec = linear_spec(1.0)
            .with_drift(Drift {
                kind: DriftKind::MeanShift { feature: 0 },
                magnitude: 1.0,
            })
            .unwrap();
        assert_eq!(apply_drift(&spec, 0.0).unwrap(), spec);
        let shifted = apply_drift(&spec, 0.75).unwrap();
        assert_eq!(shifted.features()[0], FeatureLaw::Normal { mean: 0.75, sd: 1.0 });
        assert_eq!(spec.features()[0], FeatureLaw::Normal { mean: 0.0, sd: 1.0 });
        assert!(matches!(apply_drift(&spec, -1.0), Err(Error::Config(_))));
    }

    #[test]
    fn drift_names() {
        assert!(matches!(DriftKind::from_name("wobble", None), Err(Error::Config(_))));
        assert!(matches!(DriftKind::from_name("scale", None), Err(Error::Config(_))));
        assert_eq!(DriftKind::from_name("theta-rotation", None).unwrap(), DriftKind::ThetaRotation);
    }

    #[test]
    fn rotation_preserves_norm() {
        let spec = linear_spec(1.0)
            .with_drift(Drift {
                kind: DriftKind::ThetaRotation,
                magnitude: 0.3,
            })
            .unwrap();
        let rotated = apply_drift(&spec, 1.1).unwrap();
        let Dependence::Linear { coefficients, .. } = rotated.dependence() else {
            unreachable!()
        };
        let norm = coefficients.iter().map(|c| c * c).sum::<f64>();
        assert!((norm - 5.0).abs() < 1e-12);
        assert_ne!(coefficients, &vec![2.0, -1.0]);
    }

    #[test]
    fn rotation_needs_two_parameters() {
        let spec = SuperPopulationSpec::regression(
            vec![FeatureLaw::Normal { mean: 0.0, sd: 1.0 }],
            Dependence::Linear {
                intercept: 0.0,
                coefficients: vec![1.0],
            },
            1.0,
        )
        .unwrap();
        assert!(spec
            .with_drift(Drift {
                kind: DriftKind::ThetaRotation,
                magnitude: 1.0
            })
            .is_err());
    }

    #[test]
    fn three_class_cutpoints_ordered_and_shares_match() {
        let spec = SuperPopulationSpec::classification(
            vec![FeatureLaw::Normal { mean: 0.0, sd: 1.0 }],
            Dependence::Linear {
                intercept: 0.0,
                coefficients: vec![1.5],
            },
            vec![0.5, 0.3, 0.2],
        )
        .unwrap();
        assert!(spec.cutpoints()[0] < spec.cutpoints()[1]);
        let pop = realize_population(&spec, 100_000, 1);
        for (class, p) in [0.5, 0.3, 0.2].iter().enumerate() {
            let share = pop.units().iter().filter(|u| u.y0 == class as f64).count() as f64 / 1e5;
            let tol = 4.0 * (p * (1.0 - p) / 1e5f64).sqrt();
            assert!((share - p).abs() < tol, "class {class}: {share} vs {p}");
        }
    }

    #[test]
    fn piecewise_constant_levels() {
        let d = Dependence::PiecewiseConstant {
            feature: 0,
            cuts: vec![0.0, 1.0],
            levels: vec![-1.0, 0.0, 5.0],
        };
        assert_eq!(d.eval(&[-3.0]), -1.0);
        assert_eq!(d.eval(&[0.0]), 0.0);
        assert_eq!(d.eval(&[2.0]), 5.0);
    }
}
