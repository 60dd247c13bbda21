//! Scenario files: a TOML key tree with an explicit schema version. Unknown
//! keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibration::CalibrationParams;
use crate::cart::FitConfig;
use crate::measurement::{FeatureNoiseModel, TransformationMatrix};
use crate::population::{
    apply_drift, Dependence, Drift, DriftKind, FeatureLaw, SuperPopulationSpec, Task,
};
use crate::sampling::{Design, PoissonSize};
use crate::{Error, Result};

use super::{ActiveSources, ErrorSource};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub name: String,
    pub seed: u64,
    pub replicates: usize,
    pub population: PopulationConfig,
    pub training: TrainingConfig,
    pub target: TargetConfig,
    #[serde(default)]
    pub frame: FrameConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    pub drift: Option<DriftConfig>,
    pub nonresponse: Option<NonresponseConfig>,
    #[serde(default)]
    pub fit: FitSection,
    pub estimator: EstimatorConfig,
    pub calibration: Option<CalibrationConfig>,
    pub enrichment: Option<EnrichmentConfig>,
    pub representativity: Option<RepresentativityConfig>,
    pub toggles: Toggles,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    Regression,
    Classification,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationConfig {
    pub task: TaskKind,
    /// Regression noise sd.
    #[serde(default)]
    pub noise_sd: f64,
    /// Positive-class share for classification.
    pub prevalence: Option<f64>,
    pub features: Vec<FeatureConfig>,
    pub dependence: DependenceConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FeatureConfig {
    Uniform { low: f64, high: f64 },
    Normal { mean: f64, sd: f64 },
    Categorical { probabilities: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DependenceConfig {
    Linear {
        intercept: f64,
        coefficients: Vec<f64>,
    },
    PiecewiseConstant {
        feature: usize,
        cuts: Vec<f64>,
        levels: Vec<f64>,
    },
    LogisticThreshold {
        intercept: f64,
        coefficients: Vec<f64>,
        amplitude: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DesignConfig {
    Census,
    Srswor { n: usize },
    Srswr { n: usize },
    Poisson { expected_size: f64 },
    Stratified {
        feature: usize,
        cuts: Vec<f64>,
        sizes: Vec<usize>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum SplitRule {
    Holdout(f64),
    Folds(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub size: usize,
    pub design: DesignConfig,
    pub split: SplitRule,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub size: usize,
    pub design: DesignConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameConfig {
    /// Case-control frame: every positive unit plus enough negatives to make
    /// up this share. Always applied.
    pub positive_share: Option<f64>,
    /// Applied when frame coverage errors are active.
    pub undercoverage: Option<UndercoverageConfig>,
    /// Extraneous units, as a share of the training population size, added
    /// when frame coverage errors are active. They carry target 0.
    #[serde(default)]
    pub overcoverage: f64,
}

/// Units with `x[feature] > above` leave the frame with probability `rate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UndercoverageConfig {
    pub feature: usize,
    pub above: f64,
    pub rate: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub feature_sd: Vec<f64>,
    /// Feature indices dropped under model-assumption errors.
    #[serde(default)]
    pub omit: Vec<usize>,
    #[serde(default)]
    pub label_sd: f64,
    /// Row-major, `matrix[i][j] = P(observed i | true j)`.
    pub matrix: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftConfig {
    pub kind: String,
    pub feature: Option<usize>,
    pub magnitude: f64,
}

/// Response propensity `max(floor, sigmoid(intercept + slope * y0))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonresponseConfig {
    pub intercept: f64,
    pub slope: f64,
    #[serde(default = "default_floor")]
    pub floor: f64,
}

fn default_floor() -> f64 {
    0.05
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub max_depth: usize,
    pub min_leaf: usize,
    pub min_split_improvement: f64,
}

impl Default for FitSection {
    fn default() -> Self {
        let d = FitConfig::default();
        Self {
            max_depth: d.max_depth,
            min_leaf: d.min_leaf,
            min_split_improvement: d.min_split_improvement,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorMode {
    /// The training-phase model as fitted.
    FixedModel,
    /// A tree fitted on the target sample, leaves design-weighted.
    Assisting,
    /// Training-phase regions, leaves re-estimated from the target sample.
    Reweighted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub mode: EstimatorMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    /// Assumed population prevalence; defaults to the population's.
    pub p_target: Option<f64>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_ensemble")]
    pub ensemble: usize,
}

fn default_threshold() -> f64 {
    0.5
}

fn default_ensemble() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnrichmentConfig {
    pub batch: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
}

fn default_iterations() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepresentativityConfig {
    /// Conditioning features, as indices into the retained features.
    pub features: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Toggles {
    pub feature_noise: bool,
    pub label_misclassification: bool,
    pub frame_coverage: bool,
    pub sampling: bool,
    pub model_assumption: bool,
    pub drift: bool,
    pub nonresponse: bool,
}

impl Toggles {
    pub fn enabled(&self) -> ActiveSources {
        let mut s = ActiveSources::NONE;
        for source in ErrorSource::ALL {
            let on = match source {
                ErrorSource::FeatureNoise => self.feature_noise,
                ErrorSource::LabelMisclassification => self.label_misclassification,
                ErrorSource::FrameCoverage => self.frame_coverage,
                ErrorSource::Sampling => self.sampling,
                ErrorSource::ModelAssumption => self.model_assumption,
                ErrorSource::Drift => self.drift,
                ErrorSource::Nonresponse => self.nonresponse,
            };
            if on {
                s = s.with(source);
            }
        }
        s
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    /// Hex sha256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn design_of(d: &DesignConfig) -> Design {
    match d {
        DesignConfig::Census => Design::Census,
        DesignConfig::Srswor { n } => Design::Srswor { n: *n },
        DesignConfig::Srswr { n } => Design::Srswr { n: *n },
        DesignConfig::Poisson { expected_size } => {
            Design::Poisson(PoissonSize::Expected(*expected_size))
        }
        DesignConfig::Stratified {
            feature,
            cuts,
            sizes,
        } => Design::Stratified {
            feature: *feature,
            cuts: cuts.clone(),
            sizes: sizes.clone(),
        },
    }
}

fn check_design(d: &DesignConfig, size: usize, what: &str, dim: usize) -> Result<()> {
    let bad = |m: String| Err(Error::config(format!("{what} design: {m}")));
    match d {
        DesignConfig::Census => Ok(()),
        DesignConfig::Srswor { n } if *n == 0 || *n > size => {
            bad(format!("srswor size {n} must lie in 1..={size}"))
        }
        DesignConfig::Srswr { n } if *n == 0 => bad("srswr needs n >= 1".into()),
        DesignConfig::Poisson { expected_size }
            if !(*expected_size > 0.0 && *expected_size <= size as f64) =>
        {
            bad(format!("expected size {expected_size} must lie in (0, {size}]"))
        }
        DesignConfig::Stratified {
            feature,
            cuts,
            sizes,
        } => {
            if *feature >= dim {
                return bad(format!("stratification feature {feature} out of range"));
            }
            if sizes.len() != cuts.len() + 1 {
                return bad("stratified design needs one size per stratum".into());
            }
            if cuts.windows(2).any(|w| !(w[0] < w[1])) {
                return bad("strata cuts must be strictly increasing".into());
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

/// A validated scenario with its derived domain objects.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    /// Training population law; the target law too when drift is off.
    pub spec: SuperPopulationSpec,
    /// Target law with the drift operator applied.
    pub drifted: Option<SuperPopulationSpec>,
    pub feature_noise: FeatureNoiseModel,
    pub omitted: Vec<bool>,
    pub matrix: Option<TransformationMatrix>,
    pub fit: FitConfig,
    pub training_design: Design,
    pub target_design: Design,
    pub calibration: Option<CalibrationParams>,
    pub enabled: ActiveSources,
}

impl Scenario {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        if config.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                config.schema_version
            )));
        }
        if config.replicates == 0 {
            return Err(Error::config("replicates must be >= 1"));
        }
        let pc = &config.population;
        let dim = pc.features.len();
        if dim == 0 {
            return Err(Error::config("population needs at least one feature"));
        }
        let features: Vec<FeatureLaw> = pc
            .features
            .iter()
            .map(|f| match f {
                FeatureConfig::Uniform { low, high } => FeatureLaw::Uniform {
                    low: *low,
                    high: *high,
                },
                FeatureConfig::Normal { mean, sd } => FeatureLaw::Normal {
                    mean: *mean,
                    sd: *sd,
                },
                FeatureConfig::Categorical { probabilities } => FeatureLaw::Categorical {
                    probabilities: probabilities.clone(),
                },
            })
            .collect();
        let dependence = match &pc.dependence {
            DependenceConfig::Linear {
                intercept,
                coefficients,
            } => Dependence::Linear {
                intercept: *intercept,
                coefficients: coefficients.clone(),
            },
            DependenceConfig::PiecewiseConstant {
                feature,
                cuts,
                levels,
            } => Dependence::PiecewiseConstant {
                feature: *feature,
                cuts: cuts.clone(),
                levels: levels.clone(),
            },
            DependenceConfig::LogisticThreshold {
                intercept,
                coefficients,
                amplitude,
            } => Dependence::LogisticThreshold {
                intercept: *intercept,
                coefficients: coefficients.clone(),
                amplitude: *amplitude,
            },
        };
        let mut spec = match pc.task {
            TaskKind::Regression => {
                if pc.prevalence.is_some() {
                    return Err(Error::config("prevalence applies to classification only"));
                }
                SuperPopulationSpec::regression(features, dependence, pc.noise_sd)?
            }
            TaskKind::Classification => {
                let p = pc
                    .prevalence
                    .ok_or_else(|| Error::config("classification needs a prevalence"))?;
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::config(format!("prevalence {p} outside (0, 1)")));
                }
                if pc.noise_sd != 0.0 {
                    return Err(Error::config("noise_sd applies to regression only"));
                }
                SuperPopulationSpec::classification(features, dependence, vec![1.0 - p, p])?
            }
        };
        let classification = matches!(spec.task(), Task::Classification { .. });
        let t = config.toggles;

        if let Some(d) = &config.drift {
            let kind = DriftKind::from_name(&d.kind, d.feature)?;
            spec = spec.with_drift(Drift {
                kind,
                magnitude: d.magnitude,
            })?;
        }
        let drifted = match &config.drift {
            Some(d) => Some(apply_drift(&spec, d.magnitude)?),
            None if t.drift => return Err(Error::config("drift toggle needs a [drift] section")),
            None => None,
        };

        if config.training.size == 0 || config.target.size == 0 {
            return Err(Error::config("population sizes must be >= 1"));
        }
        check_design(&config.training.design, usize::MAX, "training", dim)?;
        check_design(&config.target.design, config.target.size, "target", dim)?;
        match config.training.split {
            SplitRule::Holdout(h) if !(h > 0.0 && h < 1.0) => {
                return Err(Error::config(format!("holdout fraction {h} outside (0, 1)")));
            }
            SplitRule::Folds(k) if k < 2 => {
                return Err(Error::config("k-fold split needs at least 2 folds"));
            }
            _ => {}
        }

        let frame = &config.frame;
        if let Some(s) = frame.positive_share {
            if !classification {
                return Err(Error::config("positive_share applies to classification only"));
            }
            if !(s > 0.0 && s < 1.0) {
                return Err(Error::config(format!("positive_share {s} outside (0, 1)")));
            }
        }
        if let Some(u) = &frame.undercoverage {
            if u.feature >= dim || !(0.0..=1.0).contains(&u.rate) {
                return Err(Error::config("undercoverage needs a valid feature and a rate in [0, 1]"));
            }
        }
        if !(frame.overcoverage >= 0.0 && frame.overcoverage.is_finite()) {
            return Err(Error::config("overcoverage share must be >= 0"));
        }
        if t.frame_coverage && frame.undercoverage.is_none() && frame.overcoverage == 0.0 {
            return Err(Error::config("frame_coverage toggle needs undercoverage or overcoverage"));
        }

        let noise = &config.noise;
        let sd = if noise.feature_sd.is_empty() {
            vec![0.0; dim]
        } else {
            noise.feature_sd.clone()
        };
        if sd.len() != dim {
            return Err(Error::config(format!(
                "feature_sd has {} entries for {dim} features",
                sd.len()
            )));
        }
        if t.feature_noise && sd.iter().all(|s| *s == 0.0) {
            return Err(Error::config("feature_noise toggle needs a nonzero feature_sd"));
        }
        let mut omitted = vec![false; dim];
        for &j in &noise.omit {
            if j >= dim {
                return Err(Error::config(format!("omitted feature {j} out of range")));
            }
            omitted[j] = true;
        }
        if omitted.iter().all(|o| *o) {
            return Err(Error::config("cannot omit every feature"));
        }
        if t.model_assumption && noise.omit.is_empty() {
            return Err(Error::config("model_assumption toggle needs omitted features"));
        }
        let feature_noise = FeatureNoiseModel::new(sd, vec![false; dim])?;
        let matrix = match (&noise.matrix, classification) {
            (Some(_), false) => return Err(Error::config("a transformation matrix needs classification")),
            (Some(rows), true) => {
                let m = TransformationMatrix::from_rows(rows)?;
                if m.classes() != 2 {
                    return Err(Error::config("transformation matrix must be 2x2"));
                }
                Some(m)
            }
            (None, _) => None,
        };
        if !(noise.label_sd >= 0.0 && noise.label_sd.is_finite()) {
            return Err(Error::config("label_sd must be >= 0"));
        }
        if t.label_misclassification {
            let ok = if classification {
                matrix.is_some()
            } else {
                noise.label_sd > 0.0
            };
            if !ok {
                return Err(Error::config(
                    "label_misclassification toggle needs a matrix (classification) or label_sd (regression)",
                ));
            }
        }
        if let Some(nr) = &config.nonresponse {
            if !(nr.floor > 0.0 && nr.floor <= 1.0) {
                return Err(Error::config("nonresponse floor must lie in (0, 1]"));
            }
        } else if t.nonresponse {
            return Err(Error::config("nonresponse toggle needs a [nonresponse] section"));
        }

        let fit = FitConfig {
            max_depth: config.fit.max_depth,
            min_leaf: config.fit.min_leaf,
            min_split_improvement: config.fit.min_split_improvement,
        };
        fit.validate()?;

        let calibration = match &config.calibration {
            None => None,
            Some(_) if !classification => {
                return Err(Error::config("calibration applies to classification only"));
            }
            Some(c) => {
                if !(0.0..=1.0).contains(&c.threshold) {
                    return Err(Error::config("calibration threshold outside [0, 1]"));
                }
                if c.ensemble == 0 {
                    return Err(Error::config("ensemble needs at least one member"));
                }
                let p_target = c.p_target.or(pc.prevalence).unwrap_or(0.5);
                let p_train = frame.positive_share.or(pc.prevalence).unwrap_or(0.5);
                Some(CalibrationParams::new(p_train, p_target)?)
            }
        };
        if config.enrichment.is_some() && !classification {
            return Err(Error::config("enrichment applies to classification only"));
        }
        let retained = omitted.iter().filter(|o| !**o).count();
        if let Some(r) = &config.representativity {
            if let Some(j) = r.features.iter().find(|j| **j >= retained) {
                return Err(Error::config(format!("representativity feature {j} out of range")));
            }
        }

        Ok(Self {
            training_design: design_of(&config.training.design),
            target_design: design_of(&config.target.design),
            enabled: t.enabled(),
            config,
            spec,
            drifted,
            feature_noise,
            omitted,
            matrix,
            fit,
            calibration,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::new(ScenarioConfig::load(path)?)
    }

    pub fn is_classification(&self) -> bool {
        matches!(self.spec.task(), Task::Classification { .. })
    }

    pub fn target_spec(&self, active: ActiveSources) -> &SuperPopulationSpec {
        match &self.drifted {
            Some(d) if active.contains(ErrorSource::Drift) => d,
            _ => &self.spec,
        }
    }

    /// Noise and omission in force under `active`.
    pub fn noise_model(&self, active: ActiveSources) -> FeatureNoiseModel {
        let dim = self.spec.dim();
        let sd = if active.contains(ErrorSource::FeatureNoise) {
            self.feature_noise.sd.clone()
        } else {
            vec![0.0; dim]
        };
        let omit = if active.contains(ErrorSource::ModelAssumption) {
            self.omitted.clone()
        } else {
            vec![false; dim]
        };
        FeatureNoiseModel { sd, omit }
    }
}
