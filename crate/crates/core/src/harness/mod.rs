//! Scenario-driven simulation: the training, testing and application phases
//! per replicate, the toggle-factorial over error sources, and CSV output.

mod config;
mod pipeline;
mod report;

use std::fmt;

use rayon::prelude::*;

pub use config::{
    CalibrationConfig, DependenceConfig, DesignConfig, DriftConfig, EnrichmentConfig,
    EstimatorConfig, EstimatorMode, FeatureConfig, FitSection, FrameConfig, NoiseConfig,
    NonresponseConfig, PopulationConfig, RepresentativityConfig, Scenario, ScenarioConfig,
    SplitRule, TargetConfig, TaskKind, Toggles, TrainingConfig, UndercoverageConfig,
    SCHEMA_VERSION,
};
pub use pipeline::{
    enrich_training_frame, evaluate_metrics, replicate_once, split_train_test, ConfigurationOutcome,
    LabeledFrame, Metrics, ReplicateOutcome, Split,
};
pub use report::{
    emit_reports, DecompositionReport, DecompositionRow, EnrichmentRow,
    RepresentativityRow, RunReport, ValidityReport, ValidityRow, VERSION,
};

use crate::{Error, Result};

/// Share of failed replicates above which a run aborts.
pub const MAX_FAILURE_RATE: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ErrorSource {
    FeatureNoise,
    LabelMisclassification,
    FrameCoverage,
    Sampling,
    ModelAssumption,
    Drift,
    Nonresponse,
}

impl ErrorSource {
    pub const ALL: [ErrorSource; 7] = [
        ErrorSource::FeatureNoise,
        ErrorSource::LabelMisclassification,
        ErrorSource::FrameCoverage,
        ErrorSource::Sampling,
        ErrorSource::ModelAssumption,
        ErrorSource::Drift,
        ErrorSource::Nonresponse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ErrorSource::FeatureNoise => "feature_noise",
            ErrorSource::LabelMisclassification => "label_misclassification",
            ErrorSource::FrameCoverage => "frame_coverage",
            ErrorSource::Sampling => "sampling",
            ErrorSource::ModelAssumption => "model_assumption",
            ErrorSource::Drift => "drift",
            ErrorSource::Nonresponse => "nonresponse",
        }
    }

    fn bit(self) -> u8 {
        1 << self as u8
    }
}

/// A set of error sources.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActiveSources(u8);

impl ActiveSources {
    pub const NONE: ActiveSources = ActiveSources(0);

    pub fn with(self, s: ErrorSource) -> Self {
        Self(self.0 | s.bit())
    }

    pub fn contains(self, s: ErrorSource) -> bool {
        self.0 & s.bit() != 0
    }

    pub fn iter(self) -> impl Iterator<Item = ErrorSource> {
        ErrorSource::ALL.into_iter().filter(move |s| self.contains(*s))
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for ActiveSources {
    /// Source names joined by `+`, or `none`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("none");
        }
        let names: Vec<&str> = self.iter().map(ErrorSource::name).collect();
        f.write_str(&names.join("+"))
    }
}

/// One cell of the toggle-factorial.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Configuration {
    pub key: String,
    pub active: ActiveSources,
}

/// The all-off baseline, one configuration per enabled source, and all-on.
pub fn configurations(enabled: ActiveSources) -> Vec<Configuration> {
    let mut out = vec![Configuration {
        key: "baseline".into(),
        active: ActiveSources::NONE,
    }];
    out.extend(enabled.iter().map(|s| Configuration {
        key: s.name().into(),
        active: ActiveSources::NONE.with(s),
    }));
    out.push(Configuration {
        key: "all_on".into(),
        active: enabled,
    });
    out
}

/// Runs every replicate of every configuration and aggregates the results.
///
/// Replicates run on a pool of `threads` workers (all cores when `None`).
/// A replicate that fails in any configuration is dropped from all of them;
/// more than [`MAX_FAILURE_RATE`] failed replicates abort the run.
pub fn run_scenario(scenario: &Scenario, threads: Option<usize>) -> Result<RunReport> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::config("thread count must be >= 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Estimation(format!("cannot start worker pool: {e}")))?;
    let configs = configurations(scenario.enabled);
    let r = scenario.config.replicates;
    let results: Vec<Result<ReplicateOutcome>> = pool.install(|| {
        (0..r)
            .into_par_iter()
            .map(|i| {
                replicate_once(scenario, &configs, i).map_err(|e| Error::Replicate {
                    index: i,
                    source: Box::new(e),
                })
            })
            .collect()
    });
    let mut outcomes = Vec::with_capacity(r);
    let mut failures = Vec::new();
    for res in results {
        match res {
            Ok(o) => outcomes.push(o),
            Err(e) => {
                eprintln!("{e}");
                failures.push(e);
            }
        }
    }
    if failures.len() as f64 > MAX_FAILURE_RATE * r as f64 {
        if failures.iter().all(Error::is_config) {
            return Err(failures.swap_remove(0));
        }
        return Err(Error::ExcessFailures {
            failed: failures.len(),
            total: r,
        });
    }
    let extras = pool.install(|| pipeline::single_run_experiments(scenario, &configs))?;
    report::aggregate(scenario, &configs, outcomes, failures, extras)
}
