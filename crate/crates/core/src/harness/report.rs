use std::path::{Path, PathBuf};

use crate::calibration::Table1Row;
use crate::numeric::pairwise_sum;
use crate::{Error, Result};

use super::config::Scenario;
use super::pipeline::{Extras, ReplicateOutcome};
use super::{Configuration, ErrorSource};

pub const VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

const ESTIMATORS: [&str; 2] = ["cart_assisted", "synthetic"];

#[derive(Clone, Debug, PartialEq)]
pub struct DecompositionRow {
    /// `configuration` or `attribution`.
    pub kind: String,
    pub estimator: String,
    pub configuration: String,
    pub active_sources: String,
    pub bias: f64,
    pub variance: Option<f64>,
    pub mse: Option<f64>,
    pub relative_bias: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DecompositionReport {
    pub rows: Vec<DecompositionRow>,
}

impl DecompositionReport {
    pub fn row(&self, kind: &str, estimator: &str, configuration: &str) -> Option<&DecompositionRow> {
        self.rows
            .iter()
            .find(|r| r.kind == kind && r.estimator == estimator && r.configuration == configuration)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidityRow {
    pub configuration: String,
    pub metric: String,
    pub internal: f64,
    pub external: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidityReport {
    pub rows: Vec<ValidityRow>,
}

impl ValidityReport {
    pub fn row(&self, configuration: &str, metric: &str) -> Option<&ValidityRow> {
        self.rows
            .iter()
            .find(|r| r.configuration == configuration && r.metric == metric)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RepresentativityRow {
    pub configuration: String,
    pub item: String,
    pub distance: Option<f64>,
    pub covered: Option<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnrichmentRow {
    pub iteration: usize,
    pub labeled: usize,
    pub positives: usize,
    pub external_accuracy: f64,
}

#[derive(Clone, Debug, Default)]
pub struct RunReport {
    pub name: String,
    pub config_hash: String,
    pub seed: u64,
    pub replicates: usize,
    /// Configuration keys in emission order.
    pub configurations: Vec<String>,
    pub outcomes: Vec<ReplicateOutcome>,
    pub failures: Vec<String>,
    pub decomposition: DecompositionReport,
    pub validity: ValidityReport,
    pub table1: Vec<Table1Row>,
    pub representativity: Vec<RepresentativityRow>,
    pub enrichment: Vec<EnrichmentRow>,
}

fn mean(v: &[f64]) -> f64 {
    pairwise_sum(v) / v.len() as f64
}

fn configuration_rows(
    estimator: &str,
    config: &Configuration,
    errors: &[f64],
    truths: &[f64],
) -> DecompositionRow {
    let bias = mean(errors);
    let centred: Vec<f64> = errors.iter().map(|e| (e - bias) * (e - bias)).collect();
    let squares: Vec<f64> = errors.iter().map(|e| e * e).collect();
    let truth = mean(truths);
    DecompositionRow {
        kind: "configuration".into(),
        estimator: estimator.into(),
        configuration: config.key.clone(),
        active_sources: config.active.to_string(),
        bias,
        variance: Some(mean(&centred)),
        mse: Some(mean(&squares)),
        relative_bias: (truth != 0.0).then(|| bias / truth),
    }
}

fn attribution_rows(estimator: &str, configs: &[Configuration], rows: &[DecompositionRow]) -> Vec<DecompositionRow> {
    let bias_of = |key: &str| {
        rows.iter()
            .find(|r| r.estimator == estimator && r.configuration == key)
            .map(|r| r.bias)
            .expect("configuration row")
    };
    let baseline = bias_of("baseline");
    let mut out = Vec::new();
    let mut deltas = Vec::new();
    for c in &configs[1..configs.len() - 1] {
        let delta = bias_of(&c.key) - baseline;
        deltas.push(delta);
        out.push(DecompositionRow {
            kind: "attribution".into(),
            estimator: estimator.into(),
            configuration: c.key.clone(),
            active_sources: c.active.to_string(),
            bias: delta,
            variance: None,
            mse: None,
            relative_bias: None,
        });
    }
    let all_on = configs.last().expect("all_on");
    out.push(DecompositionRow {
        kind: "attribution".into(),
        estimator: estimator.into(),
        configuration: "interaction".into(),
        active_sources: all_on.active.to_string(),
        bias: bias_of("all_on") - baseline - deltas.iter().sum::<f64>(),
        variance: None,
        mse: None,
        relative_bias: None,
    });
    out
}

/// Monte Carlo summaries over the successful replicates.
pub(crate) fn aggregate(
    scenario: &Scenario,
    configs: &[Configuration],
    outcomes: Vec<ReplicateOutcome>,
    failures: Vec<Error>,
    extras: Extras,
) -> Result<RunReport> {
    let mut report = RunReport {
        name: scenario.config.name.clone(),
        config_hash: scenario.config.hash(),
        seed: scenario.config.seed,
        replicates: scenario.config.replicates,
        configurations: configs.iter().map(|c| c.key.clone()).collect(),
        failures: failures.iter().map(ToString::to_string).collect(),
        table1: extras.table1,
        enrichment: extras.enrichment,
        ..RunReport::default()
    };
    if !outcomes.is_empty() {
        for estimator in ESTIMATORS {
            let mut rows = Vec::new();
            for (j, c) in configs.iter().enumerate() {
                let (errors, truths): (Vec<f64>, Vec<f64>) = outcomes
                    .iter()
                    .map(|o| {
                        let co = &o.configurations[j];
                        let est = match estimator {
                            "cart_assisted" => co.estimate.point_estimate,
                            _ => co.estimate.synthetic_term,
                        };
                        (est - co.true_total, co.true_total)
                    })
                    .unzip();
                rows.push(configuration_rows(estimator, c, &errors, &truths));
            }
            let attribution = attribution_rows(estimator, configs, &rows);
            report.decomposition.rows.extend(rows);
            report.decomposition.rows.extend(attribution);
        }
        for (j, c) in configs.iter().enumerate() {
            let first = &outcomes[0].configurations[j];
            for (m, (name, _)) in first.internal.iter().enumerate() {
                let internal: Vec<f64> = outcomes.iter().map(|o| o.configurations[j].internal[m].1).collect();
                let external: Vec<f64> = outcomes.iter().map(|o| o.configurations[j].external[m].1).collect();
                let (i, e) = (mean(&internal), mean(&external));
                report.validity.rows.push(ValidityRow {
                    configuration: c.key.clone(),
                    metric: (*name).into(),
                    internal: i,
                    external: e,
                    gap: i - e,
                });
            }
        }
    }
    if let Some(first) = outcomes.first().filter(|o| o.replicate == 0) {
        for co in &first.configurations {
            let Some((rep, (frame_under, frame_over))) = &co.representativity else {
                continue;
            };
            let row = |item: String, distance: Option<f64>, covered: Option<bool>| RepresentativityRow {
                configuration: co.key.clone(),
                item,
                distance,
                covered,
            };
            let rows = &mut report.representativity;
            for m in &rep.marginals {
                rows.push(row(format!("marginal:{}", m.variable), Some(m.distance), None));
            }
            for c in &rep.cells {
                rows.push(row(format!("cell:{}", c.cell), c.distance, Some(c.covered())));
            }
            rows.push(row("undercoverage".into(), Some(rep.undercoverage), None));
            rows.push(row("overcoverage".into(), Some(rep.overcoverage), None));
            rows.push(row("frame_undercoverage".into(), Some(*frame_under), None));
            rows.push(row("frame_overcoverage".into(), Some(*frame_over), None));
            rows.push(row("mean_distance".into(), Some(rep.mean_distance), None));
            rows.push(row("max_distance".into(), Some(rep.max_distance), None));
        }
    }
    report.outcomes = outcomes;
    Ok(report)
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn write_csv(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    w.write_record(header).map_err(to_err)?;
    for r in rows {
        w.write_record(&r).map_err(to_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn manifest(report: &RunReport) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: &str| s.push_str(&format!("{k} = {v}\n"));
    kv("name", &report.name);
    kv("config_hash", &report.config_hash);
    kv("seed", &report.seed.to_string());
    kv("replicates", &report.replicates.to_string());
    kv("failed_replicates", &report.failures.len().to_string());
    kv("version", VERSION);
    kv("configurations", &report.configurations.join(","));
    kv("excluded_errors", "processing errors, construct-validity errors");
    kv(
        "assumed_families",
        "features uniform/normal/categorical; regression noise normal; classification latent logistic",
    );
    kv(
        "representativity",
        "cell-wise KS distances of the target stand in for distances between conditional laws",
    );
    kv(
        "error_sources",
        &ErrorSource::ALL.map(ErrorSource::name).join(","),
    );
    for f in &report.failures {
        kv("failure", f);
    }
    s
}

/// Writes the CSV files and the run manifest into `out_dir`. Returns the
/// paths written.
pub fn emit_reports(report: &RunReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    let mut emit = |name: &str, header: &[&str], rows: Vec<Vec<String>>| -> Result<()> {
        let path = out_dir.join(name);
        write_csv(&path, header, rows)?;
        written.push(path);
        Ok(())
    };

    let mut replicate_rows = Vec::new();
    for o in &report.outcomes {
        for c in &o.configurations {
            replicate_rows.push(vec![
                o.replicate.to_string(),
                c.key.clone(),
                num(c.true_total),
                num(c.estimate.point_estimate),
                num(c.estimate.synthetic_term),
                num(c.estimate.correction_term),
                c.estimate.fallback_count.to_string(),
                c.leaf_count.to_string(),
                c.sample_size.to_string(),
            ]);
        }
    }
    emit(
        "replicates.csv",
        &[
            "replicate",
            "configuration",
            "true_total",
            "point_estimate",
            "synthetic_term",
            "correction_term",
            "fallback_count",
            "leaf_count",
            "sample_size",
        ],
        replicate_rows,
    )?;

    emit(
        "decomposition.csv",
        &[
            "kind",
            "estimator",
            "configuration",
            "active_sources",
            "bias",
            "variance",
            "mse",
            "relative_bias",
        ],
        report
            .decomposition
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.kind.clone(),
                    r.estimator.clone(),
                    r.configuration.clone(),
                    r.active_sources.clone(),
                    num(r.bias),
                    opt(r.variance),
                    opt(r.mse),
                    opt(r.relative_bias),
                ]
            })
            .collect(),
    )?;

    emit(
        "validity.csv",
        &["configuration", "metric", "internal", "external", "gap"],
        report
            .validity
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.configuration.clone(),
                    r.metric.clone(),
                    num(r.internal),
                    num(r.external),
                    num(r.gap),
                ]
            })
            .collect(),
    )?;

    emit(
        "table1.csv",
        &["method", "true_pos", "est_pos", "bias", "accuracy"],
        report
            .table1
            .iter()
            .map(|r| {
                vec![
                    r.method.clone(),
                    r.true_pos.to_string(),
                    num(r.est_pos),
                    num(r.bias),
                    num(r.accuracy),
                ]
            })
            .collect(),
    )?;

    emit(
        "representativity.csv",
        &["configuration", "item", "distance", "covered"],
        report
            .representativity
            .iter()
            .map(|r| {
                vec![
                    r.configuration.clone(),
                    r.item.clone(),
                    opt(r.distance),
                    r.covered.map(|c| (c as u8).to_string()).unwrap_or_default(),
                ]
            })
            .collect(),
    )?;

    emit(
        "enrichment.csv",
        &["iteration", "labeled", "positives", "external_accuracy"],
        report
            .enrichment
            .iter()
            .map(|r| {
                vec![
                    r.iteration.to_string(),
                    r.labeled.to_string(),
                    r.positives.to_string(),
                    num(r.external_accuracy),
                ]
            })
            .collect(),
    )?;

    let path = out_dir.join("run_manifest.txt");
    std::fs::write(&path, manifest(report)).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}
