//! Python bindings: `import tmle`.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tmle_core::calibration::{self, CalibrationParams, CountMode};
use tmle_core::cart::{self, FitConfig, Predict, TreeTask};
use tmle_core::harness::{self, ScenarioConfig};
use tmle_core::measurement::{self, ObservedDataset, Provenance, Row};
use tmle_core::{representativity, Error};

fn to_py(e: Error) -> PyErr {
    if e.is_config() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

/// Two-sample Kolmogorov-Smirnov distance.
#[pyfunction]
fn ks_distance(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    representativity::ks_distance(&a, &b).map_err(to_py)
}

/// Moves a score from the training prevalence to the target prevalence.
#[pyfunction]
fn calibrate_score(s: f64, p_train: f64, p_target: f64) -> PyResult<f64> {
    let params = CalibrationParams::new(p_train, p_target).map_err(to_py)?;
    calibration::calibrate_score(s, &params).map_err(to_py)
}

#[pyfunction]
fn bias_metric(est_pos: f64, true_pos: u64, n_total: u64) -> PyResult<f64> {
    if n_total == 0 {
        return Err(PyValueError::new_err("n_total must be positive"));
    }
    Ok(calibration::bias_metric(est_pos, true_pos, n_total))
}

/// `mode` is `"probability_sum"` or `"threshold"`.
#[pyfunction]
#[pyo3(signature = (scores, mode = "probability_sum", threshold = 0.5))]
fn estimate_positive_total(scores: Vec<f64>, mode: &str, threshold: f64) -> PyResult<f64> {
    let mode = match mode {
        "probability_sum" => CountMode::ProbabilitySum,
        "threshold" => CountMode::Threshold(threshold),
        other => return Err(PyValueError::new_err(format!("unknown mode '{other}'"))),
    };
    calibration::estimate_positive_total(&scores, mode).map_err(to_py)
}

#[pyfunction]
fn one_hot(label: usize, classes: usize) -> PyResult<Vec<f64>> {
    measurement::one_hot(label, classes).map_err(to_py)
}

/// Column-stochastic misclassification matrix, `rows[i][j] = P(observed i | true j)`.
#[pyclass(name = "TransformationMatrix", frozen)]
struct PyTransformationMatrix(measurement::TransformationMatrix);

#[pymethods]
impl PyTransformationMatrix {
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        measurement::TransformationMatrix::from_rows(&rows).map(Self).map_err(to_py)
    }

    #[getter]
    fn classes(&self) -> usize {
        self.0.classes()
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.0.rows()
    }

    fn apply(&self, v: Vec<f64>) -> PyResult<Vec<f64>> {
        if v.len() != self.0.classes() {
            return Err(PyValueError::new_err("vector length must equal the class count"));
        }
        Ok(self.0.apply(&v))
    }

    /// Observed labels for `labels`, drawn from one seeded stream.
    fn misclassify(&self, labels: Vec<usize>, seed: u64) -> PyResult<Vec<usize>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        labels
            .into_iter()
            .map(|y| measurement::misclassify(y, &self.0, &mut rng))
            .collect::<Result<_, _>>()
            .map_err(to_py)
    }

    #[staticmethod]
    fn empirical(truth: Vec<usize>, observed: Vec<usize>, classes: usize) -> PyResult<Self> {
        measurement::empirical_confusion(&truth, &observed, classes)
            .map(Self)
            .map_err(to_py)
    }
}

/// A fitted CART tree.
#[pyclass(name = "Tree", frozen)]
struct PyTree(cart::TreeModel);

#[pymethods]
impl PyTree {
    /// `task` is `"regression"` or `"classification"` (labels 0/1).
    #[staticmethod]
    #[pyo3(signature = (x, y, task = "regression", max_depth = 6, min_leaf = 20, min_split_improvement = 0.0))]
    fn fit(
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
        task: &str,
        max_depth: usize,
        min_leaf: usize,
        min_split_improvement: f64,
    ) -> PyResult<Self> {
        if x.len() != y.len() {
            return Err(PyValueError::new_err("x and y differ in length"));
        }
        let task = match task {
            "regression" => TreeTask::Regression,
            "classification" => TreeTask::Classification,
            other => return Err(PyValueError::new_err(format!("unknown task '{other}'"))),
        };
        let rows = x
            .into_iter()
            .zip(y)
            .enumerate()
            .map(|(i, (x, y))| Row { id: i as u64 + 1, x, y })
            .collect();
        let data = ObservedDataset::new(rows, Provenance::default()).map_err(to_py)?;
        let config = FitConfig {
            max_depth,
            min_leaf,
            min_split_improvement,
        };
        cart::fit(&data, &config, task).map(Self).map_err(to_py)
    }

    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        x.iter().map(|row| self.0.predict(row)).collect::<Result<_, _>>().map_err(to_py)
    }

    #[getter]
    fn leaf_count(&self) -> usize {
        self.0.leaf_count()
    }

    fn to_text(&self) -> String {
        self.0.to_text()
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        cart::TreeModel::from_text(text).map(Self).map_err(to_py)
    }
}

/// A validated scenario.
#[pyclass(name = "Scenario", frozen)]
struct PyScenario(harness::Scenario);

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        harness::Scenario::load(&path).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let config = ScenarioConfig::from_toml_str(text).map_err(to_py)?;
        harness::Scenario::new(config).map(Self).map_err(to_py)
    }

    #[getter]
    fn name(&self) -> String {
        self.0.config.name.clone()
    }

    #[getter]
    fn config_hash(&self) -> String {
        self.0.config.hash()
    }

    fn to_toml(&self) -> String {
        self.0.config.to_toml_string()
    }

    /// Runs every replicate; `seed` and `replicates` override the file.
    #[pyo3(signature = (seed = None, replicates = None, threads = None))]
    fn run(
        &self,
        py: Python<'_>,
        seed: Option<u64>,
        replicates: Option<usize>,
        threads: Option<usize>,
    ) -> PyResult<PyRunReport> {
        let mut config = self.0.config.clone();
        if let Some(s) = seed {
            config.seed = s;
        }
        if let Some(r) = replicates {
            config.replicates = r;
        }
        let scenario = harness::Scenario::new(config).map_err(to_py)?;
        py.detach(|| harness::run_scenario(&scenario, threads))
            .map(PyRunReport)
            .map_err(to_py)
    }
}

#[pyclass(name = "RunReport", frozen)]
struct PyRunReport(harness::RunReport);

#[pymethods]
impl PyRunReport {
    #[getter]
    fn failures(&self) -> Vec<String> {
        self.0.failures.clone()
    }

    #[getter]
    fn configurations(&self) -> Vec<String> {
        self.0.configurations.clone()
    }

    fn decomposition<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.0
            .decomposition
            .rows
            .iter()
            .map(|r| {
                let d = PyDict::new(py);
                d.set_item("kind", &r.kind)?;
                d.set_item("estimator", &r.estimator)?;
                d.set_item("configuration", &r.configuration)?;
                d.set_item("active_sources", &r.active_sources)?;
                d.set_item("bias", r.bias)?;
                d.set_item("variance", r.variance)?;
                d.set_item("mse", r.mse)?;
                d.set_item("relative_bias", r.relative_bias)?;
                Ok(d)
            })
            .collect()
    }

    fn validity<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.0
            .validity
            .rows
            .iter()
            .map(|r| {
                let d = PyDict::new(py);
                d.set_item("configuration", &r.configuration)?;
                d.set_item("metric", &r.metric)?;
                d.set_item("internal", r.internal)?;
                d.set_item("external", r.external)?;
                d.set_item("gap", r.gap)?;
                Ok(d)
            })
            .collect()
    }

    fn table1<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.0
            .table1
            .iter()
            .map(|r| {
                let d = PyDict::new(py);
                d.set_item("method", &r.method)?;
                d.set_item("true_pos", r.true_pos)?;
                d.set_item("est_pos", r.est_pos)?;
                d.set_item("bias", r.bias)?;
                d.set_item("accuracy", r.accuracy)?;
                Ok(d)
            })
            .collect()
    }

    /// Writes the CSV reports and manifest; returns the paths.
    fn emit(&self, out_dir: PathBuf) -> PyResult<Vec<PathBuf>> {
        harness::emit_reports(&self.0, &out_dir).map_err(to_py)
    }
}

#[pymodule]
fn tmle(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(ks_distance, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_score, m)?)?;
    m.add_function(wrap_pyfunction!(bias_metric, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_positive_total, m)?)?;
    m.add_function(wrap_pyfunction!(one_hot, m)?)?;
    m.add_class::<PyTransformationMatrix>()?;
    m.add_class::<PyTree>()?;
    m.add_class::<PyScenario>()?;
    m.add_class::<PyRunReport>()?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
