//! Measurement-line errors: additive feature distortion, feature omission,
//! label misclassification through a column-stochastic transformation matrix,
//! and additive target noise for regression.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result, UnitId};

const COLUMN_TOL: f64 = 1e-12;

/// `C x C` misclassification matrix. Entry `(i, j)` is the probability of
/// observing class `i` when the true class is `j`, so every column sums to 1
/// and `E[one_hot(y)] = T one_hot(y0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformationMatrix {
    classes: usize,
    // column-major: entries[j * classes + i] = T(i, j)
    entries: Vec<f64>,
}

impl TransformationMatrix {
    /// Builds a matrix from a row-major literal (`rows[i][j] = T(i, j)`).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let c = rows.len();
        if c == 0 || rows.iter().any(|r| r.len() != c) {
            return Err(Error::Matrix("transformation matrix must be square and non-empty".into()));
        }
        let mut entries = vec![0.0; c * c];
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                entries[j * c + i] = v;
            }
        }
        let m = Self { classes: c, entries };
        m.validate()?;
        Ok(m)
    }

    pub fn identity(classes: usize) -> Self {
        let mut entries = vec![0.0; classes * classes];
        for j in 0..classes {
            entries[j * classes + j] = 1.0;
        }
        Self { classes, entries }
    }

    fn validate(&self) -> Result<()> {
        if self.entries.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Matrix("entries must lie in [0, 1]".into()));
        }
        for j in 0..self.classes {
            let s: f64 = self.column(j).iter().sum();
            if (s - 1.0).abs() > COLUMN_TOL {
                return Err(Error::Matrix(format!("column {j} sums to {s}, not 1")));
            }
        }
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, observed: usize, truth: usize) -> f64 {
        self.entries[truth * self.classes + observed]
    }

    /// Distribution of the observed class given true class `truth`.
    pub fn column(&self, truth: usize) -> &[f64] {
        &self.entries[truth * self.classes..(truth + 1) * self.classes]
    }

    /// `T v` for a class-indexed column vector `v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.classes)
            .map(|i| (0..self.classes).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.classes)
            .map(|i| (0..self.classes).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Additive normal noise per feature plus an optional omission flag.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureNoiseModel {
    pub sd: Vec<f64>,
    pub omit: Vec<bool>,
}

impl FeatureNoiseModel {
    pub fn new(sd: Vec<f64>, omit: Vec<bool>) -> Result<Self> {
        if sd.len() != omit.len() {
            return Err(Error::config("noise sd and omission flags differ in length"));
        }
        if sd.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::config("feature noise sd must be >= 0"));
        }
        Ok(Self { sd, omit })
    }

    /// No noise, nothing omitted.
    pub fn exact(dim: usize) -> Self {
        Self {
            sd: vec![0.0; dim],
            omit: vec![false; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.sd.len()
    }

    pub fn retained_dim(&self) -> usize {
        self.omit.iter().filter(|o| !**o).count()
    }

    /// Indices of the features that survive omission.
    pub fn retained(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&j| !self.omit[j]).collect()
    }
}

/// `x = x0 + eps` on retained features; omitted features are dropped.
pub fn distort_features<R: Rng + ?Sized>(
    x0: &[f64],
    model: &FeatureNoiseModel,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if x0.len() != model.dim() {
        return Err(Error::data(format!(
            "feature vector of length {} for a noise model of dimension {}",
            x0.len(),
            model.dim()
        )));
    }
    let mut out = Vec::with_capacity(model.retained_dim());
    for ((&v, &sd), &omit) in x0.iter().zip(&model.sd).zip(&model.omit) {
        if omit {
            continue;
        }
        if sd > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            out.push(v + sd * z);
        } else {
            out.push(v);
        }
    }
    Ok(out)
}

/// Additive homoskedastic target error `y = y0 + eps_y`.
pub fn distort_target<R: Rng + ?Sized>(y0: f64, sd: f64, rng: &mut R) -> f64 {
    if sd > 0.0 {
        let z: f64 = StandardNormal.sample(rng);
        y0 + sd * z
    } else {
        y0
    }
}

pub fn one_hot(label: usize, classes: usize) -> Result<Vec<f64>> {
    if label >= classes {
        return Err(Error::data(format!("label {label} outside 0..{classes}")));
    }
    let mut v = vec![0.0; classes];
    v[label] = 1.0;
    Ok(v)
}

/// Draws the observed class from column `y0` of `t`.
pub fn misclassify<R: Rng + ?Sized>(y0: usize, t: &TransformationMatrix, rng: &mut R) -> Result<usize> {
    if y0 >= t.classes {
        return Err(Error::data(format!("true class {y0} outside 0..{}", t.classes)));
    }
    let column = t.column(y0);
    let s: f64 = column.iter().sum();
    if (s - 1.0).abs() > COLUMN_TOL {
        return Err(Error::Matrix(format!("column {y0} sums to {s}, not 1")));
    }
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in column.iter().enumerate() {
        acc += p;
        if u < acc {
            return Ok(i);
        }
    }
    // u fell in the rounding gap above the last positive entry
    Ok(column.iter().rposition(|p| *p > 0.0).unwrap_or(y0))
}

/// Column-normalized confusion matrix of observed against true labels.
pub fn empirical_confusion(
    true_labels: &[usize],
    observed_labels: &[usize],
    classes: usize,
) -> Result<TransformationMatrix> {
    if true_labels.len() != observed_labels.len() {
        return Err(Error::data("label vectors differ in length"));
    }
    let mut counts = vec![0u64; classes * classes];
    let mut col_totals = vec![0u64; classes];
    for (&t, &o) in true_labels.iter().zip(observed_labels) {
        if t >= classes || o >= classes {
            return Err(Error::data(format!("label outside 0..{classes}")));
        }
        counts[t * classes + o] += 1;
        col_totals[t] += 1;
    }
    if let Some(j) = col_totals.iter().position(|&n| n == 0) {
        return Err(Error::Estimation(format!("true class {j} absent; column undefined")));
    }
    let entries = counts
        .iter()
        .enumerate()
        .map(|(idx, &c)| c as f64 / col_totals[idx / classes] as f64)
        .collect();
    let m = TransformationMatrix { classes, entries };
    m.validate()?;
    Ok(m)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub id: UnitId,
    pub x: Vec<f64>,
    pub y: f64,
}

/// Where an observed dataset came from.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Provenance {
    pub population: String,
    pub sample: String,
    pub noise_model: String,
    pub matrix: String,
}

/// Distorted `(x, y)` rows for a set of units.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservedDataset {
    rows: Vec<Row>,
    dim: usize,
    pub provenance: Provenance,
}

impl ObservedDataset {
    pub fn new(rows: Vec<Row>, provenance: Provenance) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.x.len());
        if rows.iter().any(|r| r.x.len() != dim) {
            return Err(Error::data("rows have inconsistent feature dimensions"));
        }
        Ok(Self {
            rows,
            dim,
            provenance,
        })
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.y).collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.x[j]).collect()
    }

    /// Rows whose ids are accepted by `keep`, in the original order.
    pub fn filter(&self, mut keep: impl FnMut(&Row) -> bool) -> Self {
        Self {
            rows: self.rows.iter().filter(|r| keep(r)).cloned().collect(),
            dim: self.dim,
            provenance: self.provenance.clone(),
        }
    }
}
