//! Prior-shift correction of classifier scores and positive-count estimates
//! for rare events.

use crate::cart::Predict;
use crate::numeric::pairwise_sum;
use crate::{Error, Result};

/// Positive share of the training data and the assumed population prevalence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalibrationParams {
    p_train: f64,
    p_target: f64,
}

impl CalibrationParams {
    pub fn new(p_train: f64, p_target: f64) -> Result<Self> {
        for (name, p) in [("p_train", p_train), ("p_target", p_target)] {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::config(format!("{name}={p} must lie strictly in (0, 1)")));
            }
        }
        Ok(Self { p_train, p_target })
    }

    pub fn p_train(&self) -> f64 {
        self.p_train
    }

    pub fn p_target(&self) -> f64 {
        self.p_target
    }

    /// Target odds over training odds.
    pub fn odds_ratio(&self) -> f64 {
        (self.p_target / (1.0 - self.p_target)) / (self.p_train / (1.0 - self.p_train))
    }

    pub fn inverse(&self) -> Self {
        Self {
            p_train: self.p_target,
            p_target: self.p_train,
        }
    }
}

/// `s r / (s r + 1 - s)` with `r` the odds ratio.
pub fn calibrate_score(s: f64, params: &CalibrationParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::data(format!("score {s} outside [0, 1]")));
    }
    let r = params.odds_ratio();
    if r == 1.0 {
        return Ok(s);
    }
    let num = s * r;
    Ok(num / (num + (1.0 - s)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CountMode {
    /// Number of scores `>= tau`.
    Threshold(f64),
    /// Sum of scores.
    ProbabilitySum,
}

pub fn estimate_positive_total(scores: &[f64], mode: CountMode) -> Result<f64> {
    if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::data(format!("score {s} outside [0, 1]")));
    }
    match mode {
        CountMode::Threshold(tau) => {
            if !(0.0..=1.0).contains(&tau) {
                return Err(Error::config(format!("threshold {tau} outside [0, 1]")));
            }
            Ok(scores.iter().filter(|s| **s >= tau).count() as f64)
        }
        CountMode::ProbabilitySum => Ok(pairwise_sum(scores)),
    }
}

/// Per-unit mean of the members' calibrated scores.
pub fn ensemble_calibrated(member_scores: &[Vec<f64>], params: &[CalibrationParams]) -> Result<Vec<f64>> {
    let first = member_scores
        .first()
        .ok_or_else(|| Error::data("ensemble has no members"))?;
    if params.len() != member_scores.len() {
        return Err(Error::data("one calibration per ensemble member is required"));
    }
    if member_scores.iter().any(|m| m.len() != first.len()) {
        return Err(Error::data("ensemble members scored different numbers of units"));
    }
    let calibrated = member_scores
        .iter()
        .zip(params)
        .map(|(scores, p)| scores.iter().map(|&s| calibrate_score(s, p)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let k = calibrated.len() as f64;
    Ok((0..first.len())
        .map(|i| calibrated.iter().map(|m| m[i]).sum::<f64>() / k)
        .collect())
}

/// `(est_pos - true_pos) / n_total`. Panics if `n_total` is zero.
pub fn bias_metric(est_pos: f64, true_pos: u64, n_total: u64) -> f64 {
    assert!(n_total > 0, "bias_metric needs n_total > 0");
    (est_pos - true_pos as f64) / n_total as f64
}

/// One method's line of a positive-count comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct Table1Row {
    pub method: String,
    pub true_pos: u64,
    pub est_pos: f64,
    pub bias: f64,
    pub accuracy: f64,
}

/// A scorer whose outputs are prior-shift calibrated.
pub struct Calibrated<'a, P: ?Sized> {
    pub inner: &'a P,
    pub params: CalibrationParams,
}

impl<P: Predict + ?Sized> Predict for Calibrated<'_, P> {
    fn predict(&self, x: &[f64]) -> Result<f64> {
        calibrate_score(self.inner.predict(x)?, &self.params)
    }

    fn fallback_count(&self) -> usize {
        self.inner.fallback_count()
    }
}
