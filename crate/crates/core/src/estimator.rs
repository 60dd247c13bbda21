//! The CART-assisted difference estimator of a population total:
//! `sum_U yhat_k + sum_s w_k (y_k - yhat_k)`, with `w_k` the sample's
//! expansion weights (`1/pi_k` without replacement).

use std::collections::BTreeMap;

use crate::cart::Predict;
use crate::measurement::ObservedDataset;
use crate::numeric::pairwise_sum;
use crate::sampling::Sample;
use crate::{Error, Result, UnitId};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateRecord {
    pub point_estimate: f64,
    /// `sum_U yhat_k`
    pub synthetic_term: f64,
    /// `sum_s w_k (y_k - yhat_k)`
    pub correction_term: f64,
    pub fallback_count: usize,
}

impl EstimateRecord {
    /// `|point - (synthetic + correction)|` relative to the largest magnitude
    /// involved (at least 1).
    pub fn additivity_gap(&self) -> f64 {
        let scale = self
            .point_estimate
            .abs()
            .max(self.synthetic_term.abs())
            .max(self.correction_term.abs())
            .max(1.0);
        (self.point_estimate - (self.synthetic_term + self.correction_term)).abs() / scale
    }
}

/// Estimates the total of `y` over the units of `population`.
///
/// `population` holds the observed features of every unit of `U` (its targets
/// are ignored); `sample_values` holds the observed target of every sampled
/// unit. Sums run over ascending unit id with pairwise accumulation. The point
/// estimate sums per-unit contributions `yhat (1 - w) + y w` for sampled units
/// and `yhat` otherwise, which makes a census reproduce the population total
/// term for term.
pub fn cart_assisted_total<P: Predict + ?Sized>(
    population: &ObservedDataset,
    sample: &Sample,
    sample_values: &BTreeMap<UnitId, f64>,
    model: &P,
) -> Result<EstimateRecord> {
    let mut rows: Vec<(UnitId, &[f64])> = population
        .rows()
        .iter()
        .map(|r| (r.id, r.x.as_slice()))
        .collect();
    rows.sort_by_key(|r| r.0);
    let predictions = rows
        .iter()
        .map(|(_, x)| model.predict(x))
        .collect::<Result<Vec<f64>>>()?;

    let mut contributions = predictions.clone();
    let mut corrections = Vec::with_capacity(sample.len());
    for draw in sample.draws() {
        if !(draw.pi > 0.0) {
            return Err(Error::design(format!("unit {}: pi = 0", draw.id)));
        }
        let pos = rows
            .binary_search_by_key(&draw.id, |r| r.0)
            .map_err(|_| Error::data(format!("no features for sampled unit {}", draw.id)))?;
        let y = *sample_values
            .get(&draw.id)
            .ok_or_else(|| Error::data(format!("no observed value for sampled unit {}", draw.id)))?;
        let w = sample.weight(draw);
        let yhat = predictions[pos];
        contributions[pos] = yhat * (1.0 - w) + y * w;
        corrections.push(w * (y - yhat));
    }
    Ok(EstimateRecord {
        point_estimate: pairwise_sum(&contributions),
        synthetic_term: pairwise_sum(&predictions),
        correction_term: pairwise_sum(&corrections),
        fallback_count: model.fallback_count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{Provenance, Row};
    use crate::sampling::{self, Design, Draw};

    struct Constant(f64);

    impl Predict for Constant {
        fn predict(&self, _: &[f64]) -> Result<f64> {
            Ok(self.0)
        }
    }

    fn units(n: u64) -> ObservedDataset {
        let rows = (1..=n)
            .map(|id| Row {
                id,
                x: vec![id as f64],
                y: 0.0,
            })
            .collect();
        ObservedDataset::new(rows, Provenance::default()).unwrap()
    }

    #[test]
    fn zero_model_reduces_to_ht() {
        let u = units(10);
        let s = Sample::from_draws(
            vec![
                Draw { id: 1, pi: 0.5, multiplicity: 1 },
                Draw { id: 2, pi: 0.25, multiplicity: 1 },
            ],
            Design::Census,
            0,
        )
        .unwrap();
        let v: BTreeMap<UnitId, f64> = [(1, 3.0), (2, 1.0)].into();
        let r = cart_assisted_total(&u, &s, &v, &Constant(0.0)).unwrap();
        assert_eq!(r.point_estimate, sampling::ht_total(&s, &v).unwrap());
        assert_eq!(r.synthetic_term, 0.0);
        assert!(r.additivity_gap() < 1e-12);
    }

    #[test]
    fn census_recovers_total() {
        let u = units(100);
        let s = Sample::from_draws(
            (1..=100).map(|id| Draw { id, pi: 1.0, multiplicity: 1 }).collect(),
            Design::Census,
            0,
        )
        .unwrap();
        let v: BTreeMap<UnitId, f64> = (1..=100).map(|id| (id, (id as f64).sqrt())).collect();
        let truth = pairwise_sum(&v.values().copied().collect::<Vec<_>>());
        let r = cart_assisted_total(&u, &s, &v, &Constant(1.7)).unwrap();
        assert_eq!(r.point_estimate, truth);
        assert!(r.additivity_gap() < 1e-12);
    }

    #[test]
    fn missing_features_or_values() {
        let u = units(3);
        let s = Sample::from_draws(vec![Draw { id: 9, pi: 0.5, multiplicity: 1 }], Design::Census, 0)
            .unwrap();
        let v: BTreeMap<UnitId, f64> = [(9, 1.0)].into();
        assert!(matches!(cart_assisted_total(&u, &s, &v, &Constant(0.0)), Err(Error::Data(_))));
        let s2 = Sample::from_draws(vec![Draw { id: 1, pi: 0.5, multiplicity: 1 }], Design::Census, 0)
            .unwrap();
        assert!(matches!(
            cart_assisted_total(&u, &s2, &BTreeMap::new(), &Constant(0.0)),
            Err(Error::Data(_))
        ));
    }
}
