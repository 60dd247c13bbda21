//! Probability sampling designs, the Horvitz-Thompson expansion and
//! nonresponse injection.

use std::collections::BTreeMap;

use rand::Rng;

use crate::numeric::pairwise_sum;
use crate::population::FinitePopulation;
use crate::rng::{self, tag};
use crate::{Error, Result, UnitId};

/// Expected sample size or explicit first-order inclusion probabilities for a
/// Poisson design. Explicit probabilities follow the population's unit order.
#[derive(Clone, Debug, PartialEq)]
pub enum PoissonSize {
    Expected(f64),
    Probabilities(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Design {
    /// Every unit with certainty.
    Census,
    Srswor { n: usize },
    Srswr { n: usize },
    Poisson(PoissonSize),
    /// SRSWOR within strata cut on one feature. Stratum `h` holds units whose
    /// feature value `v` has exactly `h` cuts `<= v`.
    Stratified {
        feature: usize,
        cuts: Vec<f64>,
        sizes: Vec<usize>,
    },
}

impl Design {
    pub fn label(&self) -> String {
        match self {
            Design::Census => "census".into(),
            Design::Srswor { n } => format!("srswor(n={n})"),
            Design::Srswr { n } => format!("srswr(n={n})"),
            Design::Poisson(PoissonSize::Expected(n)) => format!("poisson(n={n})"),
            Design::Poisson(PoissonSize::Probabilities(_)) => "poisson(pi)".into(),
            Design::Stratified { sizes, .. } => format!("stratified(n_h={sizes:?})"),
        }
    }

    pub fn is_with_replacement(&self) -> bool {
        matches!(self, Design::Srswr { .. })
    }

    fn strata(&self, pop: &FinitePopulation) -> Result<Vec<usize>> {
        let Design::Stratified { feature, cuts, .. } = self else {
            unreachable!()
        };
        pop.units()
            .iter()
            .map(|u| {
                let v = *u.x0.get(*feature).ok_or_else(|| {
                    Error::design(format!("stratifying feature {feature} out of range"))
                })?;
                Ok(cuts.partition_point(|c| *c <= v))
            })
            .collect()
    }

    /// First-order inclusion probabilities in population unit order.
    pub fn inclusion_probabilities(&self, pop: &FinitePopulation) -> Result<Vec<f64>> {
        let big_n = pop.len();
        let pis = match self {
            Design::Census => vec![1.0; big_n],
            Design::Srswor { n } => {
                if *n > big_n {
                    return Err(Error::design(format!("SRSWOR n={n} exceeds N={big_n}")));
                }
                vec![*n as f64 / big_n as f64; big_n]
            }
            Design::Srswr { n } => {
                let p = 1.0 - (1.0 - 1.0 / big_n as f64).powi(*n as i32);
                vec![p; big_n]
            }
            Design::Poisson(PoissonSize::Expected(n)) => {
                if !(n.is_finite() && *n <= big_n as f64) {
                    return Err(Error::design(format!("Poisson expected size {n} exceeds N={big_n}")));
                }
                vec![n / big_n as f64; big_n]
            }
            Design::Poisson(PoissonSize::Probabilities(p)) => {
                if p.len() != big_n {
                    return Err(Error::design(format!(
                        "{} inclusion probabilities for {big_n} units",
                        p.len()
                    )));
                }
                p.clone()
            }
            Design::Stratified { cuts, sizes, .. } => {
                if sizes.len() != cuts.len() + 1 {
                    return Err(Error::design("stratified design needs one size per stratum"));
                }
                if cuts.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::design("stratum cuts must be strictly ascending"));
                }
                let strata = self.strata(pop)?;
                let mut counts = vec![0usize; sizes.len()];
                for &h in &strata {
                    counts[h] += 1;
                }
                for (h, (&n_h, &big_n_h)) in sizes.iter().zip(&counts).enumerate() {
                    if n_h > big_n_h {
                        return Err(Error::design(format!(
                            "stratum {h}: n_h={n_h} exceeds N_h={big_n_h}"
                        )));
                    }
                }
                strata
                    .iter()
                    .map(|&h| sizes[h] as f64 / counts[h] as f64)
                    .collect()
            }
        };
        if let Some(bad) = pis.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
            return Err(Error::design(format!("inclusion probability {bad} outside (0, 1]")));
        }
        Ok(pis)
    }
}

/// Analytic first-order inclusion probability of unit `id`.
pub fn inclusion_prob(design: &Design, pop: &FinitePopulation, id: UnitId) -> Result<f64> {
    let pos = pop.position(id).ok_or(Error::Lookup(id))?;
    Ok(design.inclusion_probabilities(pop)?[pos])
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Draw {
    pub id: UnitId,
    pub pi: f64,
    pub multiplicity: u32,
}

/// Draw count and per-draw selection probability of a with-replacement
/// sample, used by the Hansen-Hurwitz expansion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WithReplacement {
    pub draws: usize,
    pub draw_probability: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    draws: Vec<Draw>,
    design: Design,
    seed: u64,
    replacement: Option<WithReplacement>,
}

impl Sample {
    /// Builds a without-replacement sample from explicit draws.
    pub fn from_draws(mut draws: Vec<Draw>, design: Design, seed: u64) -> Result<Self> {
        draws.sort_by_key(|d| d.id);
        if draws.windows(2).any(|w| w[0].id == w[1].id) {
            return Err(Error::data("duplicate unit in sample"));
        }
        if let Some(d) = draws.iter().find(|d| !(d.pi > 0.0 && d.pi <= 1.0)) {
            return Err(Error::design(format!("unit {}: pi={} outside (0, 1]", d.id, d.pi)));
        }
        if draws.iter().any(|d| d.multiplicity != 1) {
            return Err(Error::design("without-replacement draws must have multiplicity 1"));
        }
        Ok(Self {
            draws,
            design,
            seed,
            replacement: None,
        })
    }

    pub fn draws(&self) -> &[Draw] {
        &self.draws
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn replacement(&self) -> Option<WithReplacement> {
        self.replacement
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = UnitId> + '_ {
        self.draws.iter().map(|d| d.id)
    }

    /// Expansion weight of one draw: `1/pi` without replacement, and the
    /// Hansen-Hurwitz `multiplicity / (n p)` with replacement.
    pub fn weight(&self, draw: &Draw) -> f64 {
        match self.replacement {
            None => 1.0 / draw.pi,
            Some(wr) => draw.multiplicity as f64 / (wr.draws as f64 * wr.draw_probability),
        }
    }

    /// Keeps the draws whose ids satisfy `keep`, leaving weights untouched.
    pub fn retain(&self, mut keep: impl FnMut(&Draw) -> bool) -> Sample {
        let mut out = self.clone();
        out.draws.retain(|d| keep(d));
        out
    }
}

/// Draws a sample. Deterministic in `(design, pop, seed)`.
pub fn draw(design: &Design, pop: &FinitePopulation, seed: u64) -> Result<Sample> {
    let pis = design.inclusion_probabilities(pop)?;
    let units = pop.units();
    let mut rng = rng::stream(seed, &[tag::DESIGN]);
    let mut replacement = None;
    let draws: Vec<Draw> = match design {
        Design::Census => units
            .iter()
            .map(|u| Draw {
                id: u.id,
                pi: 1.0,
                multiplicity: 1,
            })
            .collect(),
        Design::Srswor { n } => {
            let mut picked = rand::seq::index::sample(&mut rng, units.len(), *n).into_vec();
            picked.sort_unstable();
            picked
                .into_iter()
                .map(|i| Draw {
                    id: units[i].id,
                    pi: pis[i],
                    multiplicity: 1,
                })
                .collect()
        }
        Design::Srswr { n } => {
            if units.is_empty() && *n > 0 {
                return Err(Error::design("SRSWR from an empty population"));
            }
            let mut counts = BTreeMap::<usize, u32>::new();
            for _ in 0..*n {
                *counts.entry(rng.random_range(0..units.len())).or_default() += 1;
            }
            replacement = Some(WithReplacement {
                draws: *n,
                draw_probability: 1.0 / units.len() as f64,
            });
            counts
                .into_iter()
                .map(|(i, m)| Draw {
                    id: units[i].id,
                    pi: pis[i],
                    multiplicity: m,
                })
                .collect()
        }
        Design::Poisson(_) => units
            .iter()
            .zip(&pis)
            .filter_map(|(u, &pi)| {
                (rng.random::<f64>() < pi).then_some(Draw {
                    id: u.id,
                    pi,
                    multiplicity: 1,
                })
            })
            .collect(),
        Design::Stratified { sizes, .. } => {
            let strata = design.strata(pop)?;
            let mut members: Vec<Vec<usize>> = vec![Vec::new(); sizes.len()];
            for (i, &h) in strata.iter().enumerate() {
                members[h].push(i);
            }
            let mut picked: Vec<usize> = members
                .iter()
                .zip(sizes)
                .flat_map(|(m, &n_h)| {
                    rand::seq::index::sample(&mut rng, m.len(), n_h)
                        .into_iter()
                        .map(|j| m[j])
                        .collect::<Vec<_>>()
                })
                .collect();
            picked.sort_unstable();
            picked
                .into_iter()
                .map(|i| Draw {
                    id: units[i].id,
                    pi: pis[i],
                    multiplicity: 1,
                })
                .collect()
        }
    };
    Ok(Sample {
        draws,
        design: design.clone(),
        seed,
        replacement,
    })
}

/// Expanded total `sum_k w_k y_k` over the sample, `w_k` as in
/// [`Sample::weight`].
pub fn ht_total(sample: &Sample, values: &BTreeMap<UnitId, f64>) -> Result<f64> {
    let terms = sample
        .draws
        .iter()
        .map(|d| {
            if !(d.pi > 0.0) {
                return Err(Error::design(format!("unit {}: pi = 0", d.id)));
            }
            let y = values
                .get(&d.id)
                .ok_or_else(|| Error::data(format!("no value for sampled unit {}", d.id)))?;
            Ok(sample.weight(d) * y)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(pairwise_sum(&terms))
}

/// Retains each drawn unit independently with its response propensity.
/// Inclusion probabilities are left unadjusted.
pub fn apply_nonresponse(
    sample: &Sample,
    propensity: &BTreeMap<UnitId, f64>,
    seed: u64,
) -> Result<Sample> {
    for d in &sample.draws {
        let p = propensity
            .get(&d.id)
            .ok_or_else(|| Error::data(format!("no response propensity for unit {}", d.id)))?;
        if !(*p > 0.0 && *p <= 1.0) {
            return Err(Error::config(format!(
                "unit {}: response propensity {p} outside (0, 1]",
                d.id
            )));
        }
    }
    Ok(sample.retain(|d| {
        let p = propensity[&d.id];
        p >= 1.0 || rng::unit_stream(seed, &[tag::NONRESPONSE], d.id).random::<f64>() < p
    }))
}
