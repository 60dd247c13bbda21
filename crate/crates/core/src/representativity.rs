//! Distances between empirical distributions of two datasets: marginal
//! two-sample KS distances, cell-wise conditional distances of the target,
//! and coverage rates.

use std::collections::{BTreeMap, BTreeSet};

use crate::measurement::ObservedDataset;
use crate::population::FinitePopulation;
use crate::{Error, Result};

/// Sup-norm distance between the empirical distribution functions of `a` and
/// `b`.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::data("ks_distance needs two non-empty samples"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = if a[i].total_cmp(&b[j]).is_le() { a[i] } else { b[j] };
        while i < a.len() && a[i].total_cmp(&v).is_le() {
            i += 1;
        }
        while j < b.len() && b[j].total_cmp(&v).is_le() {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Cut points per conditioning feature. Cells are the cartesian product of
/// the per-feature intervals `(-inf, c1), [c1, c2), .., [ck, inf)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Binning {
    pub cuts: Vec<(usize, Vec<f64>)>,
}

impl Binning {
    /// Quartile cut points of `data` on each listed feature.
    pub fn quartiles(data: &ObservedDataset, features: &[usize]) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::data("cannot take quartiles of an empty dataset"));
        }
        let cuts = features
            .iter()
            .map(|&f| {
                if f >= data.dim() {
                    return Err(Error::Comparison(format!("binning feature {f} out of range")));
                }
                let mut col = data.column(f);
                col.sort_by(f64::total_cmp);
                let n = col.len();
                let mut qs: Vec<f64> = [0.25, 0.5, 0.75]
                    .iter()
                    .map(|q| col[((q * n as f64).ceil() as usize).clamp(1, n) - 1])
                    .collect();
                qs.dedup();
                Ok((f, qs))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { cuts })
    }

    fn cell_of(&self, x: &[f64]) -> Vec<usize> {
        self.cuts
            .iter()
            .map(|(f, c)| c.partition_point(|v| *v <= x[*f]))
            .collect()
    }

    fn label(&self, cell: &[usize]) -> String {
        cell.iter()
            .zip(&self.cuts)
            .map(|(&bin, (f, c))| {
                let lo = if bin == 0 { "-inf".to_string() } else { c[bin - 1].to_string() };
                let hi = if bin == c.len() { "inf".to_string() } else { c[bin].to_string() };
                format!("x{f}[{lo};{hi})")
            })
            .collect::<Vec<_>>()
            .join("&")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarginalDistance {
    pub variable: String,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellDistance {
    pub cell: String,
    pub count_a: usize,
    pub count_b: usize,
    /// `None` when the cell is empty in one of the datasets.
    pub distance: Option<f64>,
}

impl CellDistance {
    pub fn covered(&self) -> bool {
        self.distance.is_some()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RepresentativityReport {
    pub marginals: Vec<MarginalDistance>,
    pub cells: Vec<CellDistance>,
    /// Share of `a`'s rows in cells that `b` leaves empty.
    pub undercoverage: f64,
    /// Share of `b`'s rows in cells that `a` leaves empty.
    pub overcoverage: f64,
    /// Over marginal and covered-cell distances.
    pub max_distance: f64,
    pub mean_distance: f64,
}

/// Compares `a` and `b` marginally (every feature and the target) and,
/// within each cell of `binning`, on the target distribution.
pub fn conditional_representativity(
    a: &ObservedDataset,
    b: &ObservedDataset,
    binning: &Binning,
) -> Result<RepresentativityReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::data("representativity needs two non-empty datasets"));
    }
    if a.dim() != b.dim() {
        return Err(Error::Comparison(format!(
            "feature dimensions differ ({} vs {})",
            a.dim(),
            b.dim()
        )));
    }
    if let Some((f, _)) = binning.cuts.iter().find(|(f, _)| *f >= a.dim()) {
        return Err(Error::Comparison(format!("binning feature {f} out of range")));
    }
    let mut marginals = (0..a.dim())
        .map(|j| {
            Ok(MarginalDistance {
                variable: format!("x{j}"),
                distance: ks_distance(&a.column(j), &b.column(j))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    marginals.push(MarginalDistance {
        variable: "y".into(),
        distance: ks_distance(&a.targets(), &b.targets())?,
    });

    let group = |d: &ObservedDataset| {
        let mut m: BTreeMap<Vec<usize>, Vec<f64>> = BTreeMap::new();
        for r in d.rows() {
            m.entry(binning.cell_of(&r.x)).or_default().push(r.y);
        }
        m
    };
    let (ga, gb) = (group(a), group(b));
    let keys: BTreeSet<&Vec<usize>> = ga.keys().chain(gb.keys()).collect();
    let empty = Vec::new();
    let mut cells = Vec::with_capacity(keys.len());
    let (mut under, mut over) = (0usize, 0usize);
    for key in keys {
        let ya = ga.get(key).unwrap_or(&empty);
        let yb = gb.get(key).unwrap_or(&empty);
        let distance = if ya.is_empty() || yb.is_empty() {
            None
        } else {
            Some(ks_distance(ya, yb)?)
        };
        if yb.is_empty() {
            under += ya.len();
        }
        if ya.is_empty() {
            over += yb.len();
        }
        cells.push(CellDistance {
            cell: binning.label(key),
            count_a: ya.len(),
            count_b: yb.len(),
            distance,
        });
    }
    if !cells.iter().any(CellDistance::covered) {
        return Err(Error::Comparison("the datasets share no cell".into()));
    }
    let all: Vec<f64> = marginals
        .iter()
        .map(|m| m.distance)
        .chain(cells.iter().filter_map(|c| c.distance))
        .collect();
    Ok(RepresentativityReport {
        marginals,
        cells,
        undercoverage: under as f64 / a.len() as f64,
        overcoverage: over as f64 / b.len() as f64,
        max_distance: all.iter().copied().fold(0.0, f64::max),
        mean_distance: all.iter().sum::<f64>() / all.len() as f64,
    })
}

/// `(|target \ frame| / |target|, |frame \ target| / |frame|)` by unit id.
pub fn coverage_report(frame: &FinitePopulation, target: &FinitePopulation) -> Result<(f64, f64)> {
    if target.is_empty() {
        return Err(Error::data("coverage of an empty target population"));
    }
    let missing = target.units().iter().filter(|u| frame.get(u.id).is_none()).count();
    let extra = frame.units().iter().filter(|u| target.get(u.id).is_none()).count();
    let over = if frame.is_empty() {
        0.0
    } else {
        extra as f64 / frame.len() as f64
    };
    Ok((missing as f64 / target.len() as f64, over))
}
