//! CART regression tree and binary-classification scorer.
//!
//! Splits are chosen greedily to minimize the within-node sum of squared
//! errors. For binary labels coded 0/1 this is proportional to the one-hot
//! SSE (Gini), so both tasks share one splitter. Candidate thresholds are
//! midpoints between consecutive distinct sorted values; ties go to the lowest
//! feature index, then the smallest threshold. A unit goes left when
//! `x[feature] < threshold`.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::measurement::ObservedDataset;
use crate::sampling::Sample;
use crate::{Error, Result, UnitId};

/// Relative margin a candidate must beat the incumbent split by.
const TIE_RTOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
    pub min_split_improvement: f64,
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_leaf < 1 {
            return Err(Error::config("min_leaf must be >= 1"));
        }
        if !(self.min_split_improvement >= 0.0) {
            return Err(Error::config("min_split_improvement must be >= 0"));
        }
        Ok(())
    }
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_depth: 6,
            min_leaf: 20,
            min_split_improvement: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TreeTask {
    Regression,
    /// Binary labels 0/1; leaf weights are positive-class shares.
    Classification,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Leaf {
    pub region: usize,
    /// Mean training target of the leaf.
    pub weight: f64,
    pub count: usize,
    /// Hájek re-estimate from a probability sample, when design-weighted.
    pub design_weight: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(Leaf),
}

/// Anything that maps a feature vector to a real prediction.
pub trait Predict {
    fn predict(&self, x: &[f64]) -> Result<f64>;

    /// Leaves that borrowed an ancestor's value during design weighting.
    fn fallback_count(&self) -> usize {
        0
    }
}

/// A fitted binary tree. Nodes are stored in preorder with the root at 0.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeModel {
    nodes: Vec<Node>,
    dim: usize,
    task: TreeTask,
    design_weighted: bool,
    fallbacks: usize,
}

#[derive(Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct Builder<'a> {
    xs: Vec<&'a [f64]>,
    ys: Vec<f64>,
    config: FitConfig,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let at = self.nodes.len();
        let n = idx.len();
        let mean = idx.iter().map(|&i| self.ys[i]).sum::<f64>() / n as f64;
        self.nodes.push(Node::Leaf(Leaf {
            region: 0,
            weight: mean,
            count: n,
            design_weight: None,
        }));
        let pure = idx.iter().all(|&i| self.ys[i] == self.ys[idx[0]]);
        if depth >= self.config.max_depth || n < 2 * self.config.min_leaf || pure {
            return at;
        }
        let Some(best) = self.best_split(&idx, mean) else {
            return at;
        };
        if !(best.gain > 0.0 && best.gain >= self.config.min_split_improvement) {
            return at;
        }
        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.xs[i][best.feature] < best.threshold);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[at] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        at
    }

    fn best_split(&self, idx: &[usize], mean: f64) -> Option<Candidate> {
        let n = idx.len();
        let min_leaf = self.config.min_leaf;
        let total: f64 = idx.iter().map(|&i| self.ys[i] - mean).sum();
        let mut best: Option<Candidate> = None;
        let mut order = idx.to_vec();
        for f in 0..self.xs[idx[0]].len() {
            order.sort_by(|&a, &b| self.xs[a][f].total_cmp(&self.xs[b][f]));
            let mut left_sum = 0.0;
            for pos in 1..n {
                left_sum += self.ys[order[pos - 1]] - mean;
                if pos < min_leaf || n - pos < min_leaf {
                    continue;
                }
                let (lo, hi) = (self.xs[order[pos - 1]][f], self.xs[order[pos]][f]);
                if !(lo < hi) {
                    continue;
                }
                let right_sum = total - left_sum;
                // SSE(parent) - SSE(left) - SSE(right) on centred targets
                let gain = left_sum * left_sum / pos as f64 + right_sum * right_sum / (n - pos) as f64
                    - total * total / n as f64;
                let better = match best {
                    None => true,
                    Some(b) => gain > b.gain + TIE_RTOL * b.gain.abs(),
                };
                if better {
                    let mid = 0.5 * (lo + hi);
                    best = Some(Candidate {
                        feature: f,
                        threshold: if mid > lo { mid } else { hi },
                        gain,
                    });
                }
            }
        }
        best
    }
}

/// Fits a tree on the observed rows.
pub fn fit(data: &ObservedDataset, config: &FitConfig, task: TreeTask) -> Result<TreeModel> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Fit("no training rows".into()));
    }
    if data.dim() == 0 {
        return Err(Error::Fit("no features".into()));
    }
    if data.len() < config.min_leaf {
        return Err(Error::Fit(format!(
            "{} rows is fewer than min_leaf={}",
            data.len(),
            config.min_leaf
        )));
    }
    if task == TreeTask::Classification && data.rows().iter().any(|r| r.y != 0.0 && r.y != 1.0) {
        return Err(Error::Fit("classification targets must be 0 or 1".into()));
    }
    let mut builder = Builder {
        xs: data.rows().iter().map(|r| r.x.as_slice()).collect(),
        ys: data.targets(),
        config: *config,
        nodes: Vec::new(),
    };
    builder.build((0..data.len()).collect(), 0);
    let mut nodes = builder.nodes;
    let mut region = 0;
    for node in &mut nodes {
        if let Node::Leaf(leaf) = node {
            leaf.region = region;
            region += 1;
        }
    }
    Ok(TreeModel {
        nodes,
        dim: data.dim(),
        task,
        design_weighted: false,
        fallbacks: 0,
    })
}

impl TreeModel {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn task(&self) -> TreeTask {
        self.task
    }

    pub fn is_design_weighted(&self) -> bool {
        self.design_weighted
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Leaf> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf(l) => Some(l),
            Node::Split { .. } => None,
        })
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().count()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::data(format!(
                "feature vector of length {} for a tree of dimension {}",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }

    fn route_index(&self, x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf(_) => return at,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] < *threshold { *left } else { *right },
            }
        }
    }

    /// The leaf whose region contains `x`.
    pub fn route(&self, x: &[f64]) -> Result<&Leaf> {
        self.check_dim(x)?;
        match &self.nodes[self.route_index(x)] {
            Node::Leaf(l) => Ok(l),
            Node::Split { .. } => unreachable!(),
        }
    }

    fn active(&self, leaf: &Leaf) -> f64 {
        match (self.design_weighted, leaf.design_weight) {
            (true, Some(w)) => w,
            _ => leaf.weight,
        }
    }

    /// Positive-class share of the leaf containing `x`.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if self.task != TreeTask::Classification {
            return Err(Error::Usage("score requires a classification tree".into()));
        }
        let leaf = self.route(x)?;
        Ok(self.active(leaf))
    }

    /// Copy of the tree with plain training means restored as leaf values.
    pub fn without_design_weights(&self) -> TreeModel {
        let mut out = self.clone();
        out.design_weighted = false;
        out.fallbacks = 0;
        for node in &mut out.nodes {
            if let Node::Leaf(l) = node {
                l.design_weight = None;
            }
        }
        out
    }

    /// Preorder text form: a header line, then one tab-separated line per
    /// node (`S feature threshold` or `L region count weight design_weight`).
    pub fn to_text(&self) -> String {
        let task = match self.task {
            TreeTask::Regression => "regression",
            TreeTask::Classification => "classification",
        };
        let mut s = format!(
            "tree\t{task}\t{}\t{}\t{}\n",
            self.dim, self.design_weighted as u8, self.fallbacks
        );
        self.write_node(0, &mut s);
        s
    }

    fn write_node(&self, at: usize, out: &mut String) {
        match &self.nodes[at] {
            Node::Leaf(l) => {
                let dw = l.design_weight.map_or("-".to_string(), |w| format!("{w:?}"));
                let _ = writeln!(out, "L\t{}\t{}\t{:?}\t{dw}", l.region, l.count, l.weight);
            }
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                let _ = writeln!(out, "S\t{feature}\t{threshold:?}");
                self.write_node(*left, out);
                self.write_node(*right, out);
            }
        }
    }

    pub fn from_text(text: &str) -> Result<TreeModel> {
        let bad = |m: &str| Error::data(format!("tree text: {m}"));
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty"))?.split('\t').collect();
        if header.len() != 5 || header[0] != "tree" {
            return Err(bad("malformed header"));
        }
        let task = match header[1] {
            "regression" => TreeTask::Regression,
            "classification" => TreeTask::Classification,
            _ => return Err(bad("unknown task")),
        };
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad("expected an integer"));
        let dim = num(header[2])?;
        let design_weighted = num(header[3])? == 1;
        let fallbacks = num(header[4])?;
        let mut nodes = Vec::new();
        parse_node(&mut lines, &mut nodes)?;
        if lines.next().is_some() {
            return Err(bad("trailing nodes"));
        }
        Ok(TreeModel {
            nodes,
            dim,
            task,
            design_weighted,
            fallbacks,
        })
    }
}

fn parse_node<'a>(lines: &mut impl Iterator<Item = &'a str>, nodes: &mut Vec<Node>) -> Result<usize> {
    let bad = |m: &str| Error::data(format!("tree text: {m}"));
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad("expected an integer"));
    let real = |s: &str| s.parse::<f64>().map_err(|_| bad("expected a number"));
    let line = lines.next().ok_or_else(|| bad("truncated tree"))?;
    let f: Vec<&str> = line.split('\t').collect();
    let at = nodes.len();
    match f.as_slice() {
        ["S", feature, threshold] => {
            let (feature, threshold) = (num(feature)?, real(threshold)?);
            nodes.push(Node::Leaf(Leaf {
                region: 0,
                weight: 0.0,
                count: 0,
                design_weight: None,
            }));
            let left = parse_node(lines, nodes)?;
            let right = parse_node(lines, nodes)?;
            nodes[at] = Node::Split {
                feature,
                threshold,
                left,
                right,
            };
        }
        ["L", region, count, weight, dw] => nodes.push(Node::Leaf(Leaf {
            region: num(region)?,
            count: num(count)?,
            weight: real(weight)?,
            design_weight: if *dw == "-" { None } else { Some(real(dw)?) },
        })),
        _ => return Err(bad("malformed node line")),
    }
    Ok(at)
}

impl Predict for TreeModel {
    /// Active leaf value (`w~_m` when design-weighted, else `w_m`).
    fn predict(&self, x: &[f64]) -> Result<f64> {
        let leaf = self.route(x)?;
        Ok(self.active(leaf))
    }

    fn fallback_count(&self) -> usize {
        self.fallbacks
    }
}

/// Re-estimates every leaf as the Hájek ratio `sum(w y) / sum(w)` over the
/// sampled units routed to it, with `w` the sample's expansion weights.
/// A leaf that receives no sampled unit takes the ratio of its nearest
/// ancestor that does; the number of such leaves is kept on the model.
pub fn design_weighted_leaves(
    model: &TreeModel,
    sample: &Sample,
    data: &ObservedDataset,
) -> Result<TreeModel> {
    let rows: HashMap<UnitId, usize> = data
        .rows()
        .iter()
        .enumerate()
        .map(|(i, r)| (r.id, i))
        .collect();
    let mut parent = vec![usize::MAX; model.nodes.len()];
    for (at, node) in model.nodes.iter().enumerate() {
        if let Node::Split { left, right, .. } = node {
            parent[*left] = at;
            parent[*right] = at;
        }
    }
    let mut num = vec![0.0; model.nodes.len()];
    let mut den = vec![0.0; model.nodes.len()];
    for draw in sample.draws() {
        let row = &data.rows()[*rows
            .get(&draw.id)
            .ok_or_else(|| Error::data(format!("no observed row for sampled unit {}", draw.id)))?];
        model.check_dim(&row.x)?;
        if !(draw.pi > 0.0) {
            return Err(Error::design(format!("unit {}: pi = 0", draw.id)));
        }
        let w = sample.weight(draw);
        let mut at = model.route_index(&row.x);
        loop {
            num[at] += w * row.y;
            den[at] += w;
            if at == 0 {
                break;
            }
            at = parent[at];
        }
    }
    let mut out = model.clone();
    out.design_weighted = true;
    out.fallbacks = 0;
    for at in 0..out.nodes.len() {
        if let Node::Leaf(leaf) = &mut out.nodes[at] {
            let mut src = at;
            while den[src] == 0.0 && src != 0 {
                src = parent[src];
            }
            if src != at {
                out.fallbacks += 1;
            }
            leaf.design_weight = Some(if den[src] > 0.0 {
                num[src] / den[src]
            } else {
                // empty sample: nothing to re-estimate from
                leaf.weight
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{Provenance, Row};
    use crate::sampling::{Design, Draw};

    fn dataset(points: &[(f64, f64)]) -> ObservedDataset {
        let rows = points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| Row {
                id: i as u64 + 1,
                x: vec![x],
                y,
            })
            .collect();
        ObservedDataset::new(rows, Provenance::default()).unwrap()
    }

    fn cfg(depth: usize, min_leaf: usize) -> FitConfig {
        FitConfig {
            max_depth: depth,
            min_leaf,
            min_split_improvement: 0.0,
        }
    }

    #[test]
    fn depth_zero_is_global_mean() {
        let d = dataset(&[(0.0, 1.0), (1.0, 2.0), (2.0, 6.0)]);
        let t = fit(&d, &cfg(0, 1), TreeTask::Regression).unwrap();
        assert_eq!(t.leaf_count(), 1);
        assert_eq!(t.predict(&[10.0]).unwrap(), 3.0);
    }

    #[test]
    fn constant_target_single_leaf() {
        let d = dataset(&[(0.0, 0.1), (1.0, 0.1), (2.0, 0.1), (5.0, 0.1)]);
        let t = fit(&d, &cfg(8, 1), TreeTask::Regression).unwrap();
        assert_eq!(t.leaf_count(), 1);
    }

    #[test]
    fn routing_depth_one() {
        let d = dataset(&[(-2.0, 1.0), (-1.0, 1.0), (1.0, 3.0), (2.0, 3.0)]);
        let t = fit(&d, &cfg(1, 1), TreeTask::Regression).unwrap();
        assert_eq!(t.predict(&[-5.0]).unwrap(), 1.0);
        assert_eq!(t.predict(&[5.0]).unwrap(), 3.0);
        assert!(matches!(t.nodes()[0], Node::Split { threshold, .. } if threshold == 0.0));
        assert!(matches!(t.predict(&[1.0, 2.0]), Err(Error::Data(_))));
    }

    #[test]
    fn empty_data_is_fit_error() {
        let d = ObservedDataset::new(vec![], Provenance::default()).unwrap();
        assert!(matches!(fit(&d, &cfg(2, 1), TreeTask::Regression), Err(Error::Fit(_))));
    }

    #[test]
    fn score_requires_classification() {
        let d = dataset(&[(0.0, 0.0), (1.0, 1.0)]);
        let t = fit(&d, &cfg(1, 1), TreeTask::Regression).unwrap();
        assert!(matches!(t.score(&[0.0]), Err(Error::Usage(_))));
        let c = fit(&d, &cfg(1, 1), TreeTask::Classification).unwrap();
        assert_eq!(c.score(&[1.0]).unwrap(), 1.0);
    }

    #[test]
    fn leaf_with_three_of_twelve_positive() {
        let pts: Vec<(f64, f64)> = (0..12).map(|i| (i as f64, if i < 3 { 1.0 } else { 0.0 })).collect();
        let t = fit(&dataset(&pts), &cfg(0, 1), TreeTask::Classification).unwrap();
        assert_eq!(t.score(&[0.0]).unwrap(), 0.25);
    }

    #[test]
    fn hajek_leaf_arithmetic() {
        let d = dataset(&[(0.0, 2.0), (0.5, 4.0)]);
        let t = fit(&d, &cfg(0, 1), TreeTask::Regression).unwrap();
        let s = Sample::from_draws(
            vec![
                Draw { id: 1, pi: 0.5, multiplicity: 1 },
                Draw { id: 2, pi: 0.25, multiplicity: 1 },
            ],
            Design::Census,
            0,
        )
        .unwrap();
        let w = design_weighted_leaves(&t, &s, &d).unwrap();
        assert!((w.predict(&[0.0]).unwrap() - 10.0 / 3.0).abs() < 1e-15);
        assert_eq!(w.fallback_count(), 0);
    }

    #[test]
    fn empty_leaf_falls_back_to_parent() {
        let d = dataset(&[(0.0, 1.0), (1.0, 1.0), (10.0, 5.0), (11.0, 7.0)]);
        let t = fit(&d, &cfg(2, 1), TreeTask::Regression).unwrap();
        // sample only the left half
        let s = Sample::from_draws(
            vec![
                Draw { id: 1, pi: 0.5, multiplicity: 1 },
                Draw { id: 2, pi: 0.5, multiplicity: 1 },
            ],
            Design::Census,
            0,
        )
        .unwrap();
        let w = design_weighted_leaves(&t, &s, &d).unwrap();
        assert_eq!(w.fallback_count(), 2);
        // both right leaves borrow the root's ratio
        assert_eq!(w.predict(&[10.0]).unwrap(), 1.0);
        assert_eq!(w.predict(&[11.0]).unwrap(), 1.0);
    }

    #[test]
    fn text_round_trip() {
        let pts: Vec<(f64, f64)> = (0..40).map(|i| (i as f64 * 0.37, ((i * 7) % 11) as f64)).collect();
        let t = fit(&dataset(&pts), &cfg(4, 2), TreeTask::Regression).unwrap();
        assert!(t.leaf_count() > 3);
        let back = TreeModel::from_text(&t.to_text()).unwrap();
        assert_eq!(back, t);
        assert!(TreeModel::from_text("tree\tregression\t1\t0\t0\nS\t0\t1.0\n").is_err());
    }
}
