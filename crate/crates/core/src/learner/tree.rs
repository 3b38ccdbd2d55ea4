//! Weighted regression tree with optional linear leaves.
//!
//! Splits are chosen greedily to maximize the weighted reduction of the sum
//! of squared deviations from the node mean. Candidate thresholds are the
//! midpoints between consecutive distinct values of each dimension; ties in
//! reduction go to the lowest dimension index, then the lowest threshold.
//!
//! Before growing, identical `(config, target)` samples are merged into one
//! sample carrying the summed weight and the set is put in canonical order.
//! Training on a sample of integer weight `k` is therefore bit-identical to
//! training on `k` unit-weight copies, and the fitted tree does not depend
//! on the input order.
//!
//! A leaf never predicts outside the range of its own training targets.

use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::linalg::cholesky_solve;
use super::{Predict, Regressor};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::space::{Config, FeatureSpace};

const MIN_RELATIVE_GAIN: f64 = 1e-12;
const PIVOT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeafKind {
    Constant,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf_weight: f64,
    pub leaf_kind: LeafKind,
    /// Fit `ln(target)` and predict `exp` of the fitted value. Requires
    /// positive targets.
    pub log_target: bool,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { max_depth: 12, min_leaf_weight: 4.0, leaf_kind: LeafKind::Linear, log_target: false }
    }
}

impl TreeParams {
    /// Settings for positive response surfaces spanning orders of magnitude,
    /// such as latency and throughput: shallower trees fit in log space.
    pub fn log_scale() -> Self {
        TreeParams { max_depth: 8, log_target: true, ..TreeParams::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min_leaf_weight.is_finite() && self.min_leaf_weight >= 0.0) {
            return Err(Error::InvalidArgument(format!("min_leaf_weight must be >= 0, got {}", self.min_leaf_weight)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TreeRegressor {
    pub params: TreeParams,
}

impl TreeRegressor {
    pub fn new(params: TreeParams) -> Self {
        TreeRegressor { params }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum Node {
    Split { dim: usize, threshold: f64, left: usize, right: usize },
    Leaf(Leaf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Leaf {
    weight: f64,
    samples: usize,
    mean: f64,
    /// Range of the leaf's training targets; predictions are clamped to it.
    lo: f64,
    hi: f64,
    /// Linear correction over normalized coordinates:
    /// `mean + sum(coef[i] * (u[dims[i]] - center[i]))`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    dims: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    center: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    coef: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    space: FeatureSpace,
    params: TreeParams,
    nodes: Vec<Node>,
}

impl Regressor for TreeRegressor {
    type Model = TreeModel;

    fn train(&self, data: &Dataset) -> Result<TreeModel> {
        self.params.validate()?;
        if data.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let space = data.space().as_ref().clone();
        let rows = canonical_rows(data);
        let d = space.len();
        let n = rows.len();
        let mut x = Vec::with_capacity(n * d);
        let mut y = Vec::with_capacity(n);
        let mut w = Vec::with_capacity(n);
        for r in &rows {
            x.extend_from_slice(r.values);
            if self.params.log_target {
                if !(r.target > 0.0) {
                    return Err(Error::InvalidArgument(format!("log-target tree needs positive targets, got {}", r.target)));
                }
                y.push(r.target.ln());
            } else {
                y.push(r.target);
            }
            w.push(r.weight);
        }

        let sorted: Vec<Vec<u32>> = (0..d)
            .map(|j| {
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_by(|&a, &b| x[a as usize * d + j].total_cmp(&x[b as usize * d + j]));
                idx
            })
            .collect();

        let mut builder = Builder { x: &x, y: &y, w: &w, d, params: &self.params, space: &space, nodes: Vec::new() };
        builder.grow(sorted, 0);
        let nodes = builder.nodes;
        Ok(TreeModel { space, params: self.params, nodes })
    }
}

struct Row<'a> {
    values: &'a [f64],
    target: f64,
    weight: f64,
}

fn cmp_rows(a: &Row<'_>, b: &Row<'_>) -> Ordering {
    for (x, y) in a.values.iter().zip(b.values) {
        match x.total_cmp(y) {
            Ordering::Equal => {}
            other => return other,
        }
    }
    a.target.total_cmp(&b.target)
}

/// Sorted rows with identical `(config, target)` pairs merged.
fn canonical_rows(data: &Dataset) -> Vec<Row<'_>> {
    let mut rows: Vec<Row<'_>> =
        data.iter().map(|s| Row { values: s.config.values(), target: s.target, weight: s.weight }).collect();
    rows.sort_by(cmp_rows);
    let mut merged: Vec<Row<'_>> = Vec::with_capacity(rows.len());
    for r in rows {
        match merged.last_mut() {
            Some(last) if cmp_rows(last, &r) == Ordering::Equal => last.weight += r.weight,
            _ => merged.push(r),
        }
    }
    merged
}

struct Builder<'a> {
    x: &'a [f64],
    y: &'a [f64],
    w: &'a [f64],
    d: usize,
    params: &'a TreeParams,
    space: &'a FeatureSpace,
    nodes: Vec<Node>,
}

struct Split {
    dim: usize,
    threshold: f64,
    gain: f64,
}

impl Builder<'_> {
    fn value(&self, row: u32, dim: usize) -> f64 {
        self.x[row as usize * self.d + dim]
    }

    /// Grows the subtree holding the rows in `sorted` (one copy of the row
    /// set per dimension, each ordered by that dimension) and returns its
    /// node index.
    fn grow(&mut self, sorted: Vec<Vec<u32>>, depth: usize) -> usize {
        let rows = &sorted[0];
        let total_w: f64 = rows.iter().map(|&r| self.w[r as usize]).sum();
        let mean = rows.iter().map(|&r| self.w[r as usize] * self.y[r as usize]).sum::<f64>() / total_w;
        let sse: f64 = rows
            .iter()
            .map(|&r| {
                let dy = self.y[r as usize] - mean;
                self.w[r as usize] * dy * dy
            })
            .sum();

        let splittable = depth < self.params.max_depth && sse > 0.0 && total_w >= 2.0 * self.params.min_leaf_weight;
        let split = if splittable { self.best_split(&sorted, mean, total_w, sse) } else { None };
        let Some(split) = split else {
            let leaf = self.fit_leaf(rows, total_w, mean);
            self.nodes.push(Node::Leaf(leaf));
            return self.nodes.len() - 1;
        };

        let index = self.nodes.len();
        self.nodes.push(Node::Leaf(Leaf::placeholder()));
        let (left, right): (Vec<Vec<u32>>, Vec<Vec<u32>>) = sorted
            .into_iter()
            .map(|list| list.into_iter().partition(|&r| self.value(r, split.dim) < split.threshold))
            .unzip();
        let left = self.grow(left, depth + 1);
        let right = self.grow(right, depth + 1);
        self.nodes[index] = Node::Split { dim: split.dim, threshold: split.threshold, left, right };
        index
    }

    fn best_split(&self, sorted: &[Vec<u32>], mean: f64, total_w: f64, sse: f64) -> Option<Split> {
        let min_leaf = self.params.min_leaf_weight;
        let total_s1: f64 = sorted[0].iter().map(|&r| self.w[r as usize] * (self.y[r as usize] - mean)).sum();
        let mut best: Option<Split> = None;
        for (dim, list) in sorted.iter().enumerate() {
            let (mut wl, mut s1, mut s2) = (0.0, 0.0, 0.0);
            for pair in list.windows(2) {
                let r = pair[0] as usize;
                let dy = self.y[r] - mean;
                wl += self.w[r];
                s1 += self.w[r] * dy;
                s2 += self.w[r] * dy * dy;
                let (a, b) = (self.value(pair[0], dim), self.value(pair[1], dim));
                if a >= b {
                    continue;
                }
                let wr = total_w - wl;
                if wl < min_leaf || wr < min_leaf || wr <= 0.0 {
                    continue;
                }
                let sse_left = s2 - s1 * s1 / wl;
                let sr = total_s1 - s1;
                let sse_right = (sse - s2) - sr * sr / wr;
                let gain = sse - sse_left - sse_right;
                if gain > MIN_RELATIVE_GAIN * sse && best.as_ref().is_none_or(|s| gain > s.gain) {
                    best = Some(Split { dim, threshold: midpoint(a, b), gain });
                }
            }
        }
        best
    }

    fn fit_leaf(&self, rows: &[u32], total_w: f64, mean: f64) -> Leaf {
        let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
            let y = self.y[r as usize];
            (lo.min(y), hi.max(y))
        });
        let mut leaf =
            Leaf { weight: total_w, samples: rows.len(), mean, lo, hi, dims: vec![], center: vec![], coef: vec![] };
        if self.params.leaf_kind == LeafKind::Constant || rows.len() < 2 {
            return leaf;
        }
        let dims: Vec<usize> = (0..self.d)
            .filter(|&j| {
                let first = self.value(rows[0], j);
                rows.iter().any(|&r| self.value(r, j) != first)
            })
            .collect();
        let p = dims.len();
        if p == 0 {
            return leaf;
        }
        let unit = |r: u32, k: usize| {
            let j = dims[k];
            let (lo, hi) = self.space.dims()[j].bounds();
            (self.value(r, j) - lo) / (hi - lo)
        };
        let mut center = vec![0.0; p];
        for &r in rows {
            for (k, c) in center.iter_mut().enumerate() {
                *c += self.w[r as usize] * unit(r, k);
            }
        }
        center.iter_mut().for_each(|c| *c /= total_w);

        let mut a = vec![0.0; p * p];
        let mut b = vec![0.0; p];
        let mut u = vec![0.0; p];
        for &r in rows {
            let wr = self.w[r as usize];
            for k in 0..p {
                u[k] = unit(r, k) - center[k];
            }
            let dy = self.y[r as usize] - mean;
            for i in 0..p {
                b[i] += wr * u[i] * dy;
                for j in 0..=i {
                    a[i * p + j] += wr * u[i] * u[j];
                }
            }
        }
        for i in 0..p {
            for j in 0..i {
                a[j * p + i] = a[i * p + j];
            }
        }
        if cholesky_solve(&mut a, &mut b, p, PIVOT_TOLERANCE).is_some() && b.iter().all(|c| c.is_finite()) {
            leaf.dims = dims;
            leaf.center = center;
            leaf.coef = b;
        }
        leaf
    }
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m > a && m <= b {
        m
    } else {
        b
    }
}

impl Leaf {
    fn placeholder() -> Self {
        Leaf { weight: 0.0, samples: 0, mean: 0.0, lo: 0.0, hi: 0.0, dims: vec![], center: vec![], coef: vec![] }
    }

    fn value(&self, values: &[f64], space: &FeatureSpace) -> f64 {
        let mut v = self.mean;
        for ((&j, &c), &k) in self.dims.iter().zip(&self.center).zip(&self.coef) {
            let (lo, hi) = space.dims()[j].bounds();
            v += k * ((values[j] - lo) / (hi - lo) - c);
        }
        v.clamp(self.lo, self.hi)
    }
}

impl TreeModel {
    pub fn space(&self) -> &FeatureSpace {
        &self.space
    }

    pub fn params(&self) -> &TreeParams {
        &self.params
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Root split as `(dimension, threshold)`, if the tree is not a single leaf.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match &self.nodes[0] {
            Node::Split { dim, threshold, .. } => Some((*dim, *threshold)),
            Node::Leaf(_) => None,
        }
    }

    /// Total weight held by each leaf, in node order.
    pub fn leaf_weights(&self) -> Vec<f64> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf(l) => Some(l.weight),
                _ => None,
            })
            .collect()
    }

    /// Index of the node holding the leaf `values` falls into.
    pub fn leaf_index(&self, values: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split { dim, threshold, left, right } => {
                    i = if values[*dim] < *threshold { *left } else { *right };
                }
                Node::Leaf(_) => return i,
            }
        }
    }

    fn leaf_for(&self, values: &[f64]) -> &Leaf {
        match &self.nodes[self.leaf_index(values)] {
            Node::Leaf(leaf) => leaf,
            Node::Split { .. } => unreachable!("leaf_index stops at a leaf"),
        }
    }

    pub fn predict_values(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.space.len());
        let v = self.leaf_for(values).value(values, &self.space);
        if self.params.log_target {
            v.exp()
        } else {
            v
        }
    }

    pub fn try_predict(&self, config: &Config) -> Result<f64> {
        self.space.check(config.values())?;
        Ok(self.predict_values(config.values()))
    }

    /// Human-readable dump, one node per line, indented by depth.
    pub fn dump(&self) -> String {
        fn walk(model: &TreeModel, i: usize, depth: usize, out: &mut String) {
            let pad = "  ".repeat(depth);
            match &model.nodes[i] {
                Node::Split { dim, threshold, left, right } => {
                    let name = &model.space.dims()[*dim].name;
                    let _ = writeln!(out, "{pad}{name} < {threshold}");
                    walk(model, *left, depth + 1, out);
                    let _ = writeln!(out, "{pad}{name} >= {threshold}");
                    walk(model, *right, depth + 1, out);
                }
                Node::Leaf(l) => {
                    let _ = write!(out, "{pad}leaf n={} w={} mean={}", l.samples, l.weight, l.mean);
                    for (j, k) in l.dims.iter().zip(&l.coef) {
                        let _ = write!(out, " {}:{k}", model.space.dims()[*j].name);
                    }
                    out.push('\n');
                }
            }
        }
        let mut out = String::new();
        walk(self, 0, 0, &mut out);
        out
    }
}

impl Predict for TreeModel {
    fn predict(&self, config: &Config) -> f64 {
        self.predict_values(config.values())
    }
}
