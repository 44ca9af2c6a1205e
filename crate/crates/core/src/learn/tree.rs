//! Binary decision trees shared by the forest and the boosters.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// `x[feature] <= threshold` descends left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
}

impl DecisionTree {
    pub fn leaf(value: f64) -> Self {
        Self {
            nodes: vec![TreeNode::Leaf { value }],
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, *left).max(walk(nodes, *right))
                }
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                TreeNode::Split { feature, .. } => Some(*feature),
                TreeNode::Leaf { .. } => None,
            })
            .max()
    }
}

/// Threshold between two consecutive distinct sorted values.
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m < hi {
        m
    } else {
        lo
    }
}

/// Per-feature row order by ascending value (ties by row index).
pub(crate) fn presort(x: &[Vec<f64>]) -> Vec<Vec<u32>> {
    let d = x.first().map_or(0, Vec::len);
    (0..d)
        .map(|f| {
            let mut idx: Vec<u32> = (0..x.len() as u32).collect();
            idx.sort_by(|&a, &b| {
                x[a as usize][f]
                    .total_cmp(&x[b as usize][f])
                    .then(a.cmp(&b))
            });
            idx
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GiniParams {
    pub max_features: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: u32,
}

struct GiniBuilder<'a, R: Rng> {
    x: &'a [Vec<f64>],
    y: &'a [u8],
    weight: &'a [u32],
    params: GiniParams,
    rng: &'a mut R,
    nodes: Vec<TreeNode>,
    features: Vec<usize>,
    scratch: Vec<(f64, u8, u32)>,
}

impl<R: Rng> GiniBuilder<'_, R> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { value: 0.0 });
        let (mut w, mut w1) = (0u64, 0u64);
        for &r in &rows {
            w += self.weight[r] as u64;
            w1 += (self.weight[r] * self.y[r] as u32) as u64;
        }
        let value = w1 as f64 / w as f64;
        let stop = w1 == 0
            || w1 == w
            || w < self.params.min_samples_split as u64
            || self.params.max_depth.is_some_and(|m| depth >= m);
        let split = if stop {
            None
        } else {
            self.best_split(&rows, w, w1)
        };
        match split {
            None => self.nodes[id] = TreeNode::Leaf { value },
            Some((feature, threshold)) => {
                let (l, r): (Vec<usize>, Vec<usize>) = rows
                    .into_iter()
                    .partition(|&i| self.x[i][feature] <= threshold);
                let left = self.grow(l, depth + 1);
                let right = self.grow(r, depth + 1);
                self.nodes[id] = TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
            }
        }
        id
    }

    /// Visits features in random order until `max_features` non-constant ones
    /// have been scored; returns the split with the lowest weighted Gini.
    fn best_split(&mut self, rows: &[usize], w: u64, w1: u64) -> Option<(usize, f64)> {
        self.features.shuffle(self.rng);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut scored = 0;
        for fi in 0..self.features.len() {
            if scored >= self.params.max_features {
                break;
            }
            let f = self.features[fi];
            self.scratch.clear();
            self.scratch.extend(
                rows.iter()
                    .map(|&r| (self.x[r][f], self.y[r], self.weight[r])),
            );
            self.scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
            if self.scratch[0].0 == self.scratch[self.scratch.len() - 1].0 {
                continue;
            }
            scored += 1;
            let (mut lw, mut lw1) = (0u64, 0u64);
            for k in 0..self.scratch.len() - 1 {
                let (v, label, c) = self.scratch[k];
                lw += c as u64;
                lw1 += (c * label as u32) as u64;
                let next = self.scratch[k + 1].0;
                if next == v {
                    continue;
                }
                let rw = w - lw;
                let rw1 = w1 - lw1;
                let impurity = gini_mass(lw, lw1) + gini_mass(rw, rw1);
                if best.is_none_or(|b| impurity < b.0) {
                    best = Some((impurity, f, midpoint(v, next)));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

/// Weighted Gini impurity `w · (1 − p₀² − p₁²)`.
fn gini_mass(w: u64, w1: u64) -> f64 {
    if w == 0 {
        return 0.0;
    }
    let (w, w1) = (w as f64, w1 as f64);
    let w0 = w - w1;
    w - (w0 * w0 + w1 * w1) / w
}

/// Grows a Gini classification tree over rows with positive `weight`; leaf
/// values are the weighted fraction of label 1.
pub(crate) fn grow_gini<R: Rng>(
    x: &[Vec<f64>],
    y: &[u8],
    weight: &[u32],
    params: GiniParams,
    rng: &mut R,
) -> DecisionTree {
    let rows: Vec<usize> = (0..x.len()).filter(|&i| weight[i] > 0).collect();
    if rows.is_empty() {
        return DecisionTree::leaf(0.0);
    }
    let d = x[0].len();
    let mut b = GiniBuilder {
        x,
        y,
        weight,
        params,
        rng,
        nodes: Vec::new(),
        features: (0..d).collect(),
        scratch: Vec::with_capacity(rows.len()),
    };
    b.grow(rows, 0);
    DecisionTree { nodes: b.nodes }
}
