//! Second-order gradient boosting of depth-limited regression trees under
//! logistic loss, with exact greedy level-wise split search.

use serde::{Deserialize, Serialize};

use super::logistic;
use super::tree::{midpoint, presort, DecisionTree, TreeNode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GBoostParams {
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    /// Minimum hessian sum per child.
    pub min_child_weight: f64,
    /// Minimum loss reduction for a split.
    pub gamma: f64,
}

impl Default for GBoostParams {
    fn default() -> Self {
        Self {
            rounds: 100,
            max_depth: 3,
            learning_rate: 0.1,
            lambda: 1.0,
            min_child_weight: 1.0,
            gamma: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoost {
    pub base_margin: f64,
    pub trees: Vec<DecisionTree>,
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct Scan {
    gl: f64,
    hl: f64,
    last: f64,
    started: bool,
}

impl GradientBoost {
    /// `x`, `y` must already be in canonical order and contain both classes.
    pub(crate) fn fit(x: &[Vec<f64>], y: &[u8], params: &GBoostParams) -> Self {
        let n = x.len();
        let d = x[0].len();
        let order = presort(x);
        let p0 = y.iter().map(|&l| l as f64).sum::<f64>() / n as f64;
        let base_margin = (p0 / (1.0 - p0)).ln();
        let mut f = vec![base_margin; n];
        let mut g = vec![0.0; n];
        let mut h = vec![0.0; n];
        let mut trees = Vec::with_capacity(params.rounds);
        let lambda = params.lambda;
        let obj = |gs: f64, hs: f64| gs * gs / (hs + lambda);

        for _ in 0..params.rounds {
            for i in 0..n {
                let p = logistic(f[i]);
                g[i] = p - y[i] as f64;
                h[i] = (p * (1.0 - p)).max(1e-16);
            }
            let mut nodes = vec![TreeNode::Leaf { value: 0.0 }];
            let mut node_of = vec![0usize; n];
            // open nodes at the current depth: (node id, G, H)
            let mut open = vec![(0usize, g.iter().sum::<f64>(), h.iter().sum::<f64>())];
            let mut finished: Vec<(usize, f64, f64)> = Vec::new();
            for _depth in 0..params.max_depth {
                if open.is_empty() {
                    break;
                }
                let mut slot_of = vec![usize::MAX; nodes.len()];
                for (s, &(id, _, _)) in open.iter().enumerate() {
                    slot_of[id] = s;
                }
                let mut best: Vec<Option<Candidate>> = vec![None; open.len()];
                for (feat, idx) in order.iter().enumerate().take(d) {
                    let mut scan: Vec<Scan> = (0..open.len())
                        .map(|_| Scan {
                            gl: 0.0,
                            hl: 0.0,
                            last: 0.0,
                            started: false,
                        })
                        .collect();
                    for &i in idx {
                        let i = i as usize;
                        let s = slot_of[node_of[i]];
                        if s == usize::MAX {
                            continue;
                        }
                        let v = x[i][feat];
                        let st = &mut scan[s];
                        if st.started && v != st.last {
                            let (_, gt, ht) = open[s];
                            let (gr, hr) = (gt - st.gl, ht - st.hl);
                            if st.hl >= params.min_child_weight && hr >= params.min_child_weight {
                                let gain = 0.5 * (obj(st.gl, st.hl) + obj(gr, hr) - obj(gt, ht))
                                    - params.gamma;
                                if gain > 1e-12 && best[s].is_none_or(|b| gain > b.gain) {
                                    best[s] = Some(Candidate {
                                        gain,
                                        feature: feat,
                                        threshold: midpoint(st.last, v),
                                    });
                                }
                            }
                        }
                        st.gl += g[i];
                        st.hl += h[i];
                        st.last = v;
                        st.started = true;
                    }
                }
                let mut child_of: Vec<Option<(usize, usize)>> = vec![None; nodes.len()];
                let mut next_open = Vec::new();
                for (s, &(id, gt, ht)) in open.iter().enumerate() {
                    match best[s] {
                        None => finished.push((id, gt, ht)),
                        Some(c) => {
                            let left = nodes.len();
                            nodes.push(TreeNode::Leaf { value: 0.0 });
                            nodes.push(TreeNode::Leaf { value: 0.0 });
                            nodes[id] = TreeNode::Split {
                                feature: c.feature,
                                threshold: c.threshold,
                                left,
                                right: left + 1,
                            };
                            child_of[id] = Some((left, left + 1));
                        }
                    }
                }
                let mut stats = vec![(0.0, 0.0); nodes.len()];
                for i in 0..n {
                    let id = node_of[i];
                    if let Some((l, r)) = child_of[id] {
                        let TreeNode::Split {
                            feature, threshold, ..
                        } = nodes[id]
                        else {
                            unreachable!()
                        };
                        node_of[i] = if x[i][feature] <= threshold { l } else { r };
                        stats[node_of[i]].0 += g[i];
                        stats[node_of[i]].1 += h[i];
                    }
                }
                for (l, r) in child_of.iter().flatten() {
                    next_open.push((*l, stats[*l].0, stats[*l].1));
                    next_open.push((*r, stats[*r].0, stats[*r].1));
                }
                open = next_open;
            }
            finished.extend(open);
            for (id, gs, hs) in finished {
                nodes[id] = TreeNode::Leaf {
                    value: -params.learning_rate * gs / (hs + lambda),
                };
            }
            let tree = DecisionTree { nodes };
            for i in 0..n {
                f[i] += tree.eval(&x[i]);
            }
            trees.push(tree);
        }
        Self { base_margin, trees }
    }

    pub fn margin(&self, x: &[f64]) -> f64 {
        self.base_margin + self.trees.iter().map(|t| t.eval(x)).sum::<f64>()
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        logistic(self.margin(x))
    }
}
