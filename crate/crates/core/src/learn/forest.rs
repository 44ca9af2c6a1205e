//! Bagged Gini trees with per-split feature subsampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow_gini, DecisionTree, GiniParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features scored per split; `None` means ⌊√d⌋.
    pub max_features: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_samples_split: u32,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_features: None,
            max_depth: None,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
}

impl RandomForest {
    /// `x`, `y` must already be in canonical order.
    pub(crate) fn fit(x: &[Vec<f64>], y: &[u8], params: &ForestParams, seed: u64) -> Self {
        let n = x.len();
        let d = x[0].len();
        let gini = GiniParams {
            max_features: params
                .max_features
                .unwrap_or(((d as f64).sqrt().floor() as usize).max(1))
                .clamp(1, d),
            max_depth: params.max_depth,
            min_samples_split: params.min_samples_split.max(2),
        };
        let trees = (0..params.n_trees.max(1))
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(t as u64);
                let mut counts = vec![0u32; n];
                for _ in 0..n {
                    counts[rng.gen_range(0..n)] += 1;
                }
                grow_gini(x, y, &counts, gini, &mut rng)
            })
            .collect();
        Self { trees }
    }

    /// Fraction of trees voting for label 1.
    pub fn score(&self, x: &[f64]) -> f64 {
        let votes = self.trees.iter().filter(|t| t.eval(x) > 0.5).count();
        votes as f64 / self.trees.len() as f64
    }
}
