//! Discrete AdaBoost over decision stumps.

use serde::{Deserialize, Serialize};

use super::tree::{midpoint, presort};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaBoostParams {
    pub rounds: usize,
}

impl Default for AdaBoostParams {
    fn default() -> Self {
        Self { rounds: 100 }
    }
}

/// Predicts `polarity` when `x[feature] > threshold`, else `-polarity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub polarity: f64,
    pub alpha: f64,
}

impl Stump {
    pub fn vote(&self, x: &[f64]) -> f64 {
        if x[self.feature] > self.threshold {
            self.polarity
        } else {
            -self.polarity
        }
    }
}

/// Per-round training diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundStats {
    pub weighted_error: f64,
    /// Fraction of training rows misclassified by the ensemble so far.
    pub training_error: f64,
    /// Mean of exp(−y·F(x)) over the training rows.
    pub exp_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoost {
    pub stumps: Vec<Stump>,
    #[serde(default)]
    pub history: Vec<RoundStats>,
}

const MIN_ERROR: f64 = 1e-10;

impl AdaBoost {
    /// `x`, `y` must already be in canonical order and contain both classes.
    pub(crate) fn fit(x: &[Vec<f64>], y: &[u8], params: &AdaBoostParams) -> Self {
        let n = x.len();
        let d = x[0].len();
        let order = presort(x);
        let s: Vec<f64> = y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
        let mut w = vec![1.0 / n as f64; n];
        let mut margin = vec![0.0; n];
        let mut stumps = Vec::new();
        let mut history = Vec::new();
        for _ in 0..params.rounds {
            // all rows on one side; f64::MIN keeps the model JSON-representable
            let pos: f64 = (0..n).filter(|&i| s[i] > 0.0).map(|i| w[i]).sum();
            let mut best = if pos >= 0.5 {
                (1.0 - pos, 0usize, f64::MIN, 1.0)
            } else {
                (pos, 0usize, f64::MIN, -1.0)
            };
            for (f, idx) in order.iter().enumerate().take(d) {
                // rows at or below the threshold predict −polarity
                let (mut left_pos, mut left_neg) = (0.0, 0.0);
                let total_neg = 1.0 - pos;
                for k in 0..n - 1 {
                    let i = idx[k] as usize;
                    if s[i] > 0.0 {
                        left_pos += w[i];
                    } else {
                        left_neg += w[i];
                    }
                    let v = x[i][f];
                    let next = x[idx[k + 1] as usize][f];
                    if next == v {
                        continue;
                    }
                    // polarity +1: errors are left positives and right negatives
                    let e_plus = left_pos + (total_neg - left_neg);
                    let e_minus = 1.0 - e_plus;
                    if e_plus < best.0 {
                        best = (e_plus, f, midpoint(v, next), 1.0);
                    }
                    if e_minus < best.0 {
                        best = (e_minus, f, midpoint(v, next), -1.0);
                    }
                }
            }
            let (err, feature, threshold, polarity) = best;
            if err >= 0.5 {
                break;
            }
            let e = err.max(MIN_ERROR);
            let alpha = 0.5 * ((1.0 - e) / e).ln();
            let stump = Stump {
                feature,
                threshold,
                polarity,
                alpha,
            };
            let mut z = 0.0;
            for i in 0..n {
                let h = stump.vote(&x[i]);
                margin[i] += alpha * h;
                w[i] *= (-alpha * s[i] * h).exp();
                z += w[i];
            }
            w.iter_mut().for_each(|v| *v /= z);
            stumps.push(stump);
            let wrong = (0..n)
                .filter(|&i| (margin[i] >= 0.0) != (s[i] > 0.0))
                .count();
            history.push(RoundStats {
                weighted_error: err,
                training_error: wrong as f64 / n as f64,
                exp_loss: (0..n).map(|i| (-s[i] * margin[i]).exp()).sum::<f64>() / n as f64,
            });
            if err <= MIN_ERROR {
                break;
            }
        }
        Self { stumps, history }
    }

    pub fn margin(&self, x: &[f64]) -> f64 {
        self.stumps.iter().map(|s| s.alpha * s.vote(x)).sum()
    }

    /// Logistic of twice the additive score, the population minimiser of the
    /// exponential loss.
    pub fn score(&self, x: &[f64]) -> f64 {
        super::logistic(2.0 * self.margin(x))
    }
}
