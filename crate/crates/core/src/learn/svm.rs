//! Soft-margin RBF support vector machine trained by SMO with second-order
//! working-set selection.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub c: f64,
    /// `None` means 1/d on standardized features.
    pub gamma: Option<f64>,
    pub tolerance: f64,
    pub max_iter: Option<usize>,
    pub cache_mb: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: None,
            tolerance: 1e-3,
            max_iter: None,
            cache_mb: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Self {
        let n = x.len() as f64;
        let d = x[0].len();
        let mut mean = vec![0.0; d];
        for r in x {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in x {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var.into_iter().map(|s| {
            let sd = (s / n).sqrt();
            if sd > 0.0 && sd.is_finite() {
                sd
            } else {
                1.0
            }
        });
        Self {
            mean,
            scale: scale.collect(),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Svm {
    pub standardizer: Standardizer,
    pub gamma: f64,
    pub support_vectors: Vec<Vec<f64>>,
    /// αᵢ·yᵢ per support vector.
    pub dual_coef: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct KernelRows<'a> {
    x: &'a [Vec<f64>],
    sq: Vec<f64>,
    gamma: f64,
    rows: Vec<Option<Vec<f64>>>,
    fifo: VecDeque<usize>,
    capacity: usize,
}

impl<'a> KernelRows<'a> {
    fn new(x: &'a [Vec<f64>], gamma: f64, cache_mb: usize) -> Self {
        let n = x.len();
        let capacity = ((cache_mb << 20) / (8 * n.max(1))).max(2);
        Self {
            x,
            sq: x.iter().map(|r| dot(r, r)).collect(),
            gamma,
            rows: vec![None; n],
            fifo: VecDeque::new(),
            capacity,
        }
    }

    fn row(&mut self, i: usize) -> &[f64] {
        if self.rows[i].is_none() {
            if self.fifo.len() >= self.capacity {
                if let Some(old) = self.fifo.pop_front() {
                    self.rows[old] = None;
                }
            }
            let xi = &self.x[i];
            let si = self.sq[i];
            let row = self
                .x
                .iter()
                .zip(&self.sq)
                .map(|(xj, sj)| (-self.gamma * (si + sj - 2.0 * dot(xi, xj)).max(0.0)).exp())
                .collect();
            self.rows[i] = Some(row);
            self.fifo.push_back(i);
        }
        self.rows[i].as_deref().unwrap()
    }
}

const TAU: f64 = 1e-12;

impl Svm {
    /// `x`, `y` must already be in canonical order and contain both classes.
    pub(crate) fn fit(x: &[Vec<f64>], y: &[u8], params: &SvmParams) -> Self {
        let standardizer = Standardizer::fit(x);
        let z: Vec<Vec<f64>> = x.iter().map(|r| standardizer.apply(r)).collect();
        let d = z[0].len();
        let gamma = params.gamma.unwrap_or(1.0 / d as f64);
        let n = z.len();
        let c = params.c;
        let s: Vec<f64> = y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
        let mut alpha = vec![0.0; n];
        let mut grad = vec![-1.0; n];
        let mut k = KernelRows::new(&z, gamma, params.cache_mb);
        let max_iter = params.max_iter.unwrap_or((100 * n).max(10_000_000));
        let upper = |a: f64| a >= c;
        let lower = |a: f64| a <= 0.0;

        let mut iterations = 0;
        let mut converged = false;
        while iterations < max_iter {
            // i: maximal violating index in I_up
            let mut gmax = f64::NEG_INFINITY;
            let mut i = usize::MAX;
            for t in 0..n {
                let v = -s[t] * grad[t];
                let in_up = if s[t] > 0.0 {
                    !upper(alpha[t])
                } else {
                    !lower(alpha[t])
                };
                if in_up && v >= gmax {
                    gmax = v;
                    i = t;
                }
            }
            if i == usize::MAX {
                converged = true;
                break;
            }
            let ki = k.row(i).to_vec();
            // j: second-order choice within I_low
            let mut gmax2 = f64::NEG_INFINITY;
            let mut j = usize::MAX;
            let mut best = f64::INFINITY;
            for t in 0..n {
                let in_low = if s[t] > 0.0 {
                    !lower(alpha[t])
                } else {
                    !upper(alpha[t])
                };
                if !in_low {
                    continue;
                }
                let v = s[t] * grad[t];
                if v >= gmax2 {
                    gmax2 = v;
                }
                let diff = gmax + v;
                if diff > 0.0 {
                    let quad = 2.0 - 2.0 * ki[t];
                    let quad = if quad > 0.0 { quad } else { TAU };
                    let obj = -(diff * diff) / quad;
                    if obj <= best {
                        best = obj;
                        j = t;
                    }
                }
            }
            if gmax + gmax2 < params.tolerance || j == usize::MAX {
                converged = true;
                break;
            }
            iterations += 1;

            let (ai_old, aj_old) = (alpha[i], alpha[j]);
            let quad = (2.0 - 2.0 * ki[j]).max(TAU);
            if s[i] != s[j] {
                let delta = (-grad[i] - grad[j]) / quad;
                let diff = alpha[i] - alpha[j];
                alpha[i] += delta;
                alpha[j] += delta;
                if diff > 0.0 {
                    if alpha[j] < 0.0 {
                        alpha[j] = 0.0;
                        alpha[i] = diff;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if diff > 0.0 {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = c - diff;
                    }
                } else if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            } else {
                let delta = (grad[i] - grad[j]) / quad;
                let sum = alpha[i] + alpha[j];
                alpha[i] -= delta;
                alpha[j] += delta;
                if sum > c {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = sum - c;
                    }
                } else if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if sum > c {
                    if alpha[j] > c {
                        alpha[j] = c;
                        alpha[i] = sum - c;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
            let dai = (alpha[i] - ai_old) * s[i];
            let daj = (alpha[j] - aj_old) * s[j];
            let kj = k.row(j);
            for t in 0..n {
                grad[t] += s[t] * (ki[t] * dai + kj[t] * daj);
            }
        }
        if !converged {
            log::warn!("SMO stopped after {iterations} iterations without reaching tolerance");
        }

        // offset from free vectors, else midpoint of the feasible interval
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut free_sum, mut free) = (0.0, 0usize);
        for t in 0..n {
            let yg = s[t] * grad[t];
            if upper(alpha[t]) {
                if s[t] < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if lower(alpha[t]) {
                if s[t] > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                free_sum += yg;
                free += 1;
            }
        }
        let rho = if free > 0 {
            free_sum / free as f64
        } else if ub.is_finite() && lb.is_finite() {
            (ub + lb) / 2.0
        } else if ub.is_finite() {
            ub
        } else {
            lb
        };

        let mut support_vectors = Vec::new();
        let mut dual_coef = Vec::new();
        for t in 0..n {
            if alpha[t] > 0.0 {
                support_vectors.push(z[t].clone());
                dual_coef.push(alpha[t] * s[t]);
            }
        }
        Self {
            standardizer,
            gamma,
            support_vectors,
            dual_coef,
            rho,
            iterations,
            converged,
        }
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        let z = self.standardizer.apply(x);
        let zz = dot(&z, &z);
        self.support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, a)| {
                a * (-self.gamma * (zz + dot(sv, sv) - 2.0 * dot(sv, &z)).max(0.0)).exp()
            })
            .sum::<f64>()
            - self.rho
    }

    /// Logistic of the decision value.
    pub fn score(&self, x: &[f64]) -> f64 {
        super::logistic(self.decision(x))
    }
}
