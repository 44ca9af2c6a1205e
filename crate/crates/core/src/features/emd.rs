//! Empirical mode decomposition by envelope-mean sifting.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmdConfig {
    pub max_imfs: usize,
    pub sift_sd_threshold: f64,
    pub max_sift_iters: usize,
}

impl Default for EmdConfig {
    fn default() -> Self {
        Self {
            max_imfs: 8,
            sift_sd_threshold: 0.25,
            max_sift_iters: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImfSet {
    pub imfs: Vec<Vec<f64>>,
    pub residue: Vec<f64>,
}

impl ImfSet {
    /// Σ IMFs + residue.
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut out = self.residue.clone();
        for imf in &self.imfs {
            out.iter_mut().zip(imf).for_each(|(o, v)| *o += v);
        }
        out
    }
}

pub(crate) fn extrema(x: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let mut maxima = Vec::new();
    let mut minima = Vec::new();
    for i in 1..x.len().saturating_sub(1) {
        if x[i] > x[i - 1] && x[i] >= x[i + 1] {
            maxima.push(i);
        } else if x[i] < x[i - 1] && x[i] <= x[i + 1] {
            minima.push(i);
        }
    }
    (maxima, minima)
}

/// Natural cubic spline through `(t, y)` (strictly increasing `t`), sampled at 0..n.
fn spline_through(t: &[f64], y: &[f64], n: usize) -> Vec<f64> {
    let k = t.len();
    if k == 1 {
        return vec![y[0]; n];
    }
    if k == 2 {
        let slope = (y[1] - y[0]) / (t[1] - t[0]);
        return (0..n).map(|i| y[0] + slope * (i as f64 - t[0])).collect();
    }
    // second derivatives via the tridiagonal system, natural ends
    let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    let mut m = vec![0.0; k];
    let mut diag = vec![0.0; k];
    let mut rhs = vec![0.0; k];
    for i in 1..k - 1 {
        diag[i] = 2.0 * (h[i - 1] + h[i]);
        rhs[i] = 6.0 * ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]);
    }
    for i in 2..k - 1 {
        let w = h[i - 1] / diag[i - 1];
        diag[i] -= w * h[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    for i in (1..k - 1).rev() {
        let upper = if i + 1 < k - 1 { h[i] * m[i + 1] } else { 0.0 };
        m[i] = (rhs[i] - upper) / diag[i];
    }

    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for i in 0..n {
        let x = i as f64;
        while seg + 2 < k && x > t[seg + 1] {
            seg += 1;
        }
        let (x0, x1) = (t[seg], t[seg + 1]);
        let hs = h[seg];
        let a = (x1 - x) / hs;
        let b = (x - x0) / hs;
        out.push(
            a * y[seg]
                + b * y[seg + 1]
                + ((a * a * a - a) * m[seg] + (b * b * b - b) * m[seg + 1]) * hs * hs / 6.0,
        );
    }
    out
}

/// Envelope through the given extrema, with two extrema mirrored about each end.
fn envelope(x: &[f64], idx: &[usize]) -> Vec<f64> {
    let n = x.len();
    let last = (n - 1) as f64;
    let mut knots: Vec<(f64, f64)> = Vec::with_capacity(idx.len() + 4);
    for &i in idx.iter().take(2).rev() {
        knots.push((-(i as f64), x[i]));
    }
    knots.extend(idx.iter().map(|&i| (i as f64, x[i])));
    for &i in idx.iter().rev().take(2) {
        knots.push((2.0 * last - i as f64, x[i]));
    }
    knots.dedup_by(|b, a| b.0 <= a.0);
    let (t, y): (Vec<f64>, Vec<f64>) = knots.into_iter().unzip();
    spline_through(&t, &y, n)
}

fn can_sift(x: &[f64]) -> bool {
    let (mx, mn) = extrema(x);
    !mx.is_empty() && !mn.is_empty() && mx.len() + mn.len() >= 4
}

/// Decomposes `signal` into intrinsic mode functions plus a residue.
///
/// Each IMF is sifted until the standard-deviation criterion
/// Σ m² / Σ h² drops below the threshold or the iteration cap is reached.
/// Inputs with too few extrema return no IMFs and the input as residue.
pub fn emd(signal: &[f64], cfg: &EmdConfig) -> ImfSet {
    let mut residue = signal.to_vec();
    let mut imfs = Vec::new();
    while imfs.len() < cfg.max_imfs && can_sift(&residue) {
        let mut h = residue.clone();
        for _ in 0..cfg.max_sift_iters.max(1) {
            let (mx, mn) = extrema(&h);
            if mx.is_empty() || mn.is_empty() || mx.len() + mn.len() < 4 {
                break;
            }
            let upper = envelope(&h, &mx);
            let lower = envelope(&h, &mn);
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..h.len() {
                let mean = 0.5 * (upper[i] + lower[i]);
                num += mean * mean;
                den += h[i] * h[i];
                h[i] -= mean;
            }
            if den == 0.0 || num / den < cfg.sift_sd_threshold {
                break;
            }
        }
        if h.iter().all(|v| *v == 0.0) {
            break;
        }
        residue.iter_mut().zip(&h).for_each(|(r, v)| *r -= v);
        imfs.push(h);
    }
    ImfSet { imfs, residue }
}
