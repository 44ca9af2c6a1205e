//! Periodized orthogonal discrete wavelet transform (Mallat cascade).

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::FeatureError;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Daubechies scaling filter with 4 vanishing moments (8 taps).
const DB4: [f64; 8] = [
    0.230_377_813_308_855_23,
    0.714_846_570_552_541_5,
    0.630_880_767_929_590_4,
    -0.027_983_769_416_983_85,
    -0.187_034_811_718_881_14,
    0.030_841_381_835_986_965,
    0.032_883_011_666_982_945,
    -0.010_597_401_784_997_278,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wavelet {
    Haar,
    Db4,
}

impl Wavelet {
    /// Low-pass (scaling) taps.
    pub fn scaling(self) -> &'static [f64] {
        const HAAR: [f64; 2] = [FRAC_1_SQRT_2, FRAC_1_SQRT_2];
        match self {
            Wavelet::Haar => &HAAR,
            Wavelet::Db4 => &DB4,
        }
    }

    /// High-pass taps from the quadrature-mirror relation g[k] = (-1)^k h[L-1-k].
    pub fn wavelet(self) -> Vec<f64> {
        let h = self.scaling();
        let l = h.len();
        (0..l)
            .map(|k| {
                if k % 2 == 0 {
                    h[l - 1 - k]
                } else {
                    -h[l - 1 - k]
                }
            })
            .collect()
    }
}

impl FromStr for Wavelet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "haar" | "db1" => Ok(Wavelet::Haar),
            "db4" => Ok(Wavelet::Db4),
            other => Err(format!("unknown wavelet `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletCoefficients {
    pub wavelet: Wavelet,
    /// D1 (finest) .. DL (coarsest).
    pub details: Vec<Vec<f64>>,
    pub approximation: Vec<f64>,
    /// Signal length entering each level; `lengths[0]` is the original length.
    pub lengths: Vec<usize>,
}

impl WaveletCoefficients {
    pub fn levels(&self) -> usize {
        self.details.len()
    }

    pub fn original_len(&self) -> usize {
        self.lengths.first().copied().unwrap_or(0)
    }
}

fn analysis_step(x: &[f64], h: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut ext;
    let x = if x.len() % 2 == 1 {
        ext = x.to_vec();
        ext.push(*x.last().unwrap());
        &ext[..]
    } else {
        x
    };
    let n = x.len();
    let half = n / 2;
    let mut a = vec![0.0; half];
    let mut d = vec![0.0; half];
    for k in 0..half {
        let (mut sa, mut sd) = (0.0, 0.0);
        for (j, (hj, gj)) in h.iter().zip(g).enumerate() {
            let v = x[(2 * k + j) % n];
            sa += hj * v;
            sd += gj * v;
        }
        a[k] = sa;
        d[k] = sd;
    }
    (a, d)
}

fn synthesis_step(a: &[f64], d: &[f64], h: &[f64], g: &[f64], out_len: usize) -> Vec<f64> {
    let n = 2 * a.len();
    let mut x = vec![0.0; n];
    for k in 0..a.len() {
        for (j, (hj, gj)) in h.iter().zip(g).enumerate() {
            x[(2 * k + j) % n] += a[k] * hj + d[k] * gj;
        }
    }
    x.truncate(out_len);
    x
}

/// Multi-level decomposition. Odd-length intermediate signals are extended by
/// repeating their last sample, so any length `>= 2^levels` is accepted.
pub fn dwt(
    signal: &[f64],
    wavelet: Wavelet,
    levels: usize,
) -> Result<WaveletCoefficients, FeatureError> {
    if levels == 0 || levels >= usize::BITS as usize || signal.len() < (1usize << levels) {
        return Err(FeatureError::TooManyLevels {
            levels,
            len: signal.len(),
        });
    }
    let h = wavelet.scaling();
    let g = wavelet.wavelet();
    let mut details = Vec::with_capacity(levels);
    let mut lengths = Vec::with_capacity(levels);
    let mut approx = signal.to_vec();
    for _ in 0..levels {
        lengths.push(approx.len());
        let (a, d) = analysis_step(&approx, h, &g);
        details.push(d);
        approx = a;
    }
    Ok(WaveletCoefficients {
        wavelet,
        details,
        approximation: approx,
        lengths,
    })
}

pub fn idwt(coeffs: &WaveletCoefficients) -> Result<Vec<f64>, FeatureError> {
    let levels = coeffs.details.len();
    if levels == 0 || coeffs.lengths.len() != levels {
        return Err(FeatureError::InconsistentStructure(
            "level count and length table disagree".into(),
        ));
    }
    for l in 0..levels {
        let expect = coeffs.lengths[l].div_ceil(2);
        if coeffs.details[l].len() != expect {
            return Err(FeatureError::InconsistentStructure(format!(
                "D{} has {} coefficients, expected {expect}",
                l + 1,
                coeffs.details[l].len()
            )));
        }
        if l + 1 < levels && coeffs.lengths[l + 1] != expect {
            return Err(FeatureError::InconsistentStructure(format!(
                "length table inconsistent at level {}",
                l + 1
            )));
        }
    }
    if coeffs.approximation.len() != coeffs.lengths[levels - 1].div_ceil(2) {
        return Err(FeatureError::InconsistentStructure(
            "approximation length".into(),
        ));
    }
    let h = coeffs.wavelet.scaling();
    let g = coeffs.wavelet.wavelet();
    let mut approx = coeffs.approximation.clone();
    for l in (0..levels).rev() {
        approx = synthesis_step(&approx, &coeffs.details[l], h, &g, coeffs.lengths[l]);
    }
    Ok(approx)
}
