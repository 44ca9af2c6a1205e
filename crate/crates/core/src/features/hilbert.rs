//! Analytic signal through one-sided spectrum doubling.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::spectral::{fft_forward, fft_inverse};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticSignal {
    pub real: Vec<f64>,
    /// Discrete Hilbert transform of `real`.
    pub imag: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub frequency_hz: Vec<f64>,
}

/// x_a = IFFT(FFT(x) · 2U), U the unit step over positive frequencies.
pub fn hilbert_analyze(x: &[f64], fs: f64) -> AnalyticSignal {
    let n = x.len();
    if n == 0 {
        return AnalyticSignal {
            real: vec![],
            imag: vec![],
            amplitude: vec![],
            frequency_hz: vec![],
        };
    }
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_forward(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let w = if k == 0 || (n % 2 == 0 && k == n / 2) {
            1.0
        } else if k < n.div_ceil(2) {
            2.0
        } else {
            0.0
        };
        *c *= w;
    }
    fft_inverse(&mut buf);
    let scale = 1.0 / n as f64;
    let imag: Vec<f64> = buf.iter().map(|c| c.im * scale).collect();
    let amplitude: Vec<f64> = x.iter().zip(&imag).map(|(r, i)| r.hypot(*i)).collect();

    let mut phase: Vec<f64> = x.iter().zip(&imag).map(|(r, i)| i.atan2(*r)).collect();
    for i in 1..n {
        let mut d = phase[i] - phase[i - 1];
        while d > std::f64::consts::PI {
            d -= 2.0 * std::f64::consts::PI;
        }
        while d < -std::f64::consts::PI {
            d += 2.0 * std::f64::consts::PI;
        }
        phase[i] = phase[i - 1] + d;
    }
    let to_hz = fs / (2.0 * std::f64::consts::PI);
    let frequency_hz = (0..n)
        .map(|i| {
            let d = if n == 1 {
                0.0
            } else if i == 0 {
                phase[1] - phase[0]
            } else if i == n - 1 {
                phase[n - 1] - phase[n - 2]
            } else {
                0.5 * (phase[i + 1] - phase[i - 1])
            };
            d * to_hz
        })
        .collect();
    AnalyticSignal {
        real: x.to_vec(),
        imag,
        amplitude,
        frequency_hz,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const FS: f64 = 128.0;

    fn interior(n: usize) -> std::ops::Range<usize> {
        let cut = n / 20;
        cut..n - cut
    }

    #[test]
    fn cosine_frequency_and_envelope() {
        let n = 256;
        let x: Vec<f64> = (0..n)
            .map(|i| (2.0 * PI * 10.0 * i as f64 / FS).cos())
            .collect();
        let a = hilbert_analyze(&x, FS);
        for i in interior(n) {
            assert!(
                (a.frequency_hz[i] - 10.0).abs() <= 0.2,
                "{}",
                a.frequency_hz[i]
            );
            assert!((a.amplitude[i] - 1.0).abs() <= 0.02);
            // analytic phase of cos is sin
            assert!((a.imag[i] - (2.0 * PI * 10.0 * i as f64 / FS).sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn non_integer_cycles_interior_is_close() {
        let n = 300;
        let x: Vec<f64> = (0..n)
            .map(|i| (2.0 * PI * 7.3 * i as f64 / FS + 0.4).sin())
            .collect();
        let a = hilbert_analyze(&x, FS);
        let r = interior(n);
        let mid = r.start + 10..r.end - 10;
        let mean_f: f64 = mid.clone().map(|i| a.frequency_hz[i]).sum::<f64>() / mid.len() as f64;
        assert!((mean_f - 7.3).abs() <= 0.146);
    }

    #[test]
    fn zero_signal() {
        let a = hilbert_analyze(&[0.0; 32], FS);
        assert!(a.amplitude.iter().all(|v| *v == 0.0));
        assert!(a.frequency_hz.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn amplitude_identity() {
        let x: Vec<f64> = (0..64).map(|i| ((i * 7 % 13) as f64) - 6.0).collect();
        let a = hilbert_analyze(&x, FS);
        for i in 0..64 {
            assert!(
                (a.amplitude[i] - (a.real[i].powi(2) + a.imag[i].powi(2)).sqrt()).abs() < 1e-12
            );
        }
    }
}
