//! Short-time Fourier transform and periodogram.

use std::cell::RefCell;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::FeatureError;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place forward FFT of `buf`.
pub(crate) fn fft_forward(buf: &mut [Complex64]) {
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    fft.process(buf);
}

/// In-place inverse FFT, unnormalized.
pub(crate) fn fft_inverse(buf: &mut [Complex64]) {
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    fft.process(buf);
}

fn real_spectrum(x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_forward(&mut buf);
    buf.truncate(x.len() / 2 + 1);
    buf
}

/// Weight of one-sided bin `k` when folding the two-sided spectrum.
fn fold_weight(k: usize, n: usize) -> f64 {
    if k == 0 || (n % 2 == 0 && k == n / 2) {
        1.0
    } else {
        2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowFn {
    #[default]
    Hann,
    Rectangular,
}

impl WindowFn {
    /// Periodic window of length `n`.
    pub fn taps(self, n: usize) -> Vec<f64> {
        match self {
            WindowFn::Rectangular => vec![1.0; n],
            WindowFn::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StftConfig {
    pub window_len: usize,
    pub hop: usize,
    pub window: WindowFn,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            window_len: 64,
            hop: 32,
            window: WindowFn::Hann,
        }
    }
}

/// Frames × one-sided frequency bins of |X(m, ω)|.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrogram {
    pub magnitudes: Vec<Vec<f64>>,
    pub window_len: usize,
    pub hop: usize,
    pub freqs_hz: Vec<f64>,
    /// Frame centres in seconds.
    pub times_s: Vec<f64>,
}

impl Spectrogram {
    pub fn frames(&self) -> usize {
        self.magnitudes.len()
    }

    pub fn bins(&self) -> usize {
        self.freqs_hz.len()
    }

    /// Energy of frame `m` recovered from its one-sided spectrum, Σ|X|²/N.
    pub fn frame_energy(&self, m: usize) -> f64 {
        let n = self.window_len;
        self.magnitudes[m]
            .iter()
            .enumerate()
            .map(|(k, v)| fold_weight(k, n) * v * v)
            .sum::<f64>()
            / n as f64
    }
}

pub fn stft(signal: &[f64], cfg: &StftConfig, fs: f64) -> Result<Spectrogram, FeatureError> {
    let n = cfg.window_len;
    if n == 0 || n > signal.len() {
        return Err(FeatureError::WindowTooLong {
            window: n,
            len: signal.len(),
        });
    }
    if cfg.hop == 0 {
        return Err(FeatureError::InvalidConfig("hop must be >= 1".into()));
    }
    let taps = cfg.window.taps(n);
    let frames = 1 + (signal.len() - n) / cfg.hop;
    let mut magnitudes = Vec::with_capacity(frames);
    let mut times_s = Vec::with_capacity(frames);
    let mut windowed = vec![0.0; n];
    for m in 0..frames {
        let start = m * cfg.hop;
        for i in 0..n {
            windowed[i] = signal[start + i] * taps[i];
        }
        magnitudes.push(real_spectrum(&windowed).iter().map(|c| c.norm()).collect());
        times_s.push((start as f64 + n as f64 / 2.0) / fs);
    }
    Ok(Spectrogram {
        magnitudes,
        window_len: n,
        hop: cfg.hop,
        freqs_hz: (0..=n / 2).map(|k| k as f64 * fs / n as f64).collect(),
        times_s,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSpectrum {
    pub freqs_hz: Vec<f64>,
    /// One-sided power density, units²/Hz.
    pub density: Vec<f64>,
}

impl PowerSpectrum {
    pub fn resolution_hz(&self) -> f64 {
        if self.freqs_hz.len() > 1 {
            self.freqs_hz[1] - self.freqs_hz[0]
        } else {
            0.0
        }
    }
}

/// Mean-removed periodogram, so that Σ density·Δf equals the signal variance.
pub fn psd(signal: &[f64], fs: f64) -> Result<PowerSpectrum, FeatureError> {
    let n = signal.len();
    if n == 0 {
        return Err(FeatureError::EmptySignal);
    }
    let mean = signal.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = signal.iter().map(|v| v - mean).collect();
    let spec = real_spectrum(&centred);
    Ok(PowerSpectrum {
        freqs_hz: (0..spec.len()).map(|k| k as f64 * fs / n as f64).collect(),
        density: spec
            .iter()
            .enumerate()
            .map(|(k, c)| fold_weight(k, n) * c.norm_sqr() / (fs * n as f64))
            .collect(),
    })
}
