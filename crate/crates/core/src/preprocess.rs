//! Signal cleaning: zero-phase Butterworth filtering, wavelet denoising,
//! decomposition into the five EEG bands, 1-second epoching and channel selection.

use std::fmt;
use std::str::FromStr;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_io::{EegRecording, Trial};
use crate::features::dwt::{self, Wavelet};

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("invalid band edges [{lo}, {hi}] Hz for sample rate {fs} Hz")]
    InvalidBandEdges { lo: f64, hi: f64, fs: f64 },
    #[error("signal of {len} samples is too short for filter order {order}")]
    SignalTooShort { len: usize, order: usize },
    #[error("{levels} decomposition levels need at least {needed} samples, got {len}")]
    TooManyLevels {
        levels: usize,
        needed: usize,
        len: usize,
    },
    #[error("epoch of {epoch} samples is longer than the {trial}-sample trial")]
    EpochLongerThanTrial { epoch: usize, trial: usize },
    #[error("unknown channel {0}")]
    UnknownChannel(String),
    #[error("bad option `{0}`")]
    BadOption(String),
}

pub type Result<T, E = PreprocessError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BandName {
    Delta,
    Theta,
    Alpha,
    Beta,
    Gamma,
}

impl BandName {
    pub const ALL: [BandName; 5] = [
        BandName::Delta,
        BandName::Theta,
        BandName::Alpha,
        BandName::Beta,
        BandName::Gamma,
    ];
}

impl fmt::Display for BandName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub name: BandName,
    pub lo_hz: f64,
    pub hi_hz: f64,
}

/// Ordered list of frequency bands. The default is the canonical EEG table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BandTable(pub Vec<BandSpec>);

impl Default for BandTable {
    fn default() -> Self {
        let b = |name, lo_hz, hi_hz| BandSpec { name, lo_hz, hi_hz };
        BandTable(vec![
            b(BandName::Delta, 0.3, 4.0),
            b(BandName::Theta, 4.0, 8.0),
            b(BandName::Alpha, 8.0, 12.0),
            b(BandName::Beta, 12.0, 25.0),
            b(BandName::Gamma, 25.0, 45.0),
        ])
    }
}

impl BandTable {
    pub fn get(&self, name: BandName) -> Option<&BandSpec> {
        self.0.iter().find(|b| b.name == name)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &BandSpec> {
        self.0.iter()
    }

    pub fn validate(&self, fs: f64) -> Result<()> {
        for b in &self.0 {
            check_edges(b.lo_hz, b.hi_hz, fs)?;
        }
        Ok(())
    }
}

fn check_edges(lo: f64, hi: f64, fs: f64) -> Result<()> {
    if !(lo >= 0.0 && lo < hi && hi < fs / 2.0 && hi.is_finite()) {
        return Err(PreprocessError::InvalidBandEdges { lo, hi, fs });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        let num = self.b[0] + z_inv * self.b[1] + z2 * self.b[2];
        let den = 1.0 + z_inv * self.a[0] + z2 * self.a[1];
        num / den
    }

    /// Direct-form-II-transposed state after a unit step has settled.
    fn step_state(&self) -> ([f64; 2], f64) {
        let gain = (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1]);
        let z2 = self.b[2] - self.a[1] * gain;
        let z1 = self.b[1] - self.a[0] * gain + z2;
        ([z1, z2], gain)
    }

    fn run(&self, x: &mut [f64], mut state: [f64; 2]) {
        for v in x.iter_mut() {
            let input = *v;
            let y = self.b[0] * input + state[0];
            state[0] = self.b[1] * input - self.a[0] * y + state[1];
            state[1] = self.b[2] * input - self.a[1] * y;
            *v = y;
        }
    }
}

/// Digital Butterworth filter as a cascade of second-order sections.
#[derive(Debug, Clone, PartialEq)]
pub struct Butterworth {
    sections: Vec<Biquad>,
    sample_rate_hz: f64,
}

impl Butterworth {
    /// Band-pass with `order` prototype poles per edge (2·order poles in total).
    /// `lo_hz == 0` degrades to a low-pass at `hi_hz`.
    pub fn bandpass(lo_hz: f64, hi_hz: f64, order: usize, fs: f64) -> Result<Self> {
        check_edges(lo_hz, hi_hz, fs)?;
        if order == 0 {
            return Err(PreprocessError::BadOption(
                "filter order must be >= 1".into(),
            ));
        }
        if lo_hz == 0.0 {
            return Ok(Self::lowpass(hi_hz, order, fs));
        }
        let fs2 = 2.0 * fs;
        let w1 = fs2 * (std::f64::consts::PI * lo_hz / fs).tan();
        let w2 = fs2 * (std::f64::consts::PI * hi_hz / fs).tan();
        let bw = w2 - w1;
        let wo = (w1 * w2).sqrt();

        let mut poles = Vec::with_capacity(2 * order);
        for p in prototype_poles(order) {
            let p_lp = p * (bw / 2.0);
            let root = (p_lp * p_lp - wo * wo).sqrt();
            for s in [p_lp + root, p_lp - root] {
                poles.push((fs2 + s) / (fs2 - s));
            }
        }
        let mut sections: Vec<Biquad> = pair_poles(&poles)
            .into_iter()
            .map(|a| Biquad {
                b: [1.0, 0.0, -1.0],
                a,
            })
            .collect();
        let w0 = 2.0 * (wo / fs2).atan();
        normalize_gain(&mut sections, w0);
        Ok(Self {
            sections,
            sample_rate_hz: fs,
        })
    }

    fn lowpass(hi_hz: f64, order: usize, fs: f64) -> Self {
        let fs2 = 2.0 * fs;
        let wc = fs2 * (std::f64::consts::PI * hi_hz / fs).tan();
        let poles: Vec<Complex64> = prototype_poles(order)
            .into_iter()
            .map(|p| {
                let s = p * wc;
                (fs2 + s) / (fs2 - s)
            })
            .collect();
        let mut sections: Vec<Biquad> = pair_poles(&poles)
            .into_iter()
            .map(|a| {
                if a[1] == 0.0 {
                    Biquad {
                        b: [1.0, 1.0, 0.0],
                        a,
                    }
                } else {
                    Biquad {
                        b: [1.0, 2.0, 1.0],
                        a,
                    }
                }
            })
            .collect();
        normalize_gain(&mut sections, 0.0);
        Self {
            sections,
            sample_rate_hz: fs,
        }
    }

    pub fn sections(&self) -> usize {
        self.sections.len()
    }

    /// Complex response of a single forward pass at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let w = 2.0 * std::f64::consts::PI * freq_hz / self.sample_rate_hz;
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    /// Magnitude of the forward-backward (zero-phase) response, i.e. |H|².
    pub fn zero_phase_gain(&self, freq_hz: f64) -> f64 {
        self.response(freq_hz).norm_sqr()
    }

    fn padlen(&self) -> usize {
        3 * (2 * self.sections.len() + 1)
    }

    /// Single causal pass with zero initial state.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for s in &self.sections {
            s.run(&mut y, [0.0; 2]);
        }
        y
    }

    /// Forward-backward application with odd-reflection padding and
    /// steady-state initial conditions, giving a zero-phase output.
    pub fn filtfilt(&self, x: &[f64]) -> Result<Vec<f64>> {
        let order = self.sections.len() * 2;
        if x.len() <= order.max(1) {
            return Err(PreprocessError::SignalTooShort {
                len: x.len(),
                order,
            });
        }
        let n = x.len();
        let pad = self.padlen().min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        for i in (1..=pad).rev() {
            ext.push(2.0 * x[0] - x[i]);
        }
        ext.extend_from_slice(x);
        for i in 1..=pad {
            ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
        }

        self.run_with_steady_state(&mut ext);
        ext.reverse();
        self.run_with_steady_state(&mut ext);
        ext.reverse();
        Ok(ext[pad..pad + n].to_vec())
    }

    fn run_with_steady_state(&self, x: &mut [f64]) {
        let mut level = x[0];
        for s in &self.sections {
            let (zi, gain) = s.step_state();
            s.run(x, [zi[0] * level, zi[1] * level]);
            level *= gain;
        }
    }
}

fn prototype_poles(order: usize) -> Vec<Complex64> {
    let n = order as f64;
    (0..order)
        .map(|k| {
            let m = -(n - 1.0) + 2.0 * k as f64;
            -Complex64::from_polar(1.0, std::f64::consts::PI * m / (2.0 * n))
        })
        .collect()
}

/// Groups z-plane poles into real-coefficient denominators `[a1, a2]`.
fn pair_poles(poles: &[Complex64]) -> Vec<[f64; 2]> {
    const IM_TOL: f64 = 1e-12;
    let mut out = Vec::new();
    let mut reals: Vec<f64> = Vec::new();
    for p in poles {
        if p.im > IM_TOL {
            out.push([-2.0 * p.re, p.norm_sqr()]);
        } else if p.im.abs() <= IM_TOL {
            reals.push(p.re);
        }
    }
    reals.sort_by(|a, b| a.total_cmp(b));
    for pair in reals.chunks(2) {
        match pair {
            [p1, p2] => out.push([-(p1 + p2), p1 * p2]),
            [p] => out.push([-p, 0.0]),
            _ => unreachable!(),
        }
    }
    out
}

fn normalize_gain(sections: &mut [Biquad], w0: f64) {
    let z_inv = Complex64::from_polar(1.0, -w0);
    let mag = sections
        .iter()
        .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
        .norm();
    let per = mag.powf(-1.0 / sections.len() as f64);
    for s in sections {
        s.b.iter_mut().for_each(|b| *b *= per);
    }
}

/// Zero-phase Butterworth band-pass of a single channel.
pub fn bandpass_filter(
    signal: &[f64],
    lo_hz: f64,
    hi_hz: f64,
    order: usize,
    fs: f64,
) -> Result<Vec<f64>> {
    Butterworth::bandpass(lo_hz, hi_hz, order, fs)?.filtfilt(signal)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdKind {
    Soft,
    Hard,
}

/// Universal threshold `factor · σ · √(2 ln N)` with σ estimated from the finest details.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    pub kind: ThresholdKind,
    pub factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenoiseConfig {
    pub wavelet: Wavelet,
    pub levels: usize,
    pub rule: ThresholdRule,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        Self {
            wavelet: Wavelet::Db4,
            levels: 4,
            rule: ThresholdRule {
                kind: ThresholdKind::Soft,
                factor: 1.0,
            },
        }
    }
}

impl FromStr for DenoiseConfig {
    type Err = PreprocessError;

    /// Parses `wavelet:levels:rule`, e.g. `db4:4:soft`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || PreprocessError::BadOption(s.to_string());
        let parts: Vec<&str> = s.split(':').collect();
        let [w, l, r] = parts.as_slice() else {
            return Err(bad());
        };
        let wavelet = w.parse().map_err(|_| bad())?;
        let levels = l.parse().map_err(|_| bad())?;
        let kind = match *r {
            "soft" => ThresholdKind::Soft,
            "hard" => ThresholdKind::Hard,
            _ => return Err(bad()),
        };
        Ok(Self {
            wavelet,
            levels,
            rule: ThresholdRule { kind, factor: 1.0 },
        })
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub fn wavelet_denoise(signal: &[f64], cfg: &DenoiseConfig) -> Result<Vec<f64>> {
    let needed = 1usize << cfg.levels.min(63);
    if cfg.levels == 0 || signal.len() < needed {
        return Err(PreprocessError::TooManyLevels {
            levels: cfg.levels,
            needed,
            len: signal.len(),
        });
    }
    let mut coeffs =
        dwt::dwt(signal, cfg.wavelet, cfg.levels).map_err(|_| PreprocessError::TooManyLevels {
            levels: cfg.levels,
            needed,
            len: signal.len(),
        })?;
    let sigma = median(coeffs.details[0].iter().map(|d| d.abs()).collect()) / 0.6745;
    let thr = cfg.rule.factor * sigma * (2.0 * (signal.len() as f64).ln()).sqrt();
    if thr > 0.0 {
        for level in coeffs.details.iter_mut() {
            for d in level.iter_mut() {
                *d = match cfg.rule.kind {
                    ThresholdKind::Soft => d.signum() * (d.abs() - thr).max(0.0),
                    ThresholdKind::Hard => {
                        if d.abs() > thr {
                            *d
                        } else {
                            0.0
                        }
                    }
                };
            }
        }
    }
    Ok(dwt::idwt(&coeffs).expect("coefficients come from dwt"))
}

/// One band-limited component per entry of the band table, in table order.
#[derive(Debug, Clone, PartialEq)]
pub struct BandSet {
    pub components: Vec<(BandName, Vec<f64>)>,
}

impl BandSet {
    pub fn get(&self, name: BandName) -> Option<&[f64]> {
        self.components
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| v.as_slice())
    }
}

pub fn decompose_bands(
    signal: &[f64],
    table: &BandTable,
    order: usize,
    fs: f64,
) -> Result<BandSet> {
    table.validate(fs)?;
    let components = table
        .iter()
        .map(|b| {
            Ok((
                b.name,
                bandpass_filter(signal, b.lo_hz, b.hi_hz, order, fs)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BandSet { components })
}

/// A fixed-length multi-channel window cut from a trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    pub samples: Vec<Vec<f64>>,
    pub trial_index: usize,
    pub window_index: usize,
}

impl Epoch {
    pub fn len(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Non-overlapping consecutive epochs; a trailing partial window is dropped.
pub fn window_epochs(trial: &Trial, epoch_seconds: f64, fs: f64) -> Result<Vec<Epoch>> {
    let epoch = (epoch_seconds * fs).round();
    if !(epoch >= 1.0) {
        return Err(PreprocessError::BadOption(format!(
            "epoch length {epoch_seconds} s"
        )));
    }
    let epoch = epoch as usize;
    let n = trial.len();
    if epoch > n {
        return Err(PreprocessError::EpochLongerThanTrial { epoch, trial: n });
    }
    Ok((0..n / epoch)
        .map(|w| Epoch {
            samples: trial
                .samples
                .iter()
                .map(|c| c[w * epoch..(w + 1) * epoch].to_vec())
                .collect(),
            trial_index: trial.food_index,
            window_index: w,
        })
        .collect())
}

/// Frontal electrodes of the 14-channel headset.
pub const FRONTAL_CHANNELS: [&str; 8] = ["AF3", "AF4", "F3", "F4", "F7", "F8", "FC5", "FC6"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelMode {
    #[default]
    All,
    Frontal,
}

impl FromStr for ChannelMode {
    type Err = PreprocessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(ChannelMode::All),
            "frontal" => Ok(ChannelMode::Frontal),
            _ => Err(PreprocessError::BadOption(s.to_string())),
        }
    }
}

pub fn select_channels(rec: &EegRecording, mode: ChannelMode) -> Result<EegRecording> {
    match mode {
        ChannelMode::All => Ok(rec.clone()),
        ChannelMode::Frontal => {
            let mut keep = FRONTAL_CHANNELS
                .iter()
                .map(|name| {
                    rec.layout()
                        .index_of(name)
                        .ok_or_else(|| PreprocessError::UnknownChannel(name.to_string()))
                })
                .collect::<Result<Vec<_>>>()?;
            keep.sort_unstable();
            Ok(rec.restricted(&keep))
        }
    }
}

/// Cleaning applied to every channel before segmentation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub band_lo_hz: f64,
    pub band_hi_hz: f64,
    pub filter_order: usize,
    pub denoise: Option<DenoiseConfig>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            band_lo_hz: 0.5,
            band_hi_hz: 30.0,
            filter_order: 4,
            denoise: Some(DenoiseConfig::default()),
        }
    }
}

impl PreprocessConfig {
    /// Keeps the whole gamma band: [0.3, 45] Hz.
    pub fn wideband() -> Self {
        Self {
            band_lo_hz: 0.3,
            band_hi_hz: 45.0,
            ..Self::default()
        }
    }
}

pub fn preprocess_recording(rec: &EegRecording, cfg: &PreprocessConfig) -> Result<EegRecording> {
    let filt = Butterworth::bandpass(
        cfg.band_lo_hz,
        cfg.band_hi_hz,
        cfg.filter_order,
        rec.sample_rate_hz(),
    )?;
    rec.map_channels(|ch| {
        let y = filt.filtfilt(ch)?;
        match &cfg.denoise {
            Some(d) => wavelet_denoise(&y, d),
            None => Ok(y),
        }
    })
}

/// Parses `lo:hi` band edges.
pub fn parse_band(s: &str) -> Result<(f64, f64)> {
    let bad = || PreprocessError::BadOption(s.to_string());
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if !(lo >= 0.0 && lo < hi) {
        return Err(bad());
    }
    Ok((lo, hi))
}
