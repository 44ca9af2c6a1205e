//! Time-frequency transforms and fixed-length feature vectors.

pub mod dwt;
pub mod emd;
pub mod hilbert;
pub mod spectral;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preprocess::BandTable;

pub use dwt::{dwt, idwt, Wavelet, WaveletCoefficients};
pub use emd::{emd, EmdConfig, ImfSet};
pub use hilbert::{hilbert_analyze, AnalyticSignal};
pub use spectral::{psd, stft, PowerSpectrum, Spectrogram, StftConfig, WindowFn};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("{levels} decomposition levels need at least 2^{levels} samples, got {len}")]
    TooManyLevels { levels: usize, len: usize },
    #[error("inconsistent wavelet coefficient structure: {0}")]
    InconsistentStructure(String),
    #[error("window of {window} samples does not fit a signal of {len}")]
    WindowTooLong { window: usize, len: usize },
    #[error("invalid feature configuration: {0}")]
    InvalidConfig(String),
    #[error("empty signal")]
    EmptySignal,
    #[error("expected {expected} channels, got {found}")]
    MissingChannel { expected: usize, found: usize },
    #[error("non-finite feature at position {index}")]
    NonFiniteFeature { index: usize },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = FeatureError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMethod {
    Stft,
    Dwt,
    Hht,
}

impl FeatureMethod {
    pub const ALL: [FeatureMethod; 3] =
        [FeatureMethod::Stft, FeatureMethod::Dwt, FeatureMethod::Hht];

    pub fn label(self) -> &'static str {
        match self {
            FeatureMethod::Stft => "STFT",
            FeatureMethod::Dwt => "DWT",
            FeatureMethod::Hht => "HHT",
        }
    }
}

impl fmt::Display for FeatureMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for FeatureMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "stft" => Ok(FeatureMethod::Stft),
            "dwt" => Ok(FeatureMethod::Dwt),
            "hht" => Ok(FeatureMethod::Hht),
            other => Err(format!("unknown feature method `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    MeanPower,
    Std,
    Energy,
    Peak,
}

impl Statistic {
    pub const ALL: [Statistic; 4] = [
        Statistic::MeanPower,
        Statistic::Std,
        Statistic::Energy,
        Statistic::Peak,
    ];

    /// Statistic of a group's values; an empty group yields 0.
    pub fn apply(self, v: &[f64]) -> f64 {
        if v.is_empty() {
            return 0.0;
        }
        let n = v.len() as f64;
        match self {
            Statistic::MeanPower => v.iter().map(|x| x * x).sum::<f64>() / n,
            Statistic::Energy => v.iter().map(|x| x * x).sum(),
            Statistic::Std => {
                let mean = v.iter().sum::<f64>() / n;
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
            }
            Statistic::Peak => v.iter().fold(0.0f64, |m, x| m.max(x.abs())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub stft: StftConfig,
    pub wavelet: Wavelet,
    pub dwt_levels: usize,
    pub emd: EmdConfig,
    pub hht_imfs: usize,
    pub bands: BandTable,
    pub stats: Vec<Statistic>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            stft: StftConfig::default(),
            wavelet: Wavelet::Db4,
            dwt_levels: 5,
            emd: EmdConfig::default(),
            hht_imfs: 4,
            bands: BandTable::default(),
            stats: Statistic::ALL.to_vec(),
        }
    }
}

impl FeatureConfig {
    /// Number of value groups per channel for `method`.
    pub fn groups(&self, method: FeatureMethod) -> usize {
        match method {
            FeatureMethod::Stft => self.bands.len(),
            FeatureMethod::Dwt => self.dwt_levels,
            FeatureMethod::Hht => self.hht_imfs,
        }
    }

    pub fn dimension(&self, method: FeatureMethod, channels: usize) -> usize {
        channels * self.groups(method) * self.stats.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub method: FeatureMethod,
    pub channels: usize,
    pub groups: usize,
    pub stats: usize,
    /// Channel-major, then group, then statistic.
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// The value groups of one channel: band magnitudes (STFT), detail levels
/// D1..DL (DWT), or instantaneous amplitudes of the first K IMFs (HHT).
pub fn channel_groups(
    x: &[f64],
    method: FeatureMethod,
    cfg: &FeatureConfig,
    fs: f64,
) -> Result<Vec<Vec<f64>>> {
    match method {
        FeatureMethod::Stft => {
            let spec = stft(x, &cfg.stft, fs)?;
            let last = cfg.bands.len().saturating_sub(1);
            Ok(cfg
                .bands
                .iter()
                .enumerate()
                .map(|(b, band)| {
                    let bins: Vec<usize> = spec
                        .freqs_hz
                        .iter()
                        .enumerate()
                        .filter(|(_, f)| {
                            **f >= band.lo_hz
                                && (**f < band.hi_hz || (b == last && **f <= band.hi_hz))
                        })
                        .map(|(k, _)| k)
                        .collect();
                    spec.magnitudes
                        .iter()
                        .flat_map(|frame| bins.iter().map(move |&k| frame[k]))
                        .collect()
                })
                .collect())
        }
        FeatureMethod::Dwt => Ok(dwt(x, cfg.wavelet, cfg.dwt_levels)?.details),
        FeatureMethod::Hht => {
            let set = emd(x, &cfg.emd);
            Ok((0..cfg.hht_imfs)
                .map(|i| match set.imfs.get(i) {
                    Some(imf) => hilbert_analyze(imf, fs).amplitude,
                    None => Vec::new(),
                })
                .collect())
        }
    }
}

/// Flattens per-channel groups into a feature vector.
pub fn assemble_features(
    per_channel: &[Vec<Vec<f64>>],
    method: FeatureMethod,
    expected_channels: usize,
    expected_groups: usize,
    stats: &[Statistic],
) -> Result<FeatureVector> {
    if per_channel.len() != expected_channels {
        return Err(FeatureError::MissingChannel {
            expected: expected_channels,
            found: per_channel.len(),
        });
    }
    if let Some(bad) = per_channel.iter().find(|g| g.len() != expected_groups) {
        return Err(FeatureError::InvalidConfig(format!(
            "channel has {} groups, expected {expected_groups}",
            bad.len()
        )));
    }
    let mut values = Vec::with_capacity(expected_channels * expected_groups * stats.len());
    for groups in per_channel {
        for g in groups {
            for s in stats {
                values.push(s.apply(g));
            }
        }
    }
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(FeatureError::NonFiniteFeature { index });
    }
    Ok(FeatureVector {
        method,
        channels: expected_channels,
        groups: expected_groups,
        stats: stats.len(),
        values,
    })
}

/// Feature vector of one multi-channel epoch.
pub fn extract_features(
    channels: &[Vec<f64>],
    method: FeatureMethod,
    cfg: &FeatureConfig,
    fs: f64,
) -> Result<FeatureVector> {
    let per_channel = channels
        .iter()
        .map(|x| channel_groups(x, method, cfg, fs))
        .collect::<Result<Vec<_>>>()?;
    assemble_features(
        &per_channel,
        method,
        channels.len(),
        cfg.groups(method),
        &cfg.stats,
    )
}

/// Writes `time_s,freq_hz,magnitude` rows, one per frame and bin.
pub fn write_spectrogram_csv<W: Write>(spec: &Spectrogram, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time_s", "freq_hz", "magnitude"])?;
    for (t, frame) in spec.times_s.iter().zip(&spec.magnitudes) {
        for (f, m) in spec.freqs_hz.iter().zip(frame) {
            w.write_record([t.to_string(), f.to_string(), m.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(seed: u64, ch: usize, n: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..ch)
            .map(|_| (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect())
            .collect()
    }

    #[test]
    fn dimensions() {
        let cfg = FeatureConfig::default();
        let x = noise(1, 14, 128);
        for m in FeatureMethod::ALL {
            let v = extract_features(&x, m, &cfg, 128.0).unwrap();
            assert_eq!(v.len(), cfg.dimension(m, 14));
            assert!(v.values.iter().all(|f| f.is_finite()));
        }
        assert_eq!(
            extract_features(&x, FeatureMethod::Stft, &cfg, 128.0)
                .unwrap()
                .len(),
            280
        );
        assert_eq!(
            extract_features(&x, FeatureMethod::Hht, &cfg, 128.0)
                .unwrap()
                .len(),
            14 * 4 * 4
        );
        let v = extract_features(&x[..8], FeatureMethod::Dwt, &cfg, 128.0).unwrap();
        assert_eq!(v.len(), 160);
    }

    #[test]
    fn zero_epoch_zero_vector() {
        let cfg = FeatureConfig::default();
        for m in FeatureMethod::ALL {
            let v = extract_features(&vec![vec![0.0; 128]; 14], m, &cfg, 128.0).unwrap();
            assert_eq!(v.len(), cfg.dimension(m, 14));
            assert!(v.values.iter().all(|f| *f == 0.0));
        }
    }

    #[test]
    fn pure_and_ordered() {
        let cfg = FeatureConfig::default();
        let x = noise(2, 3, 128);
        for m in FeatureMethod::ALL {
            let a = extract_features(&x, m, &cfg, 128.0).unwrap();
            let b = extract_features(&x, m, &cfg, 128.0).unwrap();
            assert_eq!(a.values, b.values);
            // channel-major: the first block only depends on channel 0
            let single = extract_features(&x[..1], m, &cfg, 128.0).unwrap();
            assert_eq!(&a.values[..single.len()], &single.values[..]);
        }
    }

    #[test]
    fn stats_by_hand() {
        let g = [3.0, -4.0];
        assert_eq!(Statistic::MeanPower.apply(&g), 12.5);
        assert_eq!(Statistic::Energy.apply(&g), 25.0);
        assert_eq!(Statistic::Std.apply(&g), 3.5);
        assert_eq!(Statistic::Peak.apply(&g), 4.0);
    }

    #[test]
    fn assembly_errors() {
        let groups = vec![vec![vec![1.0]; 5]; 13];
        assert!(matches!(
            assemble_features(&groups, FeatureMethod::Stft, 14, 5, &Statistic::ALL),
            Err(FeatureError::MissingChannel {
                expected: 14,
                found: 13
            })
        ));
        let bad = vec![vec![vec![f64::NAN]; 5]; 1];
        assert!(matches!(
            assemble_features(&bad, FeatureMethod::Stft, 1, 5, &Statistic::ALL),
            Err(FeatureError::NonFiniteFeature { index: 0 })
        ));
    }

    #[test]
    fn spectrogram_csv_rows() {
        let spec = stft(&[1.0; 128], &StftConfig::default(), 128.0).unwrap();
        let mut buf = Vec::new();
        write_spectrogram_csv(&spec, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 3 * 33);
        assert!(text.starts_with("time_s,freq_hz,magnitude\n0.25,0,"));
    }
}
