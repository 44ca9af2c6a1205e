//! Binary classification metrics: confusion matrix, accuracy, F1, AUC.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_io::Target;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("predicted and actual label sequences differ in length ({predicted} vs {actual})")]
    LengthMismatch { predicted: usize, actual: usize },
    #[error("no labels to score")]
    EmptyInput,
    #[error("F1 is undefined without predicted and actual positives")]
    UndefinedF1,
    #[error("AUC needs both classes present")]
    SingleClass,
    #[error("label {0} is not binary")]
    NonBinaryLabel(u8),
}

pub type Result<T, E = MetricsError> = std::result::Result<T, E>;

/// Counts relative to `positive_class`; labels are 0 (first-listed class) or 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
    pub positive_class: u8,
}

impl ConfusionMatrix {
    pub fn n(&self) -> u64 {
        self.tp + self.fn_ + self.fp + self.tn
    }

    /// From a 2×2 table indexed `[actual][predicted]` with class 0 first.
    pub fn from_table(table: [[u64; 2]; 2], positive_class: u8) -> Self {
        let (p, q) = if positive_class == 0 { (0, 1) } else { (1, 0) };
        Self {
            tp: table[p][p],
            fn_: table[p][q],
            fp: table[q][p],
            tn: table[q][q],
            positive_class,
        }
    }

    /// Counts scaled by `k`.
    pub fn scaled(&self, k: u64) -> Self {
        Self {
            tp: self.tp * k,
            fn_: self.fn_ * k,
            fp: self.fp * k,
            tn: self.tn * k,
            positive_class: self.positive_class,
        }
    }
}

pub fn confusion(predicted: &[u8], actual: &[u8], positive_class: u8) -> Result<ConfusionMatrix> {
    if predicted.len() != actual.len() {
        return Err(MetricsError::LengthMismatch {
            predicted: predicted.len(),
            actual: actual.len(),
        });
    }
    if predicted.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut table = [[0u64; 2]; 2];
    for (&p, &a) in predicted.iter().zip(actual) {
        if p > 1 {
            return Err(MetricsError::NonBinaryLabel(p));
        }
        if a > 1 {
            return Err(MetricsError::NonBinaryLabel(a));
        }
        table[a as usize][p as usize] += 1;
    }
    Ok(ConfusionMatrix::from_table(table, positive_class))
}

pub fn accuracy(cm: &ConfusionMatrix) -> f64 {
    (cm.tp + cm.tn) as f64 / cm.n() as f64
}

pub fn misclassification(cm: &ConfusionMatrix) -> f64 {
    (cm.fp + cm.fn_) as f64 / cm.n() as f64
}

/// Harmonic mean of precision and recall, 2tp / (2tp + fp + fn).
pub fn f1(cm: &ConfusionMatrix) -> Result<f64> {
    if cm.tp + cm.fp == 0 || cm.tp + cm.fn_ == 0 {
        return Err(MetricsError::UndefinedF1);
    }
    Ok(2.0 * cm.tp as f64 / (2 * cm.tp + cm.fp + cm.fn_) as f64)
}

/// Mann-Whitney AUC: probability that a random label-1 row outscores a random
/// label-0 row, ties counted one half.
pub fn auc(scores: &[f64], actual: &[u8]) -> Result<f64> {
    if scores.len() != actual.len() {
        return Err(MetricsError::LengthMismatch {
            predicted: scores.len(),
            actual: actual.len(),
        });
    }
    let pos = actual.iter().filter(|&&a| a == 1).count();
    let neg = actual.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(MetricsError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // midranks (1-based) over tie groups
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum_pos += mid * order[i..=j].iter().filter(|&&k| actual[k] == 1).count() as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC curve with one point per distinct threshold, from (0,0) to (1,1).
pub fn roc_curve(scores: &[f64], actual: &[u8]) -> Result<Vec<RocPoint>> {
    if scores.len() != actual.len() {
        return Err(MetricsError::LengthMismatch {
            predicted: scores.len(),
            actual: actual.len(),
        });
    }
    let pos = actual.iter().filter(|&&a| a == 1).count() as f64;
    let neg = actual.len() as f64 - pos;
    if pos == 0.0 || neg == 0.0 {
        return Err(MetricsError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if actual[order[i]] == 1 {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp / neg,
            tpr: tp / pos,
        });
    }
    Ok(points)
}

/// Trapezoidal area under a ROC curve.
pub fn roc_area(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub misclassification: f64,
    /// `None` when no positives are predicted or present.
    pub f1: Option<f64>,
    /// `None` when the actual labels contain a single class.
    pub auc: Option<f64>,
    pub confusion: ConfusionMatrix,
}

impl MetricsReport {
    pub fn from_predictions(
        predicted: &[u8],
        scores: &[f64],
        actual: &[u8],
        positive_class: u8,
    ) -> Result<Self> {
        let cm = confusion(predicted, actual, positive_class)?;
        let auc = match auc(scores, actual) {
            Ok(v) => Some(v),
            Err(MetricsError::SingleClass) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            accuracy: accuracy(&cm),
            misclassification: misclassification(&cm),
            f1: f1(&cm).ok(),
            auc,
            confusion: cm,
        })
    }
}

/// A published confusion table with its printed F1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceTable {
    pub name: &'static str,
    pub target: Target,
    /// `[actual][predicted]`, first-listed class first.
    pub table: [[u64; 2]; 2],
    pub printed_f1: f64,
}

const fn fx(
    name: &'static str,
    target: Target,
    a: u64,
    b: u64,
    c: u64,
    d: u64,
    printed_f1: f64,
) -> ReferenceTable {
    ReferenceTable {
        name,
        target,
        table: [[a, b], [c, d]],
        printed_f1,
    }
}

/// The published voting-classifier and hierarchical-ensemble confusion tables.
pub const REFERENCE_TABLES: [ReferenceTable; 24] = [
    fx("voting/all/like/dwt", Target::Like, 214, 13, 47, 165, 0.877),
    fx(
        "voting/all/like/stft",
        Target::Like,
        112,
        115,
        113,
        99,
        0.4955,
    ),
    fx(
        "voting/all/like/hht",
        Target::Like,
        213,
        14,
        57,
        155,
        0.8571,
    ),
    fx(
        "voting/all/excitement/dwt",
        Target::Excitement,
        150,
        39,
        76,
        120,
        0.7228,
    ),
    fx(
        "voting/all/excitement/stft",
        Target::Excitement,
        117,
        72,
        110,
        86,
        0.5625,
    ),
    fx(
        "voting/all/excitement/hht",
        Target::Excitement,
        155,
        34,
        68,
        128,
        0.7524,
    ),
    fx(
        "voting/all/feelings/dwt",
        Target::Feelings,
        198,
        28,
        40,
        182,
        0.8425,
    ),
    fx(
        "voting/all/feelings/stft",
        Target::Feelings,
        115,
        111,
        141,
        81,
        0.3913,
    ),
    fx(
        "voting/all/feelings/hht",
        Target::Feelings,
        206,
        20,
        73,
        149,
        0.7621,
    ),
    fx(
        "voting/frontal/like/dwt",
        Target::Like,
        236,
        22,
        91,
        165,
        0.8068,
    ),
    fx(
        "voting/frontal/like/stft",
        Target::Like,
        188,
        70,
        183,
        73,
        0.5977,
    ),
    fx(
        "voting/frontal/like/hht",
        Target::Like,
        233,
        25,
        91,
        165,
        0.80,
    ),
    fx(
        "voting/frontal/excitement/dwt",
        Target::Excitement,
        152,
        68,
        171,
        57,
        0.7355,
    ),
    fx(
        "voting/frontal/excitement/stft",
        Target::Excitement,
        152,
        68,
        171,
        57,
        0.5598,
    ),
    fx(
        "voting/frontal/excitement/hht",
        Target::Excitement,
        188,
        32,
        114,
        114,
        0.7203,
    ),
    fx(
        "voting/frontal/feelings/dwt",
        Target::Feelings,
        250,
        12,
        80,
        191,
        0.8059,
    ),
    fx(
        "voting/frontal/feelings/stft",
        Target::Feelings,
        211,
        51,
        204,
        67,
        0.3444,
    ),
    fx(
        "voting/frontal/feelings/hht",
        Target::Feelings,
        236,
        26,
        55,
        216,
        0.8421,
    ),
    fx(
        "hierarchical/all/like",
        Target::Like,
        212,
        15,
        55,
        157,
        0.8582,
    ),
    fx(
        "hierarchical/frontal/like",
        Target::Like,
        237,
        21,
        108,
        148,
        0.7860,
    ),
    fx(
        "hierarchical/all/excitement",
        Target::Excitement,
        153,
        36,
        79,
        117,
        0.7268,
    ),
    fx(
        "hierarchical/frontal/excitement",
        Target::Excitement,
        192,
        28,
        130,
        98,
        0.7084,
    ),
    fx(
        "hierarchical/all/feelings",
        Target::Feelings,
        212,
        15,
        55,
        157,
        0.8582,
    ),
    fx(
        "hierarchical/frontal/feelings",
        Target::Feelings,
        248,
        14,
        83,
        188,
        0.7949,
    ),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixtureOutcome {
    pub name: &'static str,
    pub printed_f1: f64,
    pub computed_f1: f64,
    pub accuracy: f64,
    pub within_tolerance: bool,
}

/// A score printed with two decimals ("0.80") is only known to half a hundredth.
fn printed_resolution(x: f64) -> f64 {
    if ((x * 100.0).round() - x * 100.0).abs() < 1e-9 {
        5e-3
    } else {
        0.0
    }
}

/// Recomputes F1 for every published table with the given positive class.
/// `tolerance` widens to the printed precision for values shown with two decimals.
pub fn run_fixtures(positive_class: u8, tolerance: f64) -> Vec<FixtureOutcome> {
    REFERENCE_TABLES
        .iter()
        .map(|f| {
            let cm = ConfusionMatrix::from_table(f.table, positive_class);
            let computed = f1(&cm).unwrap_or(f64::NAN);
            FixtureOutcome {
                name: f.name,
                printed_f1: f.printed_f1,
                computed_f1: computed,
                accuracy: accuracy(&cm),
                within_tolerance: (computed - f.printed_f1).abs()
                    <= tolerance.max(printed_resolution(f.printed_f1)),
            }
        })
        .collect()
}
