//! Classifier families, per-method majority voting and hierarchical ensembling.

pub mod adaboost;
pub mod dataset;
pub mod ensemble;
pub mod forest;
pub mod gboost;
pub mod svm;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureMethod;
use crate::metrics::MetricsError;

pub use adaboost::{AdaBoost, AdaBoostParams};
pub use dataset::{
    stratified_split, subject_split, train_test_split, LabeledDataset, RowId, Split,
};
pub use ensemble::{
    ensemble_predictions, evaluate_ensemble, hierarchical_predict, load_bundle, majority_vote,
    save_bundle, train_ensemble, EnsemblePrediction, MethodModels, ModelBundle, TieRule,
    TrainedEnsemble, Verdict,
};
pub use forest::{ForestParams, RandomForest};
pub use gboost::{GBoostParams, GradientBoost};
pub use svm::{Svm, SvmParams};

#[derive(Debug, Error, PartialEq)]
pub enum LearnError {
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("expected feature dimension {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("train fraction {0} is not in (0, 1)")]
    InvalidFraction(f64),
    #[error("class {0} has no training rows")]
    EmptyClass(u8),
    #[error("no feature vector for method {0}")]
    MissingMethod(FeatureMethod),
    #[error("misaligned rows: {0}")]
    MisalignedRows(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("model bundle version {found} is not supported (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },
    #[error("model bundle: {0}")]
    Serialization(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T, E = LearnError> = std::result::Result<T, E>;

pub(crate) fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierKind {
    Forest,
    MaxMargin,
    AdaptiveBoost,
    GradientBoost,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 4] = [
        ClassifierKind::Forest,
        ClassifierKind::MaxMargin,
        ClassifierKind::AdaptiveBoost,
        ClassifierKind::GradientBoost,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Forest => "forest",
            ClassifierKind::MaxMargin => "max-margin",
            ClassifierKind::AdaptiveBoost => "adaptive-boost",
            ClassifierKind::GradientBoost => "gradient-boost",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown classifier `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub forest: ForestParams,
    pub max_margin: SvmParams,
    pub adaptive_boost: AdaBoostParams,
    pub gradient_boost: GBoostParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelBody {
    Constant { label: u8 },
    Forest(RandomForest),
    MaxMargin(Svm),
    AdaptiveBoost(AdaBoost),
    GradientBoost(GradientBoost),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub kind: ClassifierKind,
    pub dimension: usize,
    pub seed: u64,
    /// Trained on a single class; predicts that class everywhere.
    pub degenerate: bool,
    pub body: ModelBody,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: u8,
    /// Class-1 affinity in [0, 1]; `label == 1` iff `score >= 0.5`.
    pub score: f64,
}

impl ClassifierModel {
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        if x.len() != self.dimension {
            return Err(LearnError::DimensionMismatch {
                expected: self.dimension,
                found: x.len(),
            });
        }
        let score = match &self.body {
            ModelBody::Constant { label } => *label as f64,
            ModelBody::Forest(m) => m.score(x),
            ModelBody::MaxMargin(m) => m.score(x),
            ModelBody::AdaptiveBoost(m) => m.score(x),
            ModelBody::GradientBoost(m) => m.score(x),
        }
        .clamp(0.0, 1.0);
        Ok(Prediction {
            label: (score >= 0.5) as u8,
            score,
        })
    }
}

pub fn predict(model: &ClassifierModel, x: &[f64]) -> Result<Prediction> {
    model.predict(x)
}

fn validate_rows(x: &[Vec<f64>], y: &[u8]) -> Result<usize> {
    if x.is_empty() {
        return Err(LearnError::InvalidDataset("empty training set".into()));
    }
    if x.len() != y.len() {
        return Err(LearnError::InvalidDataset(format!(
            "{} rows but {} labels",
            x.len(),
            y.len()
        )));
    }
    let d = x[0].len();
    if d == 0 {
        return Err(LearnError::InvalidDataset(
            "zero-dimensional features".into(),
        ));
    }
    if let Some(r) = x.iter().find(|r| r.len() != d) {
        return Err(LearnError::DimensionMismatch {
            expected: d,
            found: r.len(),
        });
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(LearnError::InvalidDataset(
            "non-finite feature value".into(),
        ));
    }
    if let Some(&l) = y.iter().find(|&&l| l > 1) {
        return Err(LearnError::InvalidDataset(format!(
            "label {l} is not binary"
        )));
    }
    Ok(d)
}

/// Rows in canonical order, shared by all kinds trained on the same data.
pub(crate) struct CanonicalRows {
    x: Vec<Vec<f64>>,
    y: Vec<u8>,
    dimension: usize,
}

impl CanonicalRows {
    pub(crate) fn new(x: &[Vec<f64>], y: &[u8]) -> Result<Self> {
        let dimension = validate_rows(x, y)?;
        let order = dataset::canonical_order(x, y);
        Ok(Self {
            x: order.iter().map(|&i| x[i].clone()).collect(),
            y: order.iter().map(|&i| y[i]).collect(),
            dimension,
        })
    }

    pub(crate) fn fit(
        &self,
        kind: ClassifierKind,
        params: &Hyperparams,
        seed: u64,
    ) -> ClassifierModel {
        let ones = self.y.iter().filter(|&&l| l == 1).count();
        let single = if ones == 0 {
            Some(0)
        } else if ones == self.y.len() {
            Some(1)
        } else {
            None
        };
        let (body, degenerate) = match single {
            Some(label) => {
                log::warn!("{kind}: single-class training set, using a constant predictor of class {label}");
                (ModelBody::Constant { label }, true)
            }
            None => (
                match kind {
                    ClassifierKind::Forest => {
                        ModelBody::Forest(RandomForest::fit(&self.x, &self.y, &params.forest, seed))
                    }
                    ClassifierKind::MaxMargin => {
                        ModelBody::MaxMargin(Svm::fit(&self.x, &self.y, &params.max_margin))
                    }
                    ClassifierKind::AdaptiveBoost => ModelBody::AdaptiveBoost(AdaBoost::fit(
                        &self.x,
                        &self.y,
                        &params.adaptive_boost,
                    )),
                    ClassifierKind::GradientBoost => ModelBody::GradientBoost(GradientBoost::fit(
                        &self.x,
                        &self.y,
                        &params.gradient_boost,
                    )),
                },
                false,
            ),
        };
        ClassifierModel {
            kind,
            dimension: self.dimension,
            seed,
            degenerate,
            body,
        }
    }
}

/// Trains one model. A single-class training set yields a constant predictor
/// flagged `degenerate` rather than an error.
pub fn train_classifier(
    kind: ClassifierKind,
    x: &[Vec<f64>],
    y: &[u8],
    params: &Hyperparams,
    seed: u64,
) -> Result<ClassifierModel> {
    Ok(CanonicalRows::new(x, y)?.fit(kind, params, seed))
}
