//! Two-level majority voting: four classifier families per feature method,
//! then the three method verdicts.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    CanonicalRows, ClassifierKind, ClassifierModel, Hyperparams, LabeledDataset, LearnError,
    Prediction, Result,
};
use crate::data_io::Target;
use crate::features::FeatureMethod;
use crate::metrics::MetricsReport;

/// How an even split of votes is resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    /// Side whose voters are more confident on average (score for 1-voters,
    /// 1 − score for 0-voters); still tied goes to 0.
    #[default]
    MeanConfidence,
    /// Always 0.
    Zero,
}

/// Modal label; ties broken by mean voter confidence when `scores` (class-1
/// affinities, one per vote) are given, and then by label 0.
pub fn majority_vote(labels: &[u8], scores: Option<&[f64]>) -> u8 {
    let ones = labels.iter().filter(|&&l| l == 1).count();
    let zeros = labels.len() - ones;
    if ones != zeros {
        return (ones > zeros) as u8;
    }
    let Some(scores) = scores else { return 0 };
    let (mut c1, mut c0) = (0.0, 0.0);
    for (&l, &s) in labels.iter().zip(scores) {
        if l == 1 {
            c1 += s;
        } else {
            c0 += 1.0 - s;
        }
    }
    if ones > 0 && c1 / ones as f64 > c0 / zeros as f64 {
        1
    } else {
        0
    }
}

/// A voted label with the mean score of the voters that agree with it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub label: u8,
    pub score: f64,
}

fn vote(preds: &[Prediction], rule: TieRule) -> Verdict {
    let labels: Vec<u8> = preds.iter().map(|p| p.label).collect();
    let scores: Vec<f64> = preds.iter().map(|p| p.score).collect();
    let label = match rule {
        TieRule::MeanConfidence => majority_vote(&labels, Some(&scores)),
        TieRule::Zero => majority_vote(&labels, None),
    };
    let agreeing: Vec<f64> = preds
        .iter()
        .filter(|p| p.label == label)
        .map(|p| p.score)
        .collect();
    let score = if agreeing.is_empty() {
        label as f64
    } else {
        agreeing.iter().sum::<f64>() / agreeing.len() as f64
    };
    Verdict { label, score }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodModels {
    pub method: FeatureMethod,
    pub models: Vec<ClassifierModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedEnsemble {
    pub target: Target,
    pub tie_rule: TieRule,
    pub seed: u64,
    pub methods: Vec<MethodModels>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsemblePrediction {
    pub label: u8,
    /// Mean score of the base models that sided with their method's verdict,
    /// over the methods that sided with the final label.
    pub score: f64,
    pub per_method: Vec<(FeatureMethod, Verdict)>,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one base model, independent of training order.
pub fn model_seed(seed: u64, method: FeatureMethod, kind: ClassifierKind) -> u64 {
    splitmix(splitmix(seed ^ ((method as u64 + 1) << 8)) ^ (kind as u64 + 1))
}

fn check_aligned(sets: &[LabeledDataset]) -> Result<()> {
    let first = sets
        .first()
        .ok_or_else(|| LearnError::InvalidDataset("no datasets".into()))?;
    for s in &sets[1..] {
        if s.len() != first.len() || s.labels != first.labels || s.provenance != first.provenance {
            return Err(LearnError::MisalignedRows(format!(
                "{} rows of {} do not line up with {} rows of {}",
                s.len(),
                s.method,
                first.len(),
                first.method
            )));
        }
    }
    for m in FeatureMethod::ALL {
        if !sets.iter().any(|s| s.method == m) {
            return Err(LearnError::MissingMethod(m));
        }
    }
    Ok(())
}

/// Trains all 4 × 3 base models on row-aligned per-method training sets.
pub fn train_ensemble(
    train: &[LabeledDataset],
    params: &Hyperparams,
    tie_rule: TieRule,
    seed: u64,
) -> Result<TrainedEnsemble> {
    check_aligned(train)?;
    let target = train[0].target;
    let mut methods = Vec::with_capacity(3);
    for m in FeatureMethod::ALL {
        let ds = train.iter().find(|s| s.method == m).unwrap();
        let rows = CanonicalRows::new(&ds.features, &ds.labels)?;
        let models = ClassifierKind::ALL
            .iter()
            .map(|&k| {
                log::debug!("training {k} on {m} ({} rows, target {target})", ds.len());
                rows.fit(k, params, model_seed(seed, m, k))
            })
            .collect();
        methods.push(MethodModels { method: m, models });
    }
    Ok(TrainedEnsemble {
        target,
        tie_rule,
        seed,
        methods,
    })
}

pub fn hierarchical_predict(
    ens: &TrainedEnsemble,
    vectors: &[(FeatureMethod, &[f64])],
) -> Result<EnsemblePrediction> {
    let mut per_method = Vec::with_capacity(ens.methods.len());
    let mut base: Vec<Vec<Prediction>> = Vec::with_capacity(ens.methods.len());
    for mm in &ens.methods {
        let x = vectors
            .iter()
            .find(|(m, _)| *m == mm.method)
            .map(|(_, v)| *v)
            .ok_or(LearnError::MissingMethod(mm.method))?;
        let preds = mm
            .models
            .iter()
            .map(|m| m.predict(x))
            .collect::<Result<Vec<_>>>()?;
        per_method.push((mm.method, vote(&preds, ens.tie_rule)));
        base.push(preds);
    }
    let verdicts: Vec<Prediction> = per_method
        .iter()
        .map(|(_, v)| Prediction {
            label: v.label,
            score: v.score,
        })
        .collect();
    let label = vote(&verdicts, ens.tie_rule).label;
    let winning: Vec<f64> = per_method
        .iter()
        .zip(&base)
        .filter(|((_, v), _)| v.label == label)
        .flat_map(|((_, v), preds)| {
            preds
                .iter()
                .filter(move |p| p.label == v.label)
                .map(|p| p.score)
        })
        .collect();
    let score = if winning.is_empty() {
        label as f64
    } else {
        winning.iter().sum::<f64>() / winning.len() as f64
    };
    Ok(EnsemblePrediction {
        label,
        score,
        per_method,
    })
}

/// Predictions for every row of row-aligned per-method test sets.
pub fn ensemble_predictions(
    ens: &TrainedEnsemble,
    test: &[LabeledDataset],
) -> Result<Vec<EnsemblePrediction>> {
    check_aligned(test)?;
    (0..test[0].len())
        .map(|i| {
            let vectors: Vec<(FeatureMethod, &[f64])> = test
                .iter()
                .map(|s| (s.method, &s.features[i][..]))
                .collect();
            hierarchical_predict(ens, &vectors)
        })
        .collect()
}

pub fn evaluate_ensemble(
    ens: &TrainedEnsemble,
    test: &[LabeledDataset],
    positive_class: u8,
) -> Result<MetricsReport> {
    let preds = ensemble_predictions(ens, test)?;
    let labels: Vec<u8> = preds.iter().map(|p| p.label).collect();
    let scores: Vec<f64> = preds.iter().map(|p| p.score).collect();
    Ok(MetricsReport::from_predictions(
        &labels,
        &scores,
        &test[0].labels,
        positive_class,
    )?)
}

pub const BUNDLE_VERSION: u32 = 1;

/// Everything needed to reproduce predictions: one ensemble per target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub version: u32,
    pub seed: u64,
    pub hyperparams: Hyperparams,
    pub ensembles: Vec<TrainedEnsemble>,
}

impl ModelBundle {
    pub fn new(seed: u64, hyperparams: Hyperparams, ensembles: Vec<TrainedEnsemble>) -> Self {
        Self {
            version: BUNDLE_VERSION,
            seed,
            hyperparams,
            ensembles,
        }
    }

    pub fn ensemble(&self, target: Target) -> Option<&TrainedEnsemble> {
        self.ensembles.iter().find(|e| e.target == target)
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> LearnError {
    LearnError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn save_bundle(path: &Path, bundle: &ModelBundle) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, bundle).map_err(|e| LearnError::Serialization(e.to_string()))?;
    w.flush().map_err(|e| io_err(path, e))
}

pub fn load_bundle(path: &Path) -> Result<ModelBundle> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let value: serde_json::Value = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| LearnError::Serialization(e.to_string()))?;
    let version = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if version != BUNDLE_VERSION {
        return Err(LearnError::UnsupportedVersion {
            found: version,
            expected: BUNDLE_VERSION,
        });
    }
    serde_json::from_value(value).map_err(|e| LearnError::Serialization(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::{ModelBody, RowId};
    use proptest::prelude::*;

    fn constant(label: u8, kind: ClassifierKind, dim: usize) -> ClassifierModel {
        ClassifierModel {
            kind,
            dimension: dim,
            seed: 0,
            degenerate: true,
            body: ModelBody::Constant { label },
        }
    }

    /// Ensemble whose base model (m, k) predicts `table[m][k]`.
    fn fixed(table: [[u8; 4]; 3]) -> TrainedEnsemble {
        TrainedEnsemble {
            target: Target::Like,
            tie_rule: TieRule::MeanConfidence,
            seed: 0,
            methods: FeatureMethod::ALL
                .iter()
                .zip(table)
                .map(|(&method, row)| MethodModels {
                    method,
                    models: ClassifierKind::ALL
                        .iter()
                        .zip(row)
                        .map(|(&k, l)| constant(l, k, 1))
                        .collect(),
                })
                .collect(),
        }
    }

    fn all_vectors() -> Vec<(FeatureMethod, &'static [f64])> {
        FeatureMethod::ALL
            .iter()
            .map(|&m| (m, &[0.0][..]))
            .collect()
    }

    #[test]
    fn vote_examples() {
        assert_eq!(majority_vote(&[1, 1, 0, 0, 1], None), 1);
        assert_eq!(majority_vote(&[1, 0], Some(&[0.9, 0.2])), 1);
        assert_eq!(majority_vote(&[1, 0], Some(&[0.6, 0.1])), 0);
        assert_eq!(majority_vote(&[1, 0], Some(&[0.7, 0.3])), 0);
        assert_eq!(majority_vote(&[1, 0], None), 0);
        assert_eq!(majority_vote(&[0, 0, 0, 0], None), 0);
    }

    #[test]
    fn level_two_mode() {
        let e = fixed([[1, 1, 1, 0], [1, 1, 0, 1], [0, 0, 0, 1]]);
        let p = hierarchical_predict(&e, &all_vectors()).unwrap();
        assert_eq!(p.label, 1);
        assert_eq!(
            p.per_method
                .iter()
                .map(|(_, v)| v.label)
                .collect::<Vec<_>>(),
            vec![1, 1, 0]
        );
        assert_eq!(p.score, 1.0);
        let zero = fixed([[0; 4]; 3]);
        assert_eq!(
            hierarchical_predict(&zero, &all_vectors()).unwrap().label,
            0
        );
    }

    #[test]
    fn missing_method() {
        let e = fixed([[1; 4]; 3]);
        let v = vec![
            (FeatureMethod::Stft, &[0.0][..]),
            (FeatureMethod::Dwt, &[0.0][..]),
        ];
        assert_eq!(
            hierarchical_predict(&e, &v),
            Err(LearnError::MissingMethod(FeatureMethod::Hht))
        );
    }

    fn datasets(labels: &[u8], method_rows: usize) -> Vec<LabeledDataset> {
        FeatureMethod::ALL
            .iter()
            .map(|&m| {
                LabeledDataset::new(
                    Target::Like,
                    m,
                    vec![vec![0.0]; method_rows],
                    labels.to_vec(),
                    (0..labels.len())
                        .map(|i| RowId {
                            subject: 0,
                            food: i,
                            epoch: 0,
                        })
                        .collect(),
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn constant_zero_is_chance_on_balanced() {
        let e = fixed([[0; 4]; 3]);
        let labels: Vec<u8> = (0..20).map(|i| (i % 2) as u8).collect();
        let r = evaluate_ensemble(&e, &datasets(&labels, 20), 1).unwrap();
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.auc, Some(0.5));
    }

    #[test]
    fn misaligned_rows() {
        let e = fixed([[0; 4]; 3]);
        let mut sets = datasets(&[0, 1, 0, 1], 4);
        sets[2].labels[0] = 1;
        assert!(matches!(
            evaluate_ensemble(&e, &sets, 0),
            Err(LearnError::MisalignedRows(_))
        ));
    }

    /// Independent mode-of-modes with ties to 0 (no scores).
    fn oracle(table: &[[u8; 4]; 3]) -> u8 {
        let level1: Vec<u8> = table
            .iter()
            .map(|row| {
                let ones = row.iter().filter(|&&v| v == 1).count();
                if ones > 2 {
                    1
                } else {
                    0
                }
            })
            .collect();
        (level1.iter().filter(|&&v| v == 1).count() >= 2) as u8
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn mode_of_modes(bits in any::<u16>()) {
            let mut table = [[0u8; 4]; 3];
            for m in 0..3 {
                for k in 0..4 {
                    table[m][k] = ((bits >> (m * 4 + k)) & 1) as u8;
                }
            }
            let mut e = fixed(table);
            e.tie_rule = TieRule::Zero;
            prop_assert_eq!(hierarchical_predict(&e, &all_vectors()).unwrap().label, oracle(&table));
        }

        #[test]
        fn repeated_vote_is_identity(l in 0u8..2, k in 1usize..20) {
            prop_assert_eq!(majority_vote(&vec![l; k], None), l);
        }
    }
}
