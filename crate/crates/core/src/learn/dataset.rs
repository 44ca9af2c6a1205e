use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LearnError, Result};
use crate::data_io::Target;
use crate::features::FeatureMethod;

/// Where a row came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowId {
    pub subject: usize,
    pub food: usize,
    pub epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub target: Target,
    pub method: FeatureMethod,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub provenance: Vec<RowId>,
}

impl LabeledDataset {
    pub fn new(
        target: Target,
        method: FeatureMethod,
        features: Vec<Vec<f64>>,
        labels: Vec<u8>,
        provenance: Vec<RowId>,
    ) -> Result<Self> {
        if features.len() != labels.len() || features.len() != provenance.len() {
            return Err(LearnError::InvalidDataset(format!(
                "{} rows, {} labels, {} provenance entries",
                features.len(),
                labels.len(),
                provenance.len()
            )));
        }
        if let Some(first) = features.first() {
            if let Some(bad) = features.iter().position(|r| r.len() != first.len()) {
                return Err(LearnError::DimensionMismatch {
                    expected: first.len(),
                    found: features[bad].len(),
                });
            }
        }
        if let Some(&l) = labels.iter().find(|&&l| l > 1) {
            return Err(LearnError::InvalidDataset(format!(
                "label {l} is not binary"
            )));
        }
        Ok(Self {
            target,
            method,
            features,
            labels,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            target: self.target,
            method: self.method,
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            provenance: idx.iter().map(|&i| self.provenance[i]).collect(),
        }
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        [self.len() - ones, ones]
    }
}

/// Row indices of a train/test partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn check_fraction(train_fraction: f64) -> Result<()> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(LearnError::InvalidFraction(train_fraction));
    }
    Ok(())
}

/// Stratified split: `floor(n·f)` training rows (at least one row on each side),
/// allotted to the classes in proportion with largest-remainder rounding.
pub fn stratified_split(labels: &[u8], train_fraction: f64, seed: u64) -> Result<Split> {
    check_fraction(train_fraction)?;
    let n = labels.len();
    if n < 2 {
        return Err(LearnError::InvalidDataset(format!("cannot split {n} rows")));
    }
    let total = ((n as f64 * train_fraction).floor() as usize).clamp(1, n - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l as usize].push(i);
    }
    for class in by_class.iter_mut() {
        class.shuffle(&mut rng);
    }
    let exact: Vec<f64> = by_class
        .iter()
        .map(|c| c.len() as f64 * total as f64 / n as f64)
        .collect();
    let mut quota: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = total - quota.iter().sum::<usize>();
    let mut order = [0usize, 1];
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.partial_cmp(&fa)
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    for &c in order.iter().cycle().take(4) {
        if left == 0 {
            break;
        }
        if quota[c] < by_class[c].len() {
            quota[c] += 1;
            left -= 1;
        }
    }
    if let Some(c) = (0..2).find(|&c| quota[c] == 0) {
        return Err(LearnError::EmptyClass(c as u8));
    }
    let mut train = Vec::with_capacity(total);
    let mut test = Vec::with_capacity(n - total);
    for c in 0..2 {
        train.extend_from_slice(&by_class[c][..quota[c]]);
        test.extend_from_slice(&by_class[c][quota[c]..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

/// Holds out whole subjects: `floor(s·f)` of the `s` distinct subjects (at least
/// one on each side) go to training.
pub fn subject_split(
    provenance: &[RowId],
    labels: &[u8],
    train_fraction: f64,
    seed: u64,
) -> Result<Split> {
    check_fraction(train_fraction)?;
    let mut subjects: Vec<usize> = provenance.iter().map(|r| r.subject).collect();
    subjects.sort_unstable();
    subjects.dedup();
    if subjects.len() < 2 {
        return Err(LearnError::InvalidDataset(
            "need at least two subjects".into(),
        ));
    }
    let k =
        ((subjects.len() as f64 * train_fraction).floor() as usize).clamp(1, subjects.len() - 1);
    subjects.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let held: std::collections::BTreeSet<usize> = subjects[..k].iter().copied().collect();
    let (train, test): (Vec<usize>, Vec<usize>) =
        (0..provenance.len()).partition(|&i| held.contains(&provenance[i].subject));
    for c in 0..2u8 {
        if !train.iter().any(|&i| labels[i] == c) {
            return Err(LearnError::EmptyClass(c));
        }
    }
    Ok(Split { train, test })
}

pub fn train_test_split(
    ds: &LabeledDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let s = stratified_split(&ds.labels, train_fraction, seed)?;
    Ok((ds.subset(&s.train), ds.subset(&s.test)))
}

/// Training rows sorted by feature values (then label), so that models do not
/// depend on the order rows were supplied in.
pub(crate) fn canonical_order(features: &[Vec<f64>], labels: &[u8]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..features.len()).collect();
    idx.sort_by(|&a, &b| {
        features[a]
            .iter()
            .zip(&features[b])
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
            .then(labels[a].cmp(&labels[b]))
    });
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn balanced(n: usize) -> Vec<u8> {
        (0..n).map(|i| (i % 2) as u8).collect()
    }

    #[test]
    fn seventy_thirty() {
        let y = balanced(100);
        let s = stratified_split(&y, 0.7, 3).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (70, 30));
        let ones = s.test.iter().filter(|&&i| y[i] == 1).count();
        assert!((ones as i64 - 15).abs() <= 1);
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn extreme_fraction() {
        let s = stratified_split(&balanced(10), 0.999, 1).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (9, 1));
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let y = balanced(60);
        assert_eq!(
            stratified_split(&y, 0.7, 5).unwrap(),
            stratified_split(&y, 0.7, 5).unwrap()
        );
        assert_ne!(
            stratified_split(&y, 0.7, 5).unwrap(),
            stratified_split(&y, 0.7, 6).unwrap()
        );
    }

    #[test]
    fn errors() {
        assert_eq!(
            stratified_split(&[0, 0, 0, 0], 0.5, 0),
            Err(LearnError::EmptyClass(1))
        );
        assert_eq!(
            stratified_split(&balanced(10), 1.0, 0),
            Err(LearnError::InvalidFraction(1.0))
        );
        assert_eq!(
            stratified_split(&balanced(10), 0.0, 0),
            Err(LearnError::InvalidFraction(0.0))
        );
    }

    #[test]
    fn by_subject_keeps_subjects_whole() {
        let prov: Vec<RowId> = (0..50)
            .map(|i| RowId {
                subject: i / 10,
                food: i % 10,
                epoch: 0,
            })
            .collect();
        let y = balanced(50);
        let s = subject_split(&prov, &y, 0.6, 2).unwrap();
        assert_eq!(s.train.len(), 30);
        for &i in &s.train {
            assert!(s.test.iter().all(|&j| prov[j].subject != prov[i].subject));
        }
    }

    #[test]
    fn canonical_order_ignores_input_order() {
        let f = vec![vec![2.0, 1.0], vec![1.0, 5.0], vec![1.0, 3.0]];
        let y = vec![1, 0, 1];
        let order = canonical_order(&f, &y);
        assert_eq!(order, vec![2, 1, 0]);
    }
}
