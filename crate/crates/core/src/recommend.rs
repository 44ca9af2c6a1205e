//! TOPSIS ranking of foods over the affectivity criteria.

use std::cmp::Ordering;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RecommendError {
    #[error("decision matrix needs at least 2 alternatives, got {0}")]
    TooFewAlternatives(usize),
    #[error("decision matrix has no criteria")]
    NoCriteria,
    #[error("row {row} has {found} entries, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("entry ({row}, {col}) = {value} is negative or not finite")]
    InvalidEntry { row: usize, col: usize, value: f64 },
    #[error("criterion column {0} is all zero")]
    ZeroColumn(usize),
    #[error("expected {expected} weights, got {found}")]
    WeightDimensionMismatch { expected: usize, found: usize },
    #[error("weight {index} is {value}; weights must be positive")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("affectivity table: {0}")]
    Table(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = RecommendError> = std::result::Result<T, E>;

/// Benefit criteria prefer larger values, cost criteria smaller ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    #[default]
    Benefit,
    Cost,
}

/// Rows are alternatives (foods), columns are criteria.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionMatrix {
    rows: Vec<Vec<f64>>,
    orientations: Vec<Orientation>,
}

impl DecisionMatrix {
    /// All criteria benefit-type.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        Self::with_orientations(rows, vec![Orientation::Benefit; n])
    }

    pub fn with_orientations(rows: Vec<Vec<f64>>, orientations: Vec<Orientation>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(RecommendError::TooFewAlternatives(rows.len()));
        }
        let n = orientations.len();
        if n == 0 {
            return Err(RecommendError::NoCriteria);
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(RecommendError::RaggedRow {
                    row: i,
                    expected: n,
                    found: r.len(),
                });
            }
            if let Some(j) = r.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(RecommendError::InvalidEntry {
                    row: i,
                    col: j,
                    value: r[j],
                });
            }
        }
        if let Some(j) = (0..n).find(|&j| rows.iter().all(|r| r[j] == 0.0)) {
            return Err(RecommendError::ZeroColumn(j));
        }
        Ok(Self { rows, orientations })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn orientations(&self) -> &[Orientation] {
        &self.orientations
    }

    pub fn alternatives(&self) -> usize {
        self.rows.len()
    }

    pub fn criteria(&self) -> usize {
        self.orientations.len()
    }
}

/// Euclidean norm of each criterion column.
pub fn column_norms(m: &DecisionMatrix) -> Vec<f64> {
    (0..m.criteria())
        .map(|j| m.rows.iter().map(|r| r[j] * r[j]).sum::<f64>().sqrt())
        .collect()
}

/// `r_ij = x_ij / ‖x_·j‖`.
pub fn normalize(m: &DecisionMatrix) -> Vec<Vec<f64>> {
    let norms = column_norms(m);
    m.rows
        .iter()
        .map(|r| r.iter().zip(&norms).map(|(x, n)| x / n).collect())
        .collect()
}

/// Checks the weights and rescales them to sum to one.
pub fn normalize_weights(weights: &[f64], criteria: usize) -> Result<Vec<f64>> {
    if weights.len() != criteria {
        return Err(RecommendError::WeightDimensionMismatch {
            expected: criteria,
            found: weights.len(),
        });
    }
    if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(RecommendError::NonPositiveWeight {
            index: i,
            value: weights[i],
        });
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        log::info!("weights sum to {total}; rescaling to 1");
    }
    Ok(weights.iter().map(|w| w / total).collect())
}

/// `v_ij = w_j · r_ij` with the weights rescaled to sum to one.
pub fn apply_weights(r: &[Vec<f64>], weights: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = r.first().map_or(weights.len(), Vec::len);
    let w = normalize_weights(weights, n)?;
    Ok(r.iter()
        .map(|row| row.iter().zip(&w).map(|(x, w)| x * w).collect())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopsisScores {
    pub ideal_best: Vec<f64>,
    pub ideal_worst: Vec<f64>,
    pub s_plus: Vec<f64>,
    pub s_minus: Vec<f64>,
    /// Relative closeness to the ideal, in [0, 1].
    pub closeness: Vec<f64>,
    /// Alternative indices, best first.
    pub ranking: Vec<usize>,
}

/// Ideal solutions, separations and closeness of a weighted matrix.
///
/// An alternative with `S⁺ + S⁻ = 0` (every alternative identical) gets C = 0.5.
pub fn score(v: &[Vec<f64>], orientations: &[Orientation]) -> TopsisScores {
    let n = orientations.len();
    let col_max = |j: usize| v.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max);
    let col_min = |j: usize| v.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min);
    let (ideal_best, ideal_worst): (Vec<f64>, Vec<f64>) = (0..n)
        .map(|j| match orientations[j] {
            Orientation::Benefit => (col_max(j), col_min(j)),
            Orientation::Cost => (col_min(j), col_max(j)),
        })
        .unzip();
    let dist = |r: &[f64], p: &[f64]| {
        r.iter()
            .zip(p)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };
    let s_plus: Vec<f64> = v.iter().map(|r| dist(r, &ideal_best)).collect();
    let s_minus: Vec<f64> = v.iter().map(|r| dist(r, &ideal_worst)).collect();
    let closeness: Vec<f64> = s_plus
        .iter()
        .zip(&s_minus)
        .map(|(p, m)| if p + m > 0.0 { m / (p + m) } else { 0.5 })
        .collect();
    let mut ranking: Vec<usize> = (0..v.len()).collect();
    ranking.sort_by(|&a, &b| {
        closeness[b]
            .partial_cmp(&closeness[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    TopsisScores {
        ideal_best,
        ideal_worst,
        s_plus,
        s_minus,
        closeness,
        ranking,
    }
}

/// Every intermediate of a TOPSIS run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopsisResult {
    pub norms: Vec<f64>,
    pub normalized: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub weighted: Vec<Vec<f64>>,
    #[serde(flatten)]
    pub scores: TopsisScores,
}

pub fn topsis(m: &DecisionMatrix, weights: &[f64]) -> Result<TopsisResult> {
    let weights = normalize_weights(weights, m.criteria())?;
    let normalized = normalize(m);
    let weighted = apply_weights(&normalized, &weights)?;
    let scores = score(&weighted, m.orientations());
    Ok(TopsisResult {
        norms: column_norms(m),
        normalized,
        weights,
        weighted,
        scores,
    })
}

/// Weights for (Like, Excitement, Feelings).
pub const DEFAULT_WEIGHTS: [f64; 3] = [0.4, 0.3, 0.3];

/// 40-food regression example: food 0 scores 2/2/1 and food 1 scores 1/1/0.
/// With [`DEFAULT_WEIGHTS`] food 0 is the ideal best, C = 1.
pub fn reference_example() -> DecisionMatrix {
    let rows = (0..40)
        .map(|i| {
            let like = if (1..=8).contains(&i) { 1.0 } else { 2.0 };
            let excitement = if (1..=10).contains(&i) { 1.0 } else { 2.0 };
            let feelings = if (1..=9).contains(&i) { 0.0 } else { 1.0 };
            vec![like, excitement, feelings]
        })
        .collect();
    DecisionMatrix::new(rows).expect("fixed example is well formed")
}

/// Expected values of [`reference_example`] as (label, computed, expected).
pub fn reference_checks() -> Result<Vec<(&'static str, f64, f64)>> {
    let r = topsis(&reference_example(), &DEFAULT_WEIGHTS)?;
    Ok(vec![
        ("norm like", r.norms[0], 11.6619),
        ("norm excitement", r.norms[1], 11.401),
        ("norm feelings", r.norms[2], 5.567),
        ("weighted like[0]", r.weighted[0][0], 0.06859),
        ("worst like", r.scores.ideal_worst[0], 0.03429),
        ("worst excitement", r.scores.ideal_worst[1], 0.02631),
        ("S- [0]", r.scores.s_minus[0], 0.0690),
        ("C [0]", r.scores.closeness[0], 1.0),
    ])
}

/// Criterion values of one food.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffectivityRow {
    pub food_id: String,
    #[serde(default)]
    pub name: String,
    pub like: f64,
    pub excitement: f64,
    pub feelings: f64,
}

impl AffectivityRow {
    pub fn values(&self) -> [f64; 3] {
        [self.like, self.excitement, self.feelings]
    }

    pub fn display_name(&self) -> &str {
        if self.name.is_empty() {
            &self.food_id
        } else {
            &self.name
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AffectivityTable {
    pub rows: Vec<AffectivityRow>,
}

impl AffectivityTable {
    pub fn decision_matrix(&self) -> Result<DecisionMatrix> {
        DecisionMatrix::new(self.rows.iter().map(|r| r.values().to_vec()).collect())
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> RecommendError + '_ {
    move |source| RecommendError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// JSON array of rows, or CSV with a `food_id,like,excitement,feelings` header
/// (an optional `name` column is also accepted).
pub fn read_affectivity<R: Read>(mut reader: R) -> Result<AffectivityTable> {
    let mut text = String::new();
    reader
        .read_to_string(&mut text)
        .map_err(|source| RecommendError::Io {
            path: "<input>".into(),
            source,
        })?;
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(&text).map_err(|e| RecommendError::Table(e.to_string()));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let rows = rdr
        .deserialize()
        .collect::<std::result::Result<Vec<AffectivityRow>, _>>()
        .map_err(|e| RecommendError::Table(e.to_string()))?;
    Ok(AffectivityTable { rows })
}

pub fn load_affectivity(path: &Path) -> Result<AffectivityTable> {
    read_affectivity(std::fs::File::open(path).map_err(io_err(path))?)
}

pub fn write_affectivity_csv<W: Write>(table: &AffectivityTable, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in &table.rows {
        wtr.serialize(r)
            .map_err(|e| RecommendError::Table(e.to_string()))?;
    }
    wtr.flush().map_err(|source| RecommendError::Io {
        path: "<output>".into(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFood {
    pub food_id: String,
    pub name: String,
    pub score: f64,
}

/// Top-`k` foods by closeness; `k` larger than the table is clamped.
pub fn rank_foods(table: &AffectivityTable, weights: &[f64], k: usize) -> Result<Vec<RankedFood>> {
    let m = table.decision_matrix()?;
    let res = topsis(&m, weights)?;
    if k > m.alternatives() {
        log::warn!(
            "top {k} requested from {} foods; returning all",
            m.alternatives()
        );
    }
    Ok(res
        .scores
        .ranking
        .iter()
        .take(k)
        .map(|&i| RankedFood {
            food_id: table.rows[i].food_id.clone(),
            name: table.rows[i].display_name().to_string(),
            score: res.scores.closeness[i],
        })
        .collect())
}

/// Plain-text listing: serial number, food name and score.
pub fn render_ranking(ranked: &[RankedFood]) -> String {
    let mut out = String::from("Serial No. | Food Name | Topsis Score\n");
    for (i, r) in ranked.iter().enumerate() {
        out += &format!("{} | {} | {:.3}\n", i + 1, r.name, r.score);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> DecisionMatrix {
        DecisionMatrix::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn three_four_five() {
        let r = normalize(&m(&[&[3.0], &[4.0]]));
        assert!((r[0][0] - 0.6).abs() < 1e-12 && (r[1][0] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn identity_is_already_normalized() {
        let r = normalize(&m(&[&[1.0, 0.0], &[0.0, 1.0]]));
        assert_eq!(r, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let v = apply_weights(&r, &[1.0, 1.0]).unwrap();
        assert_eq!(v, vec![vec![0.5, 0.0], vec![0.0, 0.5]]);
    }

    #[test]
    fn weight_errors() {
        let r = vec![vec![0.5, 0.5]];
        assert!(matches!(
            apply_weights(&r, &[1.0, 0.0]),
            Err(RecommendError::NonPositiveWeight { index: 1, .. })
        ));
        assert!(matches!(
            apply_weights(&r, &[1.0]),
            Err(RecommendError::WeightDimensionMismatch {
                expected: 2,
                found: 1
            })
        ));
    }

    #[test]
    fn matrix_errors() {
        assert!(matches!(
            DecisionMatrix::new(vec![vec![1.0]]),
            Err(RecommendError::TooFewAlternatives(1))
        ));
        assert!(matches!(
            DecisionMatrix::new(vec![vec![1.0, 0.0], vec![2.0, 0.0]]),
            Err(RecommendError::ZeroColumn(1))
        ));
        assert!(matches!(
            DecisionMatrix::new(vec![vec![1.0], vec![-2.0]]),
            Err(RecommendError::InvalidEntry { row: 1, .. })
        ));
    }

    #[test]
    fn dominant_alternative_wins_with_one() {
        let res = topsis(
            &m(&[&[1.0, 2.0, 1.0], &[3.0, 4.0, 5.0], &[2.0, 1.0, 3.0]]),
            &DEFAULT_WEIGHTS,
        )
        .unwrap();
        assert_eq!(res.scores.ranking[0], 1);
        assert_eq!(res.scores.closeness[1], 1.0);
    }

    #[test]
    fn identical_rows_are_half() {
        let res = topsis(&m(&[&[2.0, 1.0], &[2.0, 1.0], &[2.0, 1.0]]), &[0.5, 0.5]).unwrap();
        assert_eq!(res.scores.closeness, vec![0.5; 3]);
        assert_eq!(res.scores.ranking, vec![0, 1, 2]);
    }

    #[test]
    fn cost_criterion_flips_preference() {
        let mat =
            DecisionMatrix::with_orientations(vec![vec![1.0], vec![3.0]], vec![Orientation::Cost])
                .unwrap();
        let res = topsis(&mat, &[1.0]).unwrap();
        assert_eq!(res.scores.ranking, vec![0, 1]);
        assert_eq!(res.scores.closeness, vec![1.0, 0.0]);
    }

    #[test]
    fn csv_and_json_tables() {
        let csv_text = "food_id,like,excitement,feelings\nramen,2,2,1\nburger,1,2,2\n";
        let t = read_affectivity(csv_text.as_bytes()).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.rows[0].display_name(), "ramen");
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(read_affectivity(json.as_bytes()).unwrap(), t);
        let mut out = Vec::new();
        write_affectivity_csv(&t, &mut out).unwrap();
        assert_eq!(read_affectivity(out.as_slice()).unwrap(), t);
    }

    #[test]
    fn rank_clamps_k() {
        let t = AffectivityTable {
            rows: (0..3)
                .map(|i| AffectivityRow {
                    food_id: format!("f{i}"),
                    name: String::new(),
                    like: 1.0 + i as f64,
                    excitement: 1.0,
                    feelings: 2.0,
                })
                .collect(),
        };
        let r = rank_foods(&t, &DEFAULT_WEIGHTS, 5).unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(r[0].food_id, "f2");
        assert!(render_ranking(&r).contains("1 | f2 | 1.000"));
    }
}
