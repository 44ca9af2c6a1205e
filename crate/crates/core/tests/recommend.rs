use amrp::recommend::{
    rank_foods, read_affectivity, render_ranking, topsis, DecisionMatrix, Orientation,
    RecommendError, DEFAULT_WEIGHTS,
};
use proptest::prelude::*;

/// Straight-line TOPSIS written independently of the library.
fn oracle(rows: &[Vec<f64>], w: &[f64], cost: &[bool]) -> Vec<f64> {
    let m = rows[0].len();
    let wsum: f64 = w.iter().sum();
    let mut v = rows.to_vec();
    for j in 0..m {
        let norm = rows.iter().map(|r| r[j] * r[j]).sum::<f64>().sqrt();
        for r in v.iter_mut() {
            r[j] = r[j] / norm * w[j] / wsum;
        }
    }
    let col = |j: usize| v.iter().map(move |r| r[j]);
    let best: Vec<f64> = (0..m)
        .map(|j| {
            if cost[j] {
                col(j).fold(f64::INFINITY, f64::min)
            } else {
                col(j).fold(f64::NEG_INFINITY, f64::max)
            }
        })
        .collect();
    let worst: Vec<f64> = (0..m)
        .map(|j| {
            if cost[j] {
                col(j).fold(f64::NEG_INFINITY, f64::max)
            } else {
                col(j).fold(f64::INFINITY, f64::min)
            }
        })
        .collect();
    v.iter()
        .map(|r| {
            let sp = r
                .iter()
                .zip(&best)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            let sm = r
                .iter()
                .zip(&worst)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            if sp + sm == 0.0 {
                0.5
            } else {
                sm / (sp + sm)
            }
        })
        .collect()
}

fn matrix() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    (2usize..12, 1usize..5).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(prop::collection::vec(0.1f64..10.0, m), n),
            prop::collection::vec(0.05f64..1.0, m),
        )
    })
}

proptest! {
    #[test]
    fn matches_oracle((rows, w) in matrix(), flip in any::<u8>()) {
        let cost: Vec<bool> = (0..w.len()).map(|j| flip >> j & 1 == 1).collect();
        let orient = cost.iter().map(|c| if *c { Orientation::Cost } else { Orientation::Benefit }).collect();
        let r = topsis(&DecisionMatrix::with_orientations(rows.clone(), orient).unwrap(), &w).unwrap();
        let want = oracle(&rows, &w, &cost);
        for (a, b) in r.scores.closeness.iter().zip(&want) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        for pair in r.scores.ranking.windows(2) {
            let (a, b) = (r.scores.closeness[pair[0]], r.scores.closeness[pair[1]]);
            prop_assert!(a > b || (a == b && pair[0] < pair[1]));
        }
    }

    #[test]
    fn closeness_in_unit_interval_and_scale_invariant((rows, w) in matrix(), k in 0.01f64..100.0, kw in 0.1f64..10.0) {
        let a = topsis(&DecisionMatrix::new(rows.clone()).unwrap(), &w).unwrap();
        let scaled: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v * k).collect()).collect();
        let ws: Vec<f64> = w.iter().map(|x| x * kw).collect();
        let b = topsis(&DecisionMatrix::new(scaled).unwrap(), &ws).unwrap();
        for (x, y) in a.scores.closeness.iter().zip(&b.scores.closeness) {
            prop_assert!((0.0..=1.0).contains(x));
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn two_alternatives_are_complementary(r0 in prop::collection::vec(0.1f64..10.0, 3), r1 in prop::collection::vec(0.1f64..10.0, 3)) {
        prop_assume!(r0 != r1);
        let r = topsis(&DecisionMatrix::new(vec![r0, r1]).unwrap(), &DEFAULT_WEIGHTS).unwrap();
        prop_assert!((r.scores.closeness[0] + r.scores.closeness[1] - 1.0).abs() < 1e-12);
    }
}

#[test]
fn identical_rows_score_one_half() {
    let r = topsis(
        &DecisionMatrix::new(vec![vec![1.0, 2.0]; 3]).unwrap(),
        &[1.0, 1.0],
    )
    .unwrap();
    assert!(r.scores.closeness.iter().all(|c| *c == 0.5));
    assert_eq!(r.scores.ranking, vec![0, 1, 2]);
}

#[test]
fn bad_inputs_are_rejected() {
    assert!(matches!(
        DecisionMatrix::new(vec![vec![1.0]]),
        Err(RecommendError::TooFewAlternatives(1))
    ));
    assert!(DecisionMatrix::new(vec![vec![1.0, 2.0], vec![1.0]]).is_err());
    assert!(DecisionMatrix::new(vec![vec![0.0, 1.0], vec![0.0, 2.0]]).is_err());
    let m = DecisionMatrix::new(vec![vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
    assert!(topsis(&m, &[1.0]).is_err());
    assert!(topsis(&m, &[1.0, -1.0]).is_err());
}

#[test]
fn csv_table_ranks_and_renders() {
    let csv = "food_id,name,like,excitement,feelings\n\
               a,Apple,2,2,1\n\
               b,Bread,1,1,0\n\
               c,Curry,2,1,1\n";
    let table = read_affectivity(csv.as_bytes()).unwrap();
    let top = rank_foods(&table, &DEFAULT_WEIGHTS, 10).unwrap();
    assert_eq!(
        top.iter().map(|r| r.food_id.as_str()).collect::<Vec<_>>(),
        ["a", "c", "b"]
    );
    assert_eq!(top[0].score, 1.0);
    assert_eq!(top[2].score, 0.0);
    let text = render_ranking(&top[..1]);
    assert_eq!(
        text,
        "Serial No. | Food Name | Topsis Score\n1 | Apple | 1.000\n"
    );
}
