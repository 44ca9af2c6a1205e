//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails for a reason not listed in `KNOWN_FIXTURE_MISSES`.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use amrp::data_io::load_food_db;
use amrp::features::{dwt, emd, idwt, stft, EmdConfig, StftConfig, Wavelet};
use amrp::metrics::run_fixtures;
use amrp::pipeline::{run_pipeline, PipelineConfig, SyntheticInput};
use amrp::planner::{
    exact_min_bins, first_fit_decreasing, plan_menu, validate_plan, DayBudget, MealPlan,
    PackingInstance, PlannedFood, Violation,
};
use amrp::preprocess::decompose_bands;
use amrp::recommend::{topsis, DecisionMatrix, DEFAULT_WEIGHTS};
use amrp::{BandName, BandTable, FoodItem, MealSlot};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOPSIS_TOL: f64 = 1e-3;
const TABLE_III_TOL: f64 = 5e-4;
const FIXTURE_TOL: f64 = 1e-3;
const TABLE_III: [&str; 2] = ["voting/all/like/dwt", "voting/all/like/hht"];
const DWT_TOL: f64 = 1e-8;
const EMD_TOL: f64 = 1e-10;
const PARSEVAL_REL_TOL: f64 = 1e-6;
const ALPHA_SHARE_MIN: f64 = 0.90;
const SYNTH_METRIC_MIN: f64 = 0.90;
const SYNTH_GAP_MAX: f64 = 0.05;
const SYNTH_TIME_LIMIT: Duration = Duration::from_secs(600);

/// Published tables whose printed F1 cannot be reproduced with the first-listed
/// class as positive. The Feelings rows match when Pleasant is positive; the
/// frontal Excitement DWT table repeats the STFT counts.
const KNOWN_FIXTURE_MISSES: [&str; 8] = [
    "voting/all/feelings/dwt",
    "voting/all/feelings/stft",
    "voting/all/feelings/hht",
    "voting/frontal/feelings/dwt",
    "voting/frontal/feelings/stft",
    "voting/frontal/feelings/hht",
    "voting/frontal/excitement/dwt",
    "hierarchical/frontal/feelings",
];

enum Outcome {
    Pass(String),
    Fail(String),
    /// Fails, but only in the ways documented above.
    KnownFail(String),
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn criterion_1() -> Outcome {
    let rows: Vec<Vec<f64>> = (0..40)
        .map(|i| {
            let like = match i {
                0 => 2.0,
                1..=8 => 1.0,
                _ => 2.0,
            };
            let excitement = match i {
                0 => 2.0,
                1..=10 => 1.0,
                _ => 2.0,
            };
            let feelings = match i {
                0 => 1.0,
                1..=9 => 0.0,
                _ => 1.0,
            };
            vec![like, excitement, feelings]
        })
        .collect();
    let m = DecisionMatrix::new(rows).expect("matrix");
    let r = match topsis(&m, &DEFAULT_WEIGHTS) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(format!("topsis failed: {e}")),
    };
    let checks: Vec<(&str, Vec<f64>, Vec<f64>)> = vec![
        ("norms", r.norms.clone(), vec![11.6619, 11.401, 5.567]),
        (
            "normalized[0]",
            r.normalized[0].clone(),
            vec![0.1714, 0.1754, 0.1796],
        ),
        (
            "weighted[0]",
            r.weighted[0].clone(),
            vec![0.06859, 0.05262, 0.05388],
        ),
        (
            "V-",
            r.scores.ideal_worst.clone(),
            vec![0.03429, 0.02631, 0.0],
        ),
        ("C[0]", vec![r.scores.closeness[0]], vec![1.0]),
        ("S-[0]", vec![r.scores.s_minus[0]], vec![0.0690]),
    ];
    let mut bad = Vec::new();
    for (name, got, want) in &checks {
        if got.len() != want.len()
            || got
                .iter()
                .zip(want)
                .any(|(g, w)| !close(*g, *w, TOPSIS_TOL))
        {
            bad.push(format!("{name} = {got:?}, expected {want:?}"));
        }
    }
    if bad.is_empty() {
        Outcome::Pass(format!(
            "worked example reproduced within {TOPSIS_TOL}: C[0] = {:.4}, S-[0] = {:.4}",
            r.scores.closeness[0], r.scores.s_minus[0]
        ))
    } else {
        Outcome::Fail(bad.join("; "))
    }
}

fn criterion_2() -> Outcome {
    let strict = run_fixtures(0, TABLE_III_TOL);
    let worked_ok = TABLE_III
        .iter()
        .all(|n| strict.iter().any(|o| o.name == *n && o.within_tolerance));
    let outcomes = run_fixtures(0, FIXTURE_TOL);
    let misses: Vec<&str> = outcomes
        .iter()
        .filter(|o| !o.within_tolerance)
        .map(|o| o.name)
        .collect();
    let ok = outcomes.len() - misses.len();
    let detail = format!(
        "like DWT/HHT within {TABLE_III_TOL}: {worked_ok}; {ok}/{} fixtures within {FIXTURE_TOL}",
        outcomes.len()
    );
    if misses.is_empty() && worked_ok {
        return Outcome::Pass(detail);
    }
    let flipped = run_fixtures(1, FIXTURE_TOL);
    let flip_ok = misses
        .iter()
        .filter(|n| flipped.iter().any(|o| o.name == **n && o.within_tolerance))
        .count();
    let detail = format!(
        "{detail}; misses {misses:?}; {flip_ok} of them match with the second-listed class as positive, \
         the frontal excitement DWT table repeats the STFT counts"
    );
    let mut expected = KNOWN_FIXTURE_MISSES.to_vec();
    expected.sort_unstable();
    let mut got = misses;
    got.sort_unstable();
    if got == expected && worked_ok {
        Outcome::KnownFail(detail)
    } else {
        Outcome::Fail(format!("{detail}; unexpected miss set"))
    }
}

fn food(id: &str, name: &str, kcal: f64, slots: &[MealSlot]) -> FoodItem {
    FoodItem::new(id, name, kcal, slots)
}

fn criterion_3() -> Outcome {
    use MealSlot::*;
    let budget = DayBudget::default();
    let bread = food(
        "bread-butter",
        "Bread and Butter",
        189.0,
        &[Breakfast, Snacks],
    );
    let omelette = food("omelette", "Omelete", 154.0, &[Breakfast, Lunch, Snacks]);
    let polao = food("polao-roast", "Polao Roast", 450.0, &[Lunch, Dinner]);
    let kabab = food("kabab", "Kabab", 691.0, &[Lunch, Dinner]);
    let ramen = food("ramen", "Ramen", 192.3, &[Breakfast, Snacks]);
    let placed = |f: &FoodItem| PlannedFood {
        food: f.clone(),
        kcal: f.calories,
        score: 0.0,
    };
    let published = MealPlan::from_slots(vec![
        (Breakfast, vec![placed(&bread), placed(&omelette)]),
        (Lunch, vec![placed(&polao)]),
        (Dinner, vec![placed(&kabab)]),
        (Snacks, vec![placed(&ramen)]),
    ]);
    let subtotals: Vec<f64> = MealSlot::ALL
        .iter()
        .map(|s| published.slot(*s).subtotal())
        .collect();
    let day = published.day_total();
    let totals_ok = subtotals
        .iter()
        .zip([343.0, 450.0, 691.0, 192.3])
        .all(|(g, w)| close(*g, w, 1e-9))
        && close(day, 1676.3, 1e-9)
        && day >= budget.total_min_kcal
        && day <= budget.total_max_kcal;
    let violations = validate_plan(&published, &budget);
    let lunch_note = violations
        .iter()
        .map(Violation::to_string)
        .collect::<Vec<_>>()
        .join(", ");

    let mut bad = Vec::new();
    if !totals_ok {
        bad.push(format!("published totals {subtotals:?} / {day}"));
    }
    for file in ["menu_person1_foods.json", "menu_person2_foods.json"] {
        let db = match load_food_db(&data_dir().join(file)) {
            Ok(db) => db,
            Err(e) => {
                bad.push(format!("{file}: {e}"));
                continue;
            }
        };
        let n = db.len();
        let foods: Vec<(FoodItem, f64)> = db
            .items()
            .iter()
            .enumerate()
            .map(|(i, f)| (f.clone(), 1.0 - i as f64 / n as f64))
            .collect();
        match plan_menu(&foods, &budget) {
            Ok(p) if validate_plan(&p, &budget).is_empty() => {}
            Ok(p) => bad.push(format!(
                "{file}: invalid plan {:?}",
                validate_plan(&p, &budget)
            )),
            Err(e) => bad.push(format!("{file}: {e}")),
        }
    }
    if bad.is_empty() {
        Outcome::Pass(format!(
            "published menu totals 343/450/691/192.3 = {day} kcal within the day budget; planner produced valid menus \
             for both item sets (note: the published lunch is flagged: {lunch_note})"
        ))
    } else {
        Outcome::Fail(bad.join("; "))
    }
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut dwt_err: f64 = 0.0;
    let mut emd_err: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.gen_range(64..=640);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let c = dwt(&x, Wavelet::Db4, 5).expect("dwt");
        let y = idwt(&c).expect("idwt");
        dwt_err = dwt_err.max(
            x.iter()
                .zip(&y)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        );
        let r = emd(&x, &EmdConfig::default()).reconstruct();
        emd_err = emd_err.max(
            x.iter()
                .zip(&r)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        );
    }

    let fs = 128.0;
    let x: Vec<f64> = (0..1280).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let cfg = StftConfig::default();
    let spec = stft(&x, &cfg, fs).expect("stft");
    let taps = cfg.window.taps(cfg.window_len);
    let mut parseval: f64 = 0.0;
    for m in 0..spec.frames() {
        let start = m * cfg.hop;
        let e: f64 = (0..cfg.window_len)
            .map(|i| (x[start + i] * taps[i]).powi(2))
            .sum();
        parseval = parseval.max((spec.frame_energy(m) - e).abs() / e);
    }

    let tone: Vec<f64> = (0..1280)
        .map(|i| (2.0 * std::f64::consts::PI * 10.0 * i as f64 / fs).sin())
        .collect();
    let bands = decompose_bands(&tone, &BandTable::default(), 4, fs).expect("bands");
    let energy = |v: &[f64]| v[128..1152].iter().map(|s| s * s).sum::<f64>();
    let total: f64 = bands.components.iter().map(|(_, v)| energy(v)).sum();
    let alpha_share = energy(bands.get(BandName::Alpha).expect("alpha band")) / total;

    let detail = format!(
        "DWT round trip {dwt_err:.2e}, EMD completeness {emd_err:.2e}, STFT Parseval {parseval:.2e}, \
         10 Hz alpha share {alpha_share:.3}"
    );
    if dwt_err < DWT_TOL
        && emd_err < EMD_TOL
        && parseval <= PARSEVAL_REL_TOL
        && alpha_share >= ALPHA_SHARE_MIN
    {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn brute_force_bins(w: &[f64]) -> usize {
    fn go(k: usize, w: &[f64], loads: &mut Vec<f64>, best: &mut usize) {
        if loads.len() >= *best {
            return;
        }
        if k == w.len() {
            *best = loads.len();
            return;
        }
        for b in 0..loads.len() {
            if loads[b] + w[k] <= 1.0 + 1e-9 {
                loads[b] += w[k];
                go(k + 1, w, loads, best);
                loads[b] -= w[k];
            }
        }
        loads.push(w[k]);
        go(k + 1, w, loads, best);
        loads.pop();
    }
    if w.is_empty() {
        return 0;
    }
    let mut best = w.len() + 1;
    go(0, w, &mut Vec::new(), &mut best);
    best
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut exact_bad = 0;
    let mut ffd_bad = 0;
    for _ in 0..500 {
        let n = rng.gen_range(1..=10);
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..=1.0)).collect();
        let inst = PackingInstance::unit(w.clone());
        let opt = brute_force_bins(&w);
        if exact_min_bins(&inst).map(|r| r.bin_count()) != Ok(opt) {
            exact_bad += 1;
        }
        let ffd = first_fit_decreasing(&inst).map_or(usize::MAX, |r| r.bin_count()) as f64;
        if ffd > 11.0 / 9.0 * opt as f64 + 1.0 {
            ffd_bad += 1;
        }
    }
    let detail =
        format!("500 instances: exact mismatches {exact_bad}, FFD bound violations {ffd_bad}");
    if exact_bad == 0 && ffd_bad == 0 {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn synthetic_config(subjects: usize, out: PathBuf) -> PipelineConfig {
    PipelineConfig {
        seed: 20240611,
        synthetic: Some(SyntheticInput {
            subjects,
            ..SyntheticInput::default()
        }),
        food_db: Some(data_dir().join("foods.json")),
        output_dir: Some(out),
        ..PipelineConfig::default()
    }
}

fn criterion_6() -> Outcome {
    let dir = tempfile::tempdir().expect("tempdir");
    let cfg = synthetic_config(25, dir.path().to_path_buf());
    let start = Instant::now();
    let out = match run_pipeline(&cfg) {
        Ok(o) => o,
        Err(e) => return Outcome::Fail(format!("pipeline failed: {e}")),
    };
    let elapsed = start.elapsed();
    let mut ok = elapsed <= SYNTH_TIME_LIMIT;
    let mut parts = Vec::new();
    for t in &out.metrics.targets {
        let acc = t.hierarchical.accuracy;
        let auc = t.hierarchical.auc.unwrap_or(f64::NAN);
        ok &= acc >= SYNTH_METRIC_MIN
            && auc >= SYNTH_METRIC_MIN
            && (acc - auc).abs() <= SYNTH_GAP_MAX;
        parts.push(format!("{} acc {acc:.3} auc {auc:.3}", t.target));
    }
    let detail = format!(
        "{} rows, {:.0} s; {}",
        out.metrics.rows,
        elapsed.as_secs_f64(),
        parts.join(", ")
    );
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn criterion_7() -> Outcome {
    let a = tempfile::tempdir().expect("tempdir");
    let b = tempfile::tempdir().expect("tempdir");
    let ra = run_pipeline(&synthetic_config(2, a.path().to_path_buf()));
    let rb = run_pipeline(&synthetic_config(2, b.path().to_path_buf()));
    let (ra, rb) = match (ra, rb) {
        (Ok(x), Ok(y)) => (x, y),
        (Err(e), _) | (_, Err(e)) => return Outcome::Fail(format!("pipeline failed: {e}")),
    };
    let mut differing = Vec::new();
    for (pa, pb) in ra.files.iter().zip(&rb.files) {
        if std::fs::read(pa).ok() != std::fs::read(pb).ok() {
            differing.push(
                pa.file_name()
                    .unwrap_or_default()
                    .to_string_lossy()
                    .into_owned(),
            );
        }
    }
    if differing.is_empty() && ra.files.len() == rb.files.len() {
        Outcome::Pass(format!(
            "{} output files byte-identical across two runs",
            ra.files.len()
        ))
    } else {
        Outcome::Fail(format!("differing files: {differing:?}"))
    }
}

fn main() {
    let only: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    // criterion 6 keeps its own limit inside
    let criteria: [(usize, fn() -> Outcome, u64); 7] = [
        (1, criterion_1, 1),
        (2, criterion_2, 1),
        (3, criterion_3, 1),
        (4, criterion_4, 30),
        (5, criterion_5, 60),
        (6, criterion_6, 600),
        (7, criterion_7, 600),
    ];
    let mut unexpected = 0;
    for (n, f, limit) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        let outcome = match outcome {
            Outcome::Pass(d) if secs > limit as f64 => {
                Outcome::Fail(format!("{d}; took {secs:.2} s, limit {limit} s"))
            }
            o => o,
        };
        match outcome {
            Outcome::Pass(d) => println!("criterion {n}: PASS - {d} [{secs:.2} s]"),
            Outcome::KnownFail(d) => {
                println!("criterion {n}: FAIL (known, documented) - {d} [{secs:.2} s]")
            }
            Outcome::Fail(d) => {
                unexpected += 1;
                println!("criterion {n}: FAIL - {d} [{secs:.2} s]");
            }
        }
    }
    if unexpected > 0 {
        std::process::exit(1);
    }
}
