//! End-to-end run: recordings → features → hierarchical ensembles → TOPSIS
//! ranking → full-day menu, with every artifact written as canonical JSON.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_io::{
    self, ChannelLayout, ClassProfile, EegRecording, FoodDatabase, LabelTriple, StimulusProtocol,
    SurveyLabels, Target,
};
use crate::features::{extract_features, FeatureConfig, FeatureMethod};
use crate::json;
use crate::learn::{
    ensemble_predictions, hierarchical_predict, majority_vote, save_bundle, stratified_split,
    subject_split, train_ensemble, Hyperparams, LabeledDataset, ModelBundle, RowId, Split, TieRule,
    TrainedEnsemble,
};
use crate::metrics::MetricsReport;
use crate::planner::{plan_menu, validate_plan, DayBudget, MealPlan, Violation};
use crate::preprocess::{
    preprocess_recording, select_channels, window_epochs, ChannelMode, PreprocessConfig,
};
use crate::recommend::{topsis, AffectivityRow, AffectivityTable, RankedFood, DEFAULT_WEIGHTS};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config field `{field}`: {message}")]
    Config {
        field: &'static str,
        message: String,
    },
    #[error("{stage} stage failed: {message}")]
    Stage {
        stage: &'static str,
        message: String,
    },
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

fn stage<E: fmt::Display>(stage: &'static str) -> impl Fn(E) -> PipelineError {
    move |e| PipelineError::Stage {
        stage,
        message: e.to_string(),
    }
}

pub const CONFIG_VERSION: u32 = 1;

/// One subject's recording and self-assessment files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionPaths {
    pub recording: PathBuf,
    pub labels: PathBuf,
}

/// Seeded synthetic subjects in place of recordings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticInput {
    pub subjects: usize,
    pub profile: ClassProfile,
}

impl Default for SyntheticInput {
    fn default() -> Self {
        Self {
            subjects: 1,
            profile: ClassProfile::alpha_profile(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Rows drawn per class.
    #[default]
    Stratified,
    /// Whole subjects held out.
    BySubject,
}

/// How per-epoch predictions become one criterion value per food.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionMode {
    /// 1 + majority label over the food's epochs, so values are 1 or 2.
    #[default]
    Label,
    /// Mean hierarchical score over the food's epochs.
    Score,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    /// Every random stage derives its seed from this one.
    pub seed: u64,
    pub sessions: Vec<SessionPaths>,
    pub synthetic: Option<SyntheticInput>,
    pub food_db: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub protocol: StimulusProtocol,
    pub channel_mode: ChannelMode,
    pub preprocess: PreprocessConfig,
    pub epoch_seconds: f64,
    pub features: FeatureConfig,
    pub hyperparams: Hyperparams,
    pub tie_rule: TieRule,
    pub split: SplitMode,
    pub train_fraction: f64,
    pub positive_class: u8,
    pub weights: Vec<f64>,
    pub top_k: usize,
    pub budget: DayBudget,
    pub criterion_mode: CriterionMode,
    /// Subject whose predicted affectivity drives the recommendation.
    pub recommend_subject: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seed: 0,
            sessions: Vec::new(),
            synthetic: None,
            food_db: None,
            output_dir: None,
            protocol: StimulusProtocol::default(),
            channel_mode: ChannelMode::All,
            preprocess: PreprocessConfig::default(),
            epoch_seconds: 1.0,
            features: FeatureConfig::default(),
            hyperparams: Hyperparams::default(),
            tie_rule: TieRule::default(),
            split: SplitMode::default(),
            train_fraction: 0.7,
            positive_class: 0,
            weights: DEFAULT_WEIGHTS.to_vec(),
            top_k: 5,
            budget: DayBudget::default(),
            criterion_mode: CriterionMode::default(),
            recommend_subject: 0,
        }
    }
}

fn config_err(field: &'static str, message: impl Into<String>) -> PipelineError {
    PipelineError::Config {
        field,
        message: message.into(),
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| config_err("<file>", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err("<file>", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Path overrides from `AMRP_FOOD_DB`, `AMRP_OUTPUT_DIR`, and the pair
    /// `AMRP_RECORDING` + `AMRP_LABELS` (which replaces the session list).
    pub fn apply_env<F: Fn(&str) -> Option<String>>(&mut self, var: F) {
        if let Some(v) = var("AMRP_FOOD_DB") {
            self.food_db = Some(v.into());
        }
        if let Some(v) = var("AMRP_OUTPUT_DIR") {
            self.output_dir = Some(v.into());
        }
        if let (Some(r), Some(l)) = (var("AMRP_RECORDING"), var("AMRP_LABELS")) {
            self.sessions = vec![SessionPaths {
                recording: r.into(),
                labels: l.into(),
            }];
        }
    }

    pub fn apply_process_env(&mut self) {
        self.apply_env(|k| std::env::var(k).ok());
    }

    /// Checks everything that can be checked before the run starts.
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(config_err(
                "version",
                format!(
                    "version {} is not supported (expected {CONFIG_VERSION})",
                    self.version
                ),
            ));
        }
        match (&self.synthetic, self.sessions.is_empty()) {
            (Some(_), false) => {
                return Err(config_err(
                    "sessions",
                    "give either sessions or synthetic input, not both",
                ))
            }
            (None, true) => {
                return Err(config_err(
                    "sessions",
                    "no recordings and no synthetic input",
                ))
            }
            (Some(s), true) if s.subjects == 0 => {
                return Err(config_err("synthetic.subjects", "must be at least 1"))
            }
            _ => {}
        }
        for (i, s) in self.sessions.iter().enumerate() {
            for (field, p) in [
                ("sessions.recording", &s.recording),
                ("sessions.labels", &s.labels),
            ] {
                if !p.is_file() {
                    return Err(config_err(
                        field,
                        format!("session {i}: {} not found", p.display()),
                    ));
                }
            }
        }
        match &self.food_db {
            None => return Err(config_err("food_db", "missing")),
            Some(p) if !p.is_file() => {
                return Err(config_err("food_db", format!("{} not found", p.display())))
            }
            _ => {}
        }
        if self.output_dir.is_none() {
            return Err(config_err("output_dir", "missing"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(config_err("train_fraction", "must lie in (0, 1)"));
        }
        if self.positive_class > 1 {
            return Err(config_err("positive_class", "must be 0 or 1"));
        }
        if self.weights.len() != 3 || self.weights.iter().any(|w| !(*w > 0.0)) {
            return Err(config_err(
                "weights",
                "need three positive weights (like, excitement, feelings)",
            ));
        }
        if self.top_k == 0 {
            return Err(config_err("top_k", "must be at least 1"));
        }
        if !(self.epoch_seconds > 0.0) {
            return Err(config_err("epoch_seconds", "must be positive"));
        }
        self.budget
            .validate()
            .map_err(|e| config_err("budget", e.to_string()))?;
        self.protocol
            .validate()
            .map_err(|e| config_err("protocol", e.to_string()))?;
        Ok(())
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent seed for one stage (and index within it).
pub fn stage_seed(seed: u64, stage: &str, index: u64) -> u64 {
    let tag = stage.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x100_0000_01b3)
    });
    splitmix(splitmix(seed ^ tag) ^ index)
}

/// A subject's raw session.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub subject: usize,
    pub recording: EegRecording,
    pub labels: SurveyLabels,
}

pub fn load_sessions(cfg: &PipelineConfig) -> Result<Vec<Session>> {
    if let Some(syn) = &cfg.synthetic {
        let layout = ChannelLayout::default();
        return (0..syn.subjects)
            .map(|s| {
                let (recording, labels) = data_io::synthesize_session(
                    &cfg.protocol,
                    &layout,
                    &syn.profile,
                    stage_seed(cfg.seed, "synth", s as u64),
                )
                .map_err(stage("synthesis"))?;
                Ok(Session {
                    subject: s,
                    recording,
                    labels,
                })
            })
            .collect();
    }
    cfg.sessions
        .iter()
        .enumerate()
        .map(|(s, p)| {
            let recording = data_io::load_recording(
                &p.recording,
                &ChannelLayout::default(),
                cfg.protocol.sample_rate_hz,
            )
            .map_err(stage("load"))?
            .with_protocol(Some(cfg.protocol));
            let labels = data_io::load_labels(&p.labels).map_err(stage("load"))?;
            Ok(Session {
                subject: s,
                recording,
                labels,
            })
        })
        .collect()
}

/// Features of one feature method, row-aligned with [`FeatureSet::provenance`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodFeatures {
    pub method: FeatureMethod,
    pub rows: Vec<Vec<f64>>,
}

/// Per-epoch features of every method with the epochs' labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub channel_mode: ChannelMode,
    pub provenance: Vec<RowId>,
    pub labels: Vec<LabelTriple>,
    pub methods: Vec<MethodFeatures>,
}

impl FeatureSet {
    pub fn len(&self) -> usize {
        self.provenance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.provenance.is_empty()
    }

    pub fn labels(&self, target: Target) -> Vec<u8> {
        self.labels.iter().map(|l| l.get(target)).collect()
    }

    /// One row-aligned dataset per method.
    pub fn datasets(&self, target: Target) -> Result<Vec<LabeledDataset>> {
        let labels = self.labels(target);
        self.methods
            .iter()
            .map(|m| {
                LabeledDataset::new(
                    target,
                    m.method,
                    m.rows.clone(),
                    labels.clone(),
                    self.provenance.clone(),
                )
                .map_err(stage("dataset"))
            })
            .collect()
    }

    pub fn subset(&self, idx: &[usize]) -> FeatureSet {
        FeatureSet {
            channel_mode: self.channel_mode,
            provenance: idx.iter().map(|&i| self.provenance[i]).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            methods: self
                .methods
                .iter()
                .map(|m| MethodFeatures {
                    method: m.method,
                    rows: idx.iter().map(|&i| m.rows[i].clone()).collect(),
                })
                .collect(),
        }
    }

    pub fn subject_rows(&self, subject: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.provenance[i].subject == subject)
            .collect()
    }
}

/// Channel selection, cleaning, segmentation, epoching and feature extraction
/// for every session.
pub fn build_feature_set(sessions: &[Session], cfg: &PipelineConfig) -> Result<FeatureSet> {
    let mut set = FeatureSet {
        channel_mode: cfg.channel_mode,
        provenance: Vec::new(),
        labels: Vec::new(),
        methods: FeatureMethod::ALL
            .iter()
            .map(|&method| MethodFeatures {
                method,
                rows: Vec::new(),
            })
            .collect(),
    };
    for s in sessions {
        let rec = select_channels(&s.recording, cfg.channel_mode).map_err(stage("preprocess"))?;
        let rec = preprocess_recording(&rec, &cfg.preprocess).map_err(stage("preprocess"))?;
        let protocol = rec.protocol().copied().unwrap_or(cfg.protocol);
        let fs = rec.sample_rate_hz();
        let trials = data_io::segment_trials(&rec, &protocol).map_err(stage("segment"))?;
        for trial in &trials {
            let labels = *s
                .labels
                .get(trial.food_index)
                .ok_or_else(|| PipelineError::Stage {
                    stage: "segment",
                    message: format!(
                        "subject {}: no labels for food {}",
                        s.subject, trial.food_index
                    ),
                })?;
            for epoch in window_epochs(trial, cfg.epoch_seconds, fs).map_err(stage("preprocess"))? {
                for m in set.methods.iter_mut() {
                    let v = extract_features(&epoch.samples, m.method, &cfg.features, fs)
                        .map_err(stage("features"))?;
                    m.rows.push(v.values);
                }
                set.provenance.push(RowId {
                    subject: s.subject,
                    food: trial.food_index,
                    epoch: epoch.window_index,
                });
                set.labels.push(labels);
            }
        }
    }
    Ok(set)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub method: FeatureMethod,
    pub report: MetricsReport,
}

/// Held-out performance for one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetMetrics {
    pub target: Target,
    pub train_rows: usize,
    pub test_rows: usize,
    pub hierarchical: MetricsReport,
    pub per_method: Vec<MethodMetrics>,
}

pub fn split_rows(set: &FeatureSet, target: Target, cfg: &PipelineConfig) -> Result<Split> {
    let labels = set.labels(target);
    let seed = stage_seed(cfg.seed, "split", 0);
    match cfg.split {
        SplitMode::Stratified => stratified_split(&labels, cfg.train_fraction, seed),
        SplitMode::BySubject => subject_split(&set.provenance, &labels, cfg.train_fraction, seed),
    }
    .map_err(stage("split"))
}

/// Metrics of a trained ensemble on `test` rows.
pub fn evaluate(
    ens: &TrainedEnsemble,
    test: &[LabeledDataset],
    positive_class: u8,
) -> Result<(MetricsReport, Vec<MethodMetrics>)> {
    let preds = ensemble_predictions(ens, test).map_err(stage("evaluate"))?;
    let actual = &test[0].labels;
    let labels: Vec<u8> = preds.iter().map(|p| p.label).collect();
    let scores: Vec<f64> = preds.iter().map(|p| p.score).collect();
    let hierarchical = MetricsReport::from_predictions(&labels, &scores, actual, positive_class)
        .map_err(stage("evaluate"))?;
    let per_method = ens
        .methods
        .iter()
        .enumerate()
        .map(|(k, mm)| {
            let l: Vec<u8> = preds.iter().map(|p| p.per_method[k].1.label).collect();
            let s: Vec<f64> = preds.iter().map(|p| p.per_method[k].1.score).collect();
            MetricsReport::from_predictions(&l, &s, actual, positive_class)
                .map(|report| MethodMetrics {
                    method: mm.method,
                    report,
                })
                .map_err(stage("evaluate"))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((hierarchical, per_method))
}

/// Splits, trains one hierarchical ensemble per target and scores it on the
/// held-out rows.
pub fn train_and_evaluate(
    set: &FeatureSet,
    cfg: &PipelineConfig,
) -> Result<(ModelBundle, Vec<TargetMetrics>)> {
    let mut ensembles = Vec::new();
    let mut metrics = Vec::new();
    for (t, target) in Target::ALL.into_iter().enumerate() {
        let split = split_rows(set, target, cfg)?;
        let all = set.datasets(target)?;
        let train: Vec<LabeledDataset> = all.iter().map(|d| d.subset(&split.train)).collect();
        let test: Vec<LabeledDataset> = all.iter().map(|d| d.subset(&split.test)).collect();
        log::info!(
            "training {target}: {} train rows, {} test rows",
            split.train.len(),
            split.test.len()
        );
        let ens = train_ensemble(
            &train,
            &cfg.hyperparams,
            cfg.tie_rule,
            stage_seed(cfg.seed, "model", t as u64),
        )
        .map_err(stage("train"))?;
        let (hierarchical, per_method) = evaluate(&ens, &test, cfg.positive_class)?;
        log::info!("{target}: accuracy {:.4}", hierarchical.accuracy);
        metrics.push(TargetMetrics {
            target,
            train_rows: split.train.len(),
            test_rows: split.test.len(),
            hierarchical,
            per_method,
        });
        ensembles.push(ens);
    }
    Ok((
        ModelBundle::new(cfg.seed, cfg.hyperparams, ensembles),
        metrics,
    ))
}

/// Per-food criterion values of one subject from the ensembles' predictions.
pub fn affectivity_table(
    bundle: &ModelBundle,
    set: &FeatureSet,
    subject: usize,
    foods: &FoodDatabase,
    mode: CriterionMode,
) -> Result<AffectivityTable> {
    let rows = set.subject_rows(subject);
    if rows.is_empty() {
        return Err(config_err(
            "recommend_subject",
            format!("subject {subject} has no epochs"),
        ));
    }
    let mut by_food: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &i in &rows {
        by_food.entry(set.provenance[i].food).or_default().push(i);
    }
    let mut table = AffectivityTable::default();
    for (food, idx) in by_food {
        let item = foods
            .items()
            .get(food)
            .ok_or_else(|| PipelineError::Stage {
                stage: "recommend",
                message: format!(
                    "food index {food} is beyond the {}-item food database",
                    foods.len()
                ),
            })?;
        let mut values = [0.0; 3];
        for (t, target) in Target::ALL.into_iter().enumerate() {
            let ens = bundle
                .ensemble(target)
                .ok_or_else(|| PipelineError::Stage {
                    stage: "recommend",
                    message: format!("model bundle has no ensemble for {target}"),
                })?;
            let mut labels = Vec::with_capacity(idx.len());
            let mut scores = Vec::with_capacity(idx.len());
            for &i in &idx {
                let vectors: Vec<(FeatureMethod, &[f64])> = set
                    .methods
                    .iter()
                    .map(|m| (m.method, m.rows[i].as_slice()))
                    .collect();
                let p = hierarchical_predict(ens, &vectors).map_err(stage("recommend"))?;
                labels.push(p.label);
                scores.push(p.score);
            }
            values[t] = match mode {
                CriterionMode::Label => 1.0 + majority_vote(&labels, Some(&scores)) as f64,
                CriterionMode::Score => scores.iter().sum::<f64>() / scores.len() as f64,
            };
        }
        table.rows.push(AffectivityRow {
            food_id: item.id.clone(),
            name: item.name.clone(),
            like: values[0],
            excitement: values[1],
            feelings: values[2],
        });
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub weights: Vec<f64>,
    pub top: Vec<RankedFood>,
    /// Closeness of every food, in table order.
    pub all: Vec<RankedFood>,
}

pub fn recommend(table: &AffectivityTable, weights: &[f64], k: usize) -> Result<Recommendation> {
    let m = table.decision_matrix().map_err(stage("recommend"))?;
    let res = topsis(&m, weights).map_err(stage("recommend"))?;
    let entry = |i: usize| RankedFood {
        food_id: table.rows[i].food_id.clone(),
        name: table.rows[i].display_name().to_string(),
        score: res.scores.closeness[i],
    };
    Ok(Recommendation {
        weights: res.weights.clone(),
        top: res
            .scores
            .ranking
            .iter()
            .take(k)
            .map(|&i| entry(i))
            .collect(),
        all: (0..table.rows.len()).map(entry).collect(),
    })
}

/// Menu over the ranked foods, each scored by its TOPSIS closeness.
pub fn plan_from_recommendation(
    rec: &Recommendation,
    foods: &FoodDatabase,
    budget: &DayBudget,
) -> Result<MealPlan> {
    let scored = rec
        .all
        .iter()
        .map(|r| {
            foods
                .get(&r.food_id)
                .map(|f| (f.clone(), r.score))
                .ok_or_else(|| PipelineError::Stage {
                    stage: "plan",
                    message: format!("food `{}` is not in the food database", r.food_id),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    plan_menu(&scored, budget).map_err(stage("plan"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub food_id: String,
    pub name: String,
    pub kcal: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotReport {
    pub slot: data_io::MealSlot,
    pub items: Vec<PlanEntry>,
    pub subtotal: f64,
}

/// Serialized form of a plan with its totals and any violations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub slots: Vec<SlotReport>,
    pub day_total: f64,
    pub objective: f64,
    pub violations: Vec<Violation>,
}

impl PlanReport {
    pub fn new(plan: &MealPlan, budget: &DayBudget) -> Self {
        Self {
            slots: plan
                .slots
                .iter()
                .map(|s| SlotReport {
                    slot: s.slot,
                    items: s
                        .items
                        .iter()
                        .map(|f| PlanEntry {
                            food_id: f.food.id.clone(),
                            name: f.food.name.clone(),
                            kcal: f.kcal,
                            score: f.score,
                        })
                        .collect(),
                    subtotal: s.subtotal(),
                })
                .collect(),
            day_total: plan.day_total(),
            objective: plan.objective(),
            violations: validate_plan(plan, budget),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub positive_class: u8,
    pub split: SplitMode,
    pub train_fraction: f64,
    pub rows: usize,
    pub targets: Vec<TargetMetrics>,
}

pub const AFFECTIVITY_FILE: &str = "affectivity.json";
pub const RECOMMENDATION_FILE: &str = "recommendation.json";
pub const PLAN_FILE: &str = "plan.json";
pub const PLAN_TABLE_FILE: &str = "plan.txt";
pub const METRICS_FILE: &str = "metrics.json";
pub const MODEL_FILE: &str = "model.amrp-model";

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub affectivity: AffectivityTable,
    pub recommendation: Recommendation,
    pub plan: MealPlan,
    pub metrics: MetricsSummary,
    pub bundle: ModelBundle,
    pub files: Vec<PathBuf>,
}

fn write_json<T: Serialize>(
    dir: &Path,
    name: &str,
    value: &T,
    files: &mut Vec<PathBuf>,
) -> Result<()> {
    let path = dir.join(name);
    json::write_canonical(&path, value).map_err(|e| PipelineError::Stage {
        stage: "output",
        message: format!("{}: {e}", path.display()),
    })?;
    files.push(path);
    Ok(())
}

/// Runs every stage in order and writes the artifacts to `output_dir`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    let food_path = cfg.food_db.as_deref().expect("validated");
    let out_dir = cfg.output_dir.as_deref().expect("validated");
    let foods =
        data_io::load_food_db(food_path).map_err(|e| config_err("food_db", e.to_string()))?;

    let sessions = load_sessions(cfg)?;
    if !sessions.iter().any(|s| s.subject == cfg.recommend_subject) {
        return Err(config_err(
            "recommend_subject",
            format!(
                "subject {} is not among the {} sessions",
                cfg.recommend_subject,
                sessions.len()
            ),
        ));
    }
    log::info!("extracting features from {} session(s)", sessions.len());
    let set = build_feature_set(&sessions, cfg)?;
    drop(sessions);
    let (bundle, targets) = train_and_evaluate(&set, cfg)?;
    let affectivity = affectivity_table(
        &bundle,
        &set,
        cfg.recommend_subject,
        &foods,
        cfg.criterion_mode,
    )?;
    let recommendation = recommend(&affectivity, &cfg.weights, cfg.top_k)?;
    let plan = plan_from_recommendation(&recommendation, &foods, &cfg.budget)?;
    let metrics = MetricsSummary {
        positive_class: cfg.positive_class,
        split: cfg.split,
        train_fraction: cfg.train_fraction,
        rows: set.len(),
        targets,
    };

    std::fs::create_dir_all(out_dir).map_err(|e| PipelineError::Stage {
        stage: "output",
        message: format!("{}: {e}", out_dir.display()),
    })?;
    let mut files = Vec::new();
    write_json(out_dir, AFFECTIVITY_FILE, &affectivity, &mut files)?;
    write_json(out_dir, RECOMMENDATION_FILE, &recommendation, &mut files)?;
    write_json(
        out_dir,
        PLAN_FILE,
        &PlanReport::new(&plan, &cfg.budget),
        &mut files,
    )?;
    write_json(out_dir, METRICS_FILE, &metrics, &mut files)?;
    let table_path = out_dir.join(PLAN_TABLE_FILE);
    std::fs::write(&table_path, crate::planner::render_plan(&plan)).map_err(stage("output"))?;
    files.push(table_path);
    let model_path = out_dir.join(MODEL_FILE);
    save_bundle(&model_path, &bundle).map_err(stage("output"))?;
    files.push(model_path);

    Ok(PipelineOutput {
        affectivity,
        recommendation,
        plan,
        metrics,
        bundle,
        files,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_seeds_differ() {
        assert_ne!(stage_seed(1, "split", 0), stage_seed(1, "model", 0));
        assert_ne!(stage_seed(1, "model", 0), stage_seed(1, "model", 1));
        assert_eq!(stage_seed(7, "synth", 3), stage_seed(7, "synth", 3));
    }

    #[test]
    fn missing_fields_are_named() {
        let mut cfg = PipelineConfig {
            synthetic: Some(SyntheticInput::default()),
            ..PipelineConfig::default()
        };
        match cfg.validate() {
            Err(PipelineError::Config { field, .. }) => assert_eq!(field, "food_db"),
            other => panic!("unexpected {other:?}"),
        }
        cfg.food_db = Some("/definitely/not/here.json".into());
        assert!(matches!(
            cfg.validate(),
            Err(PipelineError::Config {
                field: "food_db",
                ..
            })
        ));
    }

    #[test]
    fn env_overrides_paths_only() {
        let mut cfg = PipelineConfig::default();
        let seed = cfg.seed;
        cfg.apply_env(|k| match k {
            "AMRP_FOOD_DB" => Some("foods.json".into()),
            "AMRP_RECORDING" => Some("r.csv".into()),
            "AMRP_LABELS" => Some("l.csv".into()),
            _ => None,
        });
        assert_eq!(cfg.food_db, Some(PathBuf::from("foods.json")));
        assert_eq!(cfg.sessions.len(), 1);
        assert_eq!(cfg.output_dir, None);
        assert_eq!(cfg.seed, seed);
    }

    #[test]
    fn config_json_round_trip_and_unknown_fields() {
        let cfg = PipelineConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(PipelineConfig::from_json(&text).unwrap(), cfg);
        assert!(PipelineConfig::from_json("{\"sead\": 3}").is_err());
        let partial = PipelineConfig::from_json("{\"seed\": 9}").unwrap();
        assert_eq!(partial.seed, 9);
        assert_eq!(partial.train_fraction, 0.7);
    }
}
