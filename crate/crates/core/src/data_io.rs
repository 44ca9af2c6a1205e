//! EEG recordings, survey labels and the nutrition database.
//!
//! Recordings are stored as CSV with a `t` column followed by one column per
//! electrode, one row per sample instant, values in microvolts. Sample values
//! are written with Rust's shortest round-trip float formatting, so a file
//! written by [`write_recording`] reloads bit-for-bit.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preprocess::{self, BandName, BandTable};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("file not found: {0}")]
    MissingFile(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("channel mismatch: {0}")]
    ChannelMismatch(String),
    #[error("label value {value} out of range at row {row} (expected 0 or 1)")]
    OutOfRangeLabel { row: usize, value: String },
    #[error("duplicate food index {0}")]
    DuplicateFoodIndex(usize),
    #[error("food `{0}` has non-positive calories")]
    NonPositiveCalories(String),
    #[error("food `{0}` has no allowed meal slots")]
    EmptySlots(String),
    #[error("duplicate food id `{0}`")]
    DuplicateId(String),
    #[error("invalid class profile: {0}")]
    InvalidProfile(String),
    #[error("recording too short: protocol needs {needed} samples, recording has {available}")]
    RecordingTooShort { needed: usize, available: usize },
    #[error("invalid channel layout: {0}")]
    InvalidLayout(String),
    #[error("invalid stimulus protocol: {0}")]
    InvalidProtocol(String),
    #[error("invalid recording: {0}")]
    InvalidRecording(String),
    #[error("invalid food database: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = DataError> = std::result::Result<T, E>;

fn open(path: &Path) -> Result<BufReader<File>> {
    match File::open(path) {
        Ok(f) => Ok(BufReader::new(f)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            Err(DataError::MissingFile(path.display().to_string()))
        }
        Err(source) => Err(DataError::Io {
            path: path.display().to_string(),
            source,
        }),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })
}

fn io_err(source: std::io::Error) -> DataError {
    DataError::Io {
        path: "<stream>".into(),
        source,
    }
}

/// Electrode names in column order, plus the reference nodes and the frontal subset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelLayout {
    names: Vec<String>,
    reference_names: Vec<String>,
    frontal_subset: Vec<String>,
}

impl ChannelLayout {
    pub fn new(
        names: Vec<String>,
        reference_names: Vec<String>,
        frontal_subset: Vec<String>,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(DataError::InvalidLayout(format!("duplicate channel {n}")));
            }
        }
        if let Some(f) = frontal_subset.iter().find(|f| !seen.contains(f.as_str())) {
            return Err(DataError::InvalidLayout(format!(
                "frontal channel {f} not in layout"
            )));
        }
        Ok(Self {
            names,
            reference_names,
            frontal_subset,
        })
    }

    /// The 14-electrode consumer headset layout with P3/P4 references.
    ///
    /// AF4 completes the 13 electrode names listed for the headset.
    pub fn emotiv_epoc() -> Self {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        Self {
            names: s(&[
                "AF3", "F7", "F3", "FC5", "T7", "P7", "O1", "O2", "P8", "T8", "FC6", "F4", "F8",
                "AF4",
            ]),
            reference_names: s(&["P3", "P4"]),
            frontal_subset: s(&["AF3", "AF4", "F3", "F4", "F7", "F8", "FC5", "FC6"]),
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn reference_names(&self) -> &[String] {
        &self.reference_names
    }

    pub fn frontal_subset(&self) -> &[String] {
        &self.frontal_subset
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Layout restricted to `keep` (given as indices into `names`), preserving order.
    pub(crate) fn restricted(&self, keep: &[usize]) -> Self {
        let names: Vec<String> = keep.iter().map(|&i| self.names[i].clone()).collect();
        let frontal_subset = self
            .frontal_subset
            .iter()
            .filter(|f| names.contains(f))
            .cloned()
            .collect();
        Self {
            names,
            reference_names: self.reference_names.clone(),
            frontal_subset,
        }
    }
}

impl Default for ChannelLayout {
    fn default() -> Self {
        Self::emotiv_epoc()
    }
}

/// Timing of the picture slideshow: each food is shown, then a calm screen follows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StimulusProtocol {
    pub food_count: usize,
    pub stimulus_seconds: f64,
    pub calm_seconds: f64,
    pub sample_rate_hz: f64,
}

impl Default for StimulusProtocol {
    fn default() -> Self {
        Self {
            food_count: 40,
            stimulus_seconds: 10.0,
            calm_seconds: 17.0,
            sample_rate_hz: 128.0,
        }
    }
}

fn whole_samples(seconds: f64, rate: f64, what: &str) -> Result<usize> {
    let n = seconds * rate;
    if !(n.is_finite() && n > 0.0) || (n - n.round()).abs() > 1e-9 {
        return Err(DataError::InvalidProtocol(format!(
            "{what} of {seconds} s at {rate} Hz is not a whole number of samples"
        )));
    }
    Ok(n.round() as usize)
}

impl StimulusProtocol {
    pub fn validate(&self) -> Result<()> {
        if self.food_count == 0 {
            return Err(DataError::InvalidProtocol(
                "food_count must be positive".into(),
            ));
        }
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(DataError::InvalidProtocol(
                "sample rate must be positive".into(),
            ));
        }
        self.stimulus_samples()?;
        self.calm_samples()?;
        Ok(())
    }

    pub fn stimulus_samples(&self) -> Result<usize> {
        whole_samples(
            self.stimulus_seconds,
            self.sample_rate_hz,
            "stimulus window",
        )
    }

    pub fn calm_samples(&self) -> Result<usize> {
        whole_samples(self.calm_seconds, self.sample_rate_hz, "calm window")
    }

    /// Samples between the starts of consecutive trials.
    pub fn stride_samples(&self) -> Result<usize> {
        Ok(self.stimulus_samples()? + self.calm_samples()?)
    }

    /// Full session length including the calm block after the last food.
    pub fn session_samples(&self) -> Result<usize> {
        Ok(self.food_count * self.stride_samples()?)
    }

    /// Minimum length a recording needs for every stimulus window to be present.
    pub fn required_samples(&self) -> Result<usize> {
        Ok((self.food_count - 1) * self.stride_samples()? + self.stimulus_samples()?)
    }
}

/// Channel-major EEG samples in microvolts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EegRecording {
    layout: ChannelLayout,
    sample_rate_hz: f64,
    samples: Vec<Vec<f64>>,
    protocol: Option<StimulusProtocol>,
}

impl EegRecording {
    pub fn new(
        layout: ChannelLayout,
        sample_rate_hz: f64,
        samples: Vec<Vec<f64>>,
        protocol: Option<StimulusProtocol>,
    ) -> Result<Self> {
        if samples.len() != layout.len() {
            return Err(DataError::InvalidRecording(format!(
                "{} sample rows for {} channels",
                samples.len(),
                layout.len()
            )));
        }
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(DataError::InvalidRecording(
                "sample rate must be positive".into(),
            ));
        }
        if let Some(first) = samples.first() {
            let n = first.len();
            if samples.iter().any(|row| row.len() != n) {
                return Err(DataError::InvalidRecording(
                    "channel rows differ in length".into(),
                ));
            }
        }
        if samples.iter().flatten().any(|v| !v.is_finite()) {
            return Err(DataError::InvalidRecording(
                "non-finite sample value".into(),
            ));
        }
        Ok(Self {
            layout,
            sample_rate_hz,
            samples,
            protocol,
        })
    }

    pub fn layout(&self) -> &ChannelLayout {
        &self.layout
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn channel(&self, idx: usize) -> &[f64] {
        &self.samples[idx]
    }

    pub fn protocol(&self) -> Option<&StimulusProtocol> {
        self.protocol.as_ref()
    }

    pub fn with_protocol(mut self, protocol: Option<StimulusProtocol>) -> Self {
        self.protocol = protocol;
        self
    }

    pub fn channel_count(&self) -> usize {
        self.samples.len()
    }

    pub fn len(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Rebuilds the recording with each channel passed through `f`.
    pub fn map_channels<E>(
        &self,
        mut f: impl FnMut(&[f64]) -> std::result::Result<Vec<f64>, E>,
    ) -> std::result::Result<Self, E> {
        let samples = self
            .samples
            .iter()
            .map(|c| f(c))
            .collect::<std::result::Result<Vec<_>, E>>()?;
        Ok(Self {
            layout: self.layout.clone(),
            sample_rate_hz: self.sample_rate_hz,
            samples,
            protocol: self.protocol,
        })
    }

    pub(crate) fn restricted(&self, keep: &[usize]) -> Self {
        Self {
            layout: self.layout.restricted(keep),
            sample_rate_hz: self.sample_rate_hz,
            samples: keep.iter().map(|&i| self.samples[i].clone()).collect(),
            protocol: self.protocol,
        }
    }
}

pub fn load_recording(
    path: &Path,
    layout: &ChannelLayout,
    sample_rate_hz: f64,
) -> Result<EegRecording> {
    read_recording(open(path)?, layout, sample_rate_hz)
}

/// Parses an EEG CSV. Columns are matched to the layout by header name, so
/// files with permuted columns load into layout order.
pub fn read_recording<R: Read>(
    reader: R,
    layout: &ChannelLayout,
    sample_rate_hz: f64,
) -> Result<EegRecording> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| DataError::MalformedRow {
            row: 0,
            reason: e.to_string(),
        })?
        .clone();
    let cols: Vec<&str> = header.iter().collect();
    if cols.first() != Some(&"t") {
        return Err(DataError::ChannelMismatch(
            "first header column must be `t`".into(),
        ));
    }
    let mut mapping = Vec::with_capacity(cols.len() - 1);
    for name in &cols[1..] {
        match layout.index_of(name) {
            Some(i) => mapping.push(i),
            None => {
                return Err(DataError::ChannelMismatch(format!(
                    "column `{name}` is not in the channel layout"
                )))
            }
        }
    }
    let distinct: HashSet<_> = mapping.iter().collect();
    if distinct.len() != mapping.len() || mapping.len() != layout.len() {
        return Err(DataError::ChannelMismatch(format!(
            "header has {} channel columns, layout expects {} distinct channels",
            mapping.len(),
            layout.len()
        )));
    }

    let mut samples = vec![Vec::new(); layout.len()];
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| DataError::MalformedRow {
            row,
            reason: e.to_string(),
        })?;
        if rec.len() != cols.len() {
            return Err(DataError::MalformedRow {
                row,
                reason: format!("expected {} columns, found {}", cols.len(), rec.len()),
            });
        }
        for (j, cell) in rec.iter().enumerate().skip(1) {
            let v: f64 = cell.parse().map_err(|_| DataError::MalformedRow {
                row,
                reason: format!("non-numeric cell `{cell}` in column `{}`", cols[j]),
            })?;
            if !v.is_finite() {
                return Err(DataError::MalformedRow {
                    row,
                    reason: format!("non-finite value in column `{}`", cols[j]),
                });
            }
            samples[mapping[j - 1]].push(v);
        }
    }
    EegRecording::new(layout.clone(), sample_rate_hz, samples, None)
}

pub fn write_recording(path: &Path, rec: &EegRecording) -> Result<()> {
    let mut w = create(path)?;
    write_recording_to(&mut w, rec)?;
    w.flush().map_err(io_err)
}

pub fn write_recording_to<W: Write>(w: &mut W, rec: &EegRecording) -> Result<()> {
    let mut line = String::from("t");
    for n in rec.layout.names() {
        line.push(',');
        line.push_str(n);
    }
    writeln!(w, "{line}").map_err(io_err)?;
    for i in 0..rec.len() {
        line.clear();
        line.push_str(&(i as f64 / rec.sample_rate_hz).to_string());
        for ch in &rec.samples {
            line.push(',');
            line.push_str(&ch[i].to_string());
        }
        writeln!(w, "{line}").map_err(io_err)?;
    }
    Ok(())
}

/// The three affectivity targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Like,
    Excitement,
    Feelings,
}

impl Target {
    pub const ALL: [Target; 3] = [Target::Like, Target::Excitement, Target::Feelings];

    /// Names of the label-0 and label-1 classes as printed in survey reports.
    pub fn class_names(self) -> [&'static str; 2] {
        match self {
            Target::Like => ["Least Like", "Most Like"],
            Target::Excitement => ["Least Excitement", "Most Excitement"],
            Target::Feelings => ["Disgust", "Pleasant"],
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Target::Like => "like",
            Target::Excitement => "excitement",
            Target::Feelings => "feelings",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelTriple {
    pub like: u8,
    pub excitement: u8,
    pub feelings: u8,
}

impl LabelTriple {
    pub fn get(&self, target: Target) -> u8 {
        match target {
            Target::Like => self.like,
            Target::Excitement => self.excitement,
            Target::Feelings => self.feelings,
        }
    }
}

/// Self-assessment answers, one triple per food index.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyLabels {
    by_food: BTreeMap<usize, LabelTriple>,
}

impl SurveyLabels {
    pub fn insert(&mut self, food: usize, labels: LabelTriple) -> Result<()> {
        if self.by_food.insert(food, labels).is_some() {
            return Err(DataError::DuplicateFoodIndex(food));
        }
        Ok(())
    }

    pub fn get(&self, food: usize) -> Option<&LabelTriple> {
        self.by_food.get(&food)
    }

    pub fn len(&self) -> usize {
        self.by_food.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_food.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &LabelTriple)> {
        self.by_food.iter().map(|(k, v)| (*k, v))
    }
}

pub fn load_labels(path: &Path) -> Result<SurveyLabels> {
    read_labels(open(path)?)
}

pub fn read_labels<R: Read>(reader: R) -> Result<SurveyLabels> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = SurveyLabels::default();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| DataError::MalformedRow {
            row,
            reason: e.to_string(),
        })?;
        if rec.len() != 4 {
            return Err(DataError::MalformedRow {
                row,
                reason: format!("expected 4 columns, found {}", rec.len()),
            });
        }
        let food: usize = rec[0].parse().map_err(|_| DataError::MalformedRow {
            row,
            reason: format!("bad food index `{}`", &rec[0]),
        })?;
        let bit = |cell: &str| -> Result<u8> {
            match cell {
                "0" => Ok(0),
                "1" => Ok(1),
                other => Err(DataError::OutOfRangeLabel {
                    row,
                    value: other.to_string(),
                }),
            }
        };
        out.insert(
            food,
            LabelTriple {
                like: bit(&rec[1])?,
                excitement: bit(&rec[2])?,
                feelings: bit(&rec[3])?,
            },
        )?;
    }
    Ok(out)
}

pub fn write_labels(path: &Path, labels: &SurveyLabels) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "food,like,excitement,feelings").map_err(io_err)?;
    for (food, l) in labels.iter() {
        writeln!(w, "{food},{},{},{}", l.like, l.excitement, l.feelings).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MealSlot {
    Breakfast,
    Lunch,
    Dinner,
    Snacks,
}

impl MealSlot {
    pub const ALL: [MealSlot; 4] = [
        MealSlot::Breakfast,
        MealSlot::Lunch,
        MealSlot::Dinner,
        MealSlot::Snacks,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for MealSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MealSlot::Breakfast => "breakfast",
            MealSlot::Lunch => "lunch",
            MealSlot::Dinner => "dinner",
            MealSlot::Snacks => "snacks",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoodItem {
    pub id: String,
    pub name: String,
    /// kcal per standard plate
    pub calories: f64,
    #[serde(rename = "slots")]
    pub allowed_slots: Vec<MealSlot>,
    #[serde(default)]
    pub nutrients: BTreeMap<String, f64>,
}

impl FoodItem {
    pub fn new(id: &str, name: &str, calories: f64, slots: &[MealSlot]) -> Self {
        Self {
            id: id.to_string(),
            name: name.to_string(),
            calories,
            allowed_slots: slots.to_vec(),
            nutrients: BTreeMap::new(),
        }
    }

    pub fn allows(&self, slot: MealSlot) -> bool {
        self.allowed_slots.contains(&slot)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawId {
    Text(String),
    Int(i64),
}

#[derive(Deserialize)]
struct RawFood {
    id: RawId,
    name: String,
    calories: f64,
    slots: Vec<MealSlot>,
    #[serde(default)]
    nutrients: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct FoodDatabase {
    items: Vec<FoodItem>,
}

impl FoodDatabase {
    pub fn new(items: Vec<FoodItem>) -> Result<Self> {
        let mut ids = HashSet::new();
        for it in &items {
            if !(it.calories > 0.0 && it.calories.is_finite()) {
                return Err(DataError::NonPositiveCalories(it.id.clone()));
            }
            if it.allowed_slots.is_empty() {
                return Err(DataError::EmptySlots(it.id.clone()));
            }
            if !ids.insert(it.id.clone()) {
                return Err(DataError::DuplicateId(it.id.clone()));
            }
        }
        Ok(Self { items })
    }

    pub fn items(&self) -> &[FoodItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&FoodItem> {
        self.items.iter().find(|f| f.id == id)
    }
}

pub fn load_food_db(path: &Path) -> Result<FoodDatabase> {
    read_food_db(open(path)?)
}

pub fn read_food_db<R: Read>(reader: R) -> Result<FoodDatabase> {
    let raw: Vec<RawFood> = serde_json::from_reader(reader)?;
    let items = raw
        .into_iter()
        .map(|r| FoodItem {
            id: match r.id {
                RawId::Text(s) => s,
                RawId::Int(i) => i.to_string(),
            },
            name: r.name,
            calories: r.calories,
            allowed_slots: r.slots,
            nutrients: r.nutrients,
        })
        .collect();
    FoodDatabase::new(items)
}

/// The stimulus window of one food, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub food_index: usize,
    pub samples: Vec<Vec<f64>>,
}

impl Trial {
    pub fn len(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Cuts the stimulus windows out of a session; calm segments are dropped.
pub fn segment_trials(rec: &EegRecording, protocol: &StimulusProtocol) -> Result<Vec<Trial>> {
    protocol.validate()?;
    let needed = protocol.required_samples()?;
    if rec.len() < needed {
        return Err(DataError::RecordingTooShort {
            needed,
            available: rec.len(),
        });
    }
    let stride = protocol.stride_samples()?;
    let len = protocol.stimulus_samples()?;
    Ok((0..protocol.food_count)
        .map(|k| {
            let start = k * stride;
            Trial {
                food_index: k,
                samples: rec
                    .samples
                    .iter()
                    .map(|ch| ch[start..start + len].to_vec())
                    .collect(),
            }
        })
        .collect())
}

/// Power multiplier applied to one band while a label-1 food is on screen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandGain {
    pub target: Target,
    pub band: BandName,
    pub power_gain: f64,
}

/// Recipe for synthetic EEG: background RMS per band plus label-conditioned gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassProfile {
    pub background_rms: Vec<(BandName, f64)>,
    pub gains: Vec<BandGain>,
    pub sensor_noise_rms: f64,
    /// Per-channel background amplitudes are scaled by a factor drawn
    /// uniformly from `[1/jitter, jitter]`, giving each subject its own baseline.
    pub amplitude_jitter: f64,
}

impl ClassProfile {
    /// Like raises alpha power, Excitement raises beta, Feelings raises theta; each ×4.
    pub fn alpha_profile() -> Self {
        Self {
            background_rms: vec![
                (BandName::Delta, 12.0),
                (BandName::Theta, 8.0),
                (BandName::Alpha, 8.0),
                (BandName::Beta, 5.0),
                (BandName::Gamma, 2.0),
            ],
            gains: vec![
                BandGain {
                    target: Target::Like,
                    band: BandName::Alpha,
                    power_gain: 4.0,
                },
                BandGain {
                    target: Target::Excitement,
                    band: BandName::Beta,
                    power_gain: 4.0,
                },
                BandGain {
                    target: Target::Feelings,
                    band: BandName::Theta,
                    power_gain: 4.0,
                },
            ],
            sensor_noise_rms: 1.0,
            amplitude_jitter: 1.25,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.background_rms.is_empty() {
            return Err(DataError::InvalidProfile("no background bands".into()));
        }
        if self
            .background_rms
            .iter()
            .any(|(_, r)| !(*r >= 0.0 && r.is_finite()))
        {
            return Err(DataError::InvalidProfile(
                "background RMS must be finite and >= 0".into(),
            ));
        }
        if self
            .gains
            .iter()
            .any(|g| !(g.power_gain > 0.0 && g.power_gain.is_finite()))
        {
            return Err(DataError::InvalidProfile(
                "band gains must be positive".into(),
            ));
        }
        if self
            .gains
            .iter()
            .any(|g| !self.background_rms.iter().any(|(b, _)| *b == g.band))
        {
            return Err(DataError::InvalidProfile(
                "gain refers to a band without background".into(),
            ));
        }
        if !(self.sensor_noise_rms >= 0.0) || !(self.amplitude_jitter >= 1.0) {
            return Err(DataError::InvalidProfile("bad noise or jitter".into()));
        }
        Ok(())
    }
}

impl Default for ClassProfile {
    fn default() -> Self {
        Self::alpha_profile()
    }
}

/// Generates one subject's session and the matching survey labels.
///
/// Each target gets a balanced label vector (half the foods at 1). Every
/// channel is a sum of band-limited Gaussian noise components; inside the
/// stimulus window of a food whose label is 1, the gained band is scaled by
/// the square root of its power gain.
pub fn synthesize_session(
    protocol: &StimulusProtocol,
    layout: &ChannelLayout,
    profile: &ClassProfile,
    seed: u64,
) -> Result<(EegRecording, SurveyLabels)> {
    protocol.validate()?;
    profile.validate()?;
    let fs = protocol.sample_rate_hz;
    let n = protocol.session_samples()?;
    let stride = protocol.stride_samples()?;
    let stim = protocol.stimulus_samples()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut per_target = Vec::with_capacity(3);
    for _ in Target::ALL {
        let mut v: Vec<u8> = (0..protocol.food_count)
            .map(|i| u8::from(i < protocol.food_count / 2))
            .collect();
        v.shuffle(&mut rng);
        per_target.push(v);
    }
    let mut labels = SurveyLabels::default();
    for k in 0..protocol.food_count {
        labels.insert(
            k,
            LabelTriple {
                like: per_target[0][k],
                excitement: per_target[1][k],
                feelings: per_target[2][k],
            },
        )?;
    }

    let table = BandTable::default();
    let mut filters = Vec::with_capacity(profile.background_rms.len());
    for (band, _) in &profile.background_rms {
        let spec = table
            .get(*band)
            .ok_or_else(|| DataError::InvalidProfile(format!("unknown band {band}")))?;
        let filt = preprocess::Butterworth::bandpass(spec.lo_hz, spec.hi_hz, 4, fs)
            .map_err(|e| DataError::InvalidProfile(e.to_string()))?;
        filters.push(filt);
    }

    let mut samples = Vec::with_capacity(layout.len());
    for _ in 0..layout.len() {
        let mut channel = vec![0.0; n];
        for ((band, rms), filt) in profile.background_rms.iter().zip(&filters) {
            let noise: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let mut comp = filt
                .filtfilt(&noise)
                .map_err(|e| DataError::InvalidProfile(e.to_string()))?;
            let power = comp.iter().map(|v| v * v).sum::<f64>() / n as f64;
            let jitter = if profile.amplitude_jitter > 1.0 {
                let l = profile.amplitude_jitter.ln();
                rng.gen_range(-l..=l).exp()
            } else {
                1.0
            };
            let scale = if power > 0.0 {
                rms * jitter / power.sqrt()
            } else {
                0.0
            };
            comp.iter_mut().for_each(|v| *v *= scale);
            for gain in profile.gains.iter().filter(|g| g.band == *band) {
                let amp = gain.power_gain.sqrt();
                let col = Target::ALL.iter().position(|t| *t == gain.target).unwrap();
                for k in 0..protocol.food_count {
                    if per_target[col][k] == 1 {
                        let start = k * stride;
                        comp[start..start + stim].iter_mut().for_each(|v| *v *= amp);
                    }
                }
            }
            channel.iter_mut().zip(&comp).for_each(|(c, v)| *c += v);
        }
        if profile.sensor_noise_rms > 0.0 {
            for c in channel.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *c += profile.sensor_noise_rms * z;
            }
        }
        samples.push(channel);
    }
    let rec = EegRecording::new(layout.clone(), fs, samples, Some(*protocol))?;
    Ok((rec, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_protocol(foods: usize) -> StimulusProtocol {
        StimulusProtocol {
            food_count: foods,
            ..StimulusProtocol::default()
        }
    }

    #[test]
    fn zeros_csv_loads() {
        let layout = ChannelLayout::default();
        let mut text = String::from("t");
        for n in layout.names() {
            text += &format!(",{n}");
        }
        text.push('\n');
        for i in 0..3 {
            text += &format!("{}", i as f64 / 128.0);
            for _ in 0..14 {
                text += ",0";
            }
            text.push('\n');
        }
        let rec = read_recording(text.as_bytes(), &layout, 128.0).unwrap();
        assert_eq!(rec.channel_count(), 14);
        assert_eq!(rec.len(), 3);
        assert!(rec.samples().iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn non_numeric_cell_names_row() {
        let layout = ChannelLayout::default();
        let header = format!("t,{}\n", layout.names().join(","));
        let good = format!("0{}\n", ",1.5".repeat(14));
        let bad = format!("0.0078125{},x\n", ",1.5".repeat(13));
        let text = format!("{header}{good}{bad}{good}");
        match read_recording(text.as_bytes(), &layout, 128.0) {
            Err(DataError::MalformedRow { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_column_count_is_malformed() {
        let layout = ChannelLayout::default();
        let text = format!("t,{}\n0,1,2\n", layout.names().join(","));
        assert!(matches!(
            read_recording(text.as_bytes(), &layout, 128.0),
            Err(DataError::MalformedRow { row: 1, .. })
        ));
    }

    #[test]
    fn unknown_header_is_channel_mismatch() {
        let layout = ChannelLayout::default();
        let mut names = layout.names().to_vec();
        names[3] = "Cz".into();
        let text = format!("t,{}\n", names.join(","));
        assert!(matches!(
            read_recording(text.as_bytes(), &layout, 128.0),
            Err(DataError::ChannelMismatch(_))
        ));
    }

    #[test]
    fn missing_file() {
        let err = load_recording(
            Path::new("/nonexistent/x.csv"),
            &ChannelLayout::default(),
            128.0,
        )
        .unwrap_err();
        assert!(matches!(err, DataError::MissingFile(_)));
    }

    #[test]
    fn permuted_columns_map_by_name() {
        let layout = ChannelLayout::new(vec!["A".into(), "B".into()], vec![], vec![]).unwrap();
        let rec = read_recording("t,B,A\n0,2,1\n1,4,3\n".as_bytes(), &layout, 1.0).unwrap();
        assert_eq!(rec.channel(0), &[1.0, 3.0]);
        assert_eq!(rec.channel(1), &[2.0, 4.0]);
    }

    #[test]
    fn session_round_trips_bit_exact() {
        let layout = ChannelLayout::default();
        let (rec, _) =
            synthesize_session(&small_protocol(2), &layout, &ClassProfile::default(), 5).unwrap();
        let mut buf = Vec::new();
        write_recording_to(&mut buf, &rec).unwrap();
        let back = read_recording(buf.as_slice(), &layout, 128.0).unwrap();
        assert_eq!(back.len(), rec.len());
        for (a, b) in back.samples().iter().zip(rec.samples()) {
            for (x, y) in a.iter().zip(b) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn labels_parse_and_reject() {
        let l = read_labels("food,like,excitement,feelings\n0,1,1,0\n".as_bytes()).unwrap();
        assert_eq!(
            l.get(0),
            Some(&LabelTriple {
                like: 1,
                excitement: 1,
                feelings: 0
            })
        );
        assert!(matches!(
            read_labels("food,like,excitement,feelings\n0,2,1,0\n".as_bytes()),
            Err(DataError::OutOfRangeLabel { row: 1, .. })
        ));
        assert!(matches!(
            read_labels("food,like,excitement,feelings\n0,1,1,0\n0,0,0,0\n".as_bytes()),
            Err(DataError::DuplicateFoodIndex(0))
        ));
    }

    #[test]
    fn forty_label_rows_cover_protocol() {
        let mut text = String::from("food,like,excitement,feelings\n");
        for i in 0..40 {
            text += &format!("{i},{},{},{}\n", i % 2, (i / 2) % 2, (i / 4) % 2);
        }
        let l = read_labels(text.as_bytes()).unwrap();
        assert_eq!(l.len(), StimulusProtocol::default().food_count);
        assert_eq!(
            l.iter().map(|(k, _)| k).collect::<Vec<_>>(),
            (0..40).collect::<Vec<_>>()
        );
    }

    #[test]
    fn food_db_parses_and_validates() {
        let db = read_food_db(
            r#"[{"id":"omelete","name":"Omelete","calories":154,"slots":["breakfast"]}]"#
                .as_bytes(),
        )
        .unwrap();
        assert_eq!(db.items()[0].calories, 154.0);
        assert_eq!(db.items()[0].allowed_slots, vec![MealSlot::Breakfast]);

        let zero = r#"[{"id":1,"name":"Air","calories":0,"slots":["snacks"]}]"#;
        assert!(matches!(
            read_food_db(zero.as_bytes()),
            Err(DataError::NonPositiveCalories(_))
        ));
        let no_slot = r#"[{"id":1,"name":"Air","calories":5,"slots":[]}]"#;
        assert!(matches!(
            read_food_db(no_slot.as_bytes()),
            Err(DataError::EmptySlots(_))
        ));
        let dup = r#"[{"id":1,"name":"A","calories":5,"slots":["lunch"]},
                      {"id":"1","name":"B","calories":6,"slots":["lunch"]}]"#;
        assert!(matches!(
            read_food_db(dup.as_bytes()),
            Err(DataError::DuplicateId(_))
        ));
    }

    #[test]
    fn forty_entry_db() {
        let entries: Vec<String> = (0..40)
            .map(|i| {
                format!(
                    r#"{{"id":"f{i}","name":"Food {i}","calories":{},"slots":["lunch"]}}"#,
                    100 + i
                )
            })
            .collect();
        let db = read_food_db(format!("[{}]", entries.join(",")).as_bytes()).unwrap();
        assert_eq!(db.len(), 40);
    }

    #[test]
    fn synthetic_length_and_determinism() {
        let layout = ChannelLayout::default();
        let p = small_protocol(2);
        let (a, la) = synthesize_session(&p, &layout, &ClassProfile::default(), 9).unwrap();
        let (b, lb) = synthesize_session(&p, &layout, &ClassProfile::default(), 9).unwrap();
        assert_eq!(a.len(), 2 * 27 * 128);
        assert_eq!(a, b);
        assert_eq!(la, lb);
        let (c, _) = synthesize_session(&p, &layout, &ClassProfile::default(), 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn empty_profile_rejected() {
        let profile = ClassProfile {
            background_rms: vec![],
            gains: vec![],
            sensor_noise_rms: 0.0,
            amplitude_jitter: 1.0,
        };
        assert!(matches!(
            synthesize_session(&small_protocol(2), &ChannelLayout::default(), &profile, 1),
            Err(DataError::InvalidProfile(_))
        ));
    }

    #[test]
    fn segmentation_contract() {
        let layout = ChannelLayout::default();
        let p = StimulusProtocol::default();
        let (rec, _) = synthesize_session(&p, &layout, &ClassProfile::default(), 3).unwrap();
        let trials = segment_trials(&rec, &p).unwrap();
        assert_eq!(trials.len(), 40);
        assert!(trials
            .iter()
            .all(|t| t.samples.len() == 14 && t.samples.iter().all(|c| c.len() == 1280)));
        for c in 0..14 {
            assert_eq!(
                trials[1].samples[c],
                rec.channel(c)[27 * 128..27 * 128 + 1280].to_vec()
            );
        }

        let truncated = EegRecording::new(
            layout.clone(),
            128.0,
            rec.samples()
                .iter()
                .map(|c| c[..20 * 27 * 128].to_vec())
                .collect(),
            None,
        )
        .unwrap();
        assert!(matches!(
            segment_trials(&truncated, &p),
            Err(DataError::RecordingTooShort { .. })
        ));
    }

    #[test]
    fn layout_invariants() {
        let l = ChannelLayout::default();
        assert_eq!(l.len(), 14);
        assert_eq!(l.reference_names().len(), 2);
        assert!(l.frontal_subset().iter().all(|f| l.index_of(f).is_some()));
        assert!(ChannelLayout::new(vec!["A".into(), "A".into()], vec![], vec![]).is_err());
    }
}
