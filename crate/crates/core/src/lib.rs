//! Affective meal recommendation and menu planning.
//!
//! The crate turns multi-channel EEG recordings taken while a person looks at
//! food pictures into three binary affectivity labels per food (Like,
//! Excitement, Feelings), ranks the foods with TOPSIS and packs a full-day
//! menu into calorie-budgeted meal slots.
//!
//! Stages, in pipeline order:
//!
//! - [`data_io`]: CSV/JSON ingestion, synthetic sessions, trial segmentation
//! - [`preprocess`]: band-pass filtering, wavelet denoising, band decomposition, epoching
//! - [`features`]: STFT, DWT, EMD + Hilbert spectrum, PSD and feature assembly
//! - [`learn`]: four classifier families and two-level majority voting
//! - [`metrics`]: confusion matrix, accuracy, F1, AUC
//! - [`recommend`]: TOPSIS ranking
//! - [`planner`]: minimum-bin packing and meal-slot menu planning
//! - [`pipeline`]: end-to-end orchestration and deterministic JSON output

pub mod data_io;
pub mod features;
pub mod json;
pub mod learn;
pub mod metrics;
pub mod pipeline;
pub mod planner;
pub mod preprocess;
pub mod recommend;

pub use data_io::{
    ChannelLayout, EegRecording, FoodDatabase, FoodItem, MealSlot, StimulusProtocol, SurveyLabels,
    Target, Trial,
};
pub use features::FeatureMethod;
pub use preprocess::{BandName, BandSpec, BandTable};
