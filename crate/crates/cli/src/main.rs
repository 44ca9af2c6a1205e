use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use amrp::data_io::{
    load_food_db, load_labels, load_recording, read_recording, segment_trials, synthesize_session,
    write_labels, write_recording_to, ChannelLayout, ClassProfile, StimulusProtocol,
};
use amrp::features::{stft, write_spectrogram_csv, StftConfig};
use amrp::json::to_canonical_string;
use amrp::learn::{load_bundle, save_bundle, TieRule};
use amrp::metrics::run_fixtures;
use amrp::pipeline::{
    build_feature_set, evaluate, recommend, run_pipeline, stage_seed, train_and_evaluate,
    FeatureSet, MetricsSummary, PipelineConfig, PlanReport, Session, SplitMode,
};
use amrp::planner::{plan_menu, render_plan, DayBudget};
use amrp::preprocess::{
    parse_band, preprocess_recording, ChannelMode, DenoiseConfig, PreprocessConfig,
};
use amrp::recommend::{read_affectivity, reference_checks, render_ranking, RankedFood};
use amrp::Target;
use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "amrp",
    version,
    about = "EEG affectivity classification, food ranking and menu planning"
)]
struct Cli {
    /// More log output on stderr (repeat for debug). RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic recording and its labels.
    Synth(SynthArgs),
    /// Band-pass filter and denoise a recording.
    Preprocess(PreprocessArgs),
    /// Extract per-epoch features from one or more sessions.
    Features(FeaturesArgs),
    /// Train one hierarchical ensemble per target.
    Train(TrainArgs),
    /// Score a saved model on a feature set.
    Eval(EvalArgs),
    /// Rank foods from an affectivity table.
    Recommend(RecommendArgs),
    /// Pack foods into a calorie-budgeted day menu.
    Plan(PlanArgs),
    /// Write the STFT magnitudes of one channel as CSV.
    ExportSpectrogram(SpectrogramArgs),
    /// Recompute the published confusion-table F1 scores.
    Fixtures(FixturesArgs),
    /// Run every stage from a config file.
    Run(RunArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Subject index; each index gets its own stream derived from the seed.
    #[arg(long, default_value_t = 0)]
    subject: u64,
    #[arg(long, default_value_t = 40)]
    foods: usize,
    #[arg(long)]
    recording: PathBuf,
    #[arg(long)]
    labels: PathBuf,
}

#[derive(Args)]
struct PreprocessArgs {
    /// Recording CSV, or `-` for stdin.
    #[arg(long, default_value = "-")]
    input: String,
    /// Output CSV, or `-` for stdout.
    #[arg(long, default_value = "-")]
    output: String,
    /// Pass band as `lo:hi` in Hz.
    #[arg(long, value_parser = parse_band_arg)]
    band: Option<(f64, f64)>,
    /// Use the 0.3-45 Hz pass band.
    #[arg(long, conflicts_with = "band")]
    wideband: bool,
    /// Wavelet denoising as `wavelet:levels:rule`, e.g. `db4:4:soft`.
    #[arg(long)]
    denoise: Option<DenoiseConfig>,
    #[arg(long, conflicts_with = "denoise")]
    no_denoise: bool,
    #[arg(long, default_value_t = 4)]
    order: usize,
    #[arg(long, default_value_t = 128.0)]
    fs: f64,
}

#[derive(Args)]
struct SessionArgs {
    /// Recording CSV; repeat together with --labels for more subjects.
    #[arg(long = "recording", required = true)]
    recordings: Vec<PathBuf>,
    #[arg(long = "labels", required = true)]
    labels: Vec<PathBuf>,
}

#[derive(Args)]
struct ConfigArgs {
    /// Pipeline config JSON; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct FeaturesArgs {
    #[command(flatten)]
    sessions: SessionArgs,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    channels: Option<ChannelMode>,
    #[arg(long)]
    epoch_seconds: Option<f64>,
    /// Feature set JSON, or `-` for stdout.
    #[arg(long, default_value = "-")]
    output: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliTieRule {
    MeanConfidence,
    Zero,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    features: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    /// Hold out whole subjects instead of pooled epochs.
    #[arg(long)]
    split_by_subject: bool,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long, value_enum)]
    tie_rule: Option<CliTieRule>,
    #[arg(long)]
    model: PathBuf,
    /// Held-out metrics JSON, or `-` for stdout.
    #[arg(long, default_value = "-")]
    metrics: String,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    features: PathBuf,
    #[arg(long, default_value_t = 0)]
    positive_class: u8,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Args)]
struct RecommendArgs {
    /// Affectivity table (JSON or CSV), or `-` for stdin.
    #[arg(long, default_value = "-")]
    table: String,
    #[arg(long, value_delimiter = ',', default_values_t = [0.4, 0.3, 0.3])]
    weights: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    top: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct PlanArgs {
    /// Food database JSON.
    #[arg(long)]
    foods: PathBuf,
    /// Ranking JSON from `recommend`; without it every food scores 1.
    #[arg(long)]
    ranking: Option<PathBuf>,
    /// Day budget JSON.
    #[arg(long)]
    budget: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct SpectrogramArgs {
    #[arg(long)]
    recording: PathBuf,
    #[arg(long, default_value = "AF3")]
    channel: String,
    /// Food trial to export; the whole recording when omitted.
    #[arg(long)]
    trial: Option<usize>,
    /// Foods shown in the session, used to locate trials.
    #[arg(long, default_value_t = 40)]
    foods: usize,
    #[arg(long, default_value_t = 64)]
    window: usize,
    #[arg(long, default_value_t = 32)]
    hop: usize,
    #[arg(long, default_value_t = 128.0)]
    fs: f64,
    #[arg(long, default_value = "-")]
    output: String,
}

#[derive(Args)]
struct FixturesArgs {
    #[arg(long, default_value_t = 0)]
    positive_class: u8,
    #[arg(long, default_value_t = 5e-4)]
    tolerance: f64,
    /// Exit non-zero when any fixture misses.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Replaces the config seed; every stage seed derives from it.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

fn parse_band_arg(s: &str) -> Result<(f64, f64), String> {
    parse_band(s).map_err(|e| e.to_string())
}

fn open_input(path: &str) -> Result<Box<dyn Read>> {
    Ok(if path == "-" {
        Box::new(io::stdin().lock())
    } else {
        Box::new(BufReader::new(
            File::open(path).with_context(|| format!("opening {path}"))?,
        ))
    })
}

fn open_output(path: &str) -> Result<Box<dyn Write>> {
    Ok(if path == "-" {
        Box::new(io::stdout().lock())
    } else {
        Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {path}"))?,
        ))
    })
}

fn emit_json<T: Serialize + ?Sized>(path: &str, value: &T) -> Result<()> {
    let mut out = open_output(path)?;
    out.write_all(to_canonical_string(value)?.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(file))
        .with_context(|| format!("parsing {}", path.display()))
}

fn synth(a: SynthArgs) -> Result<()> {
    let protocol = StimulusProtocol {
        food_count: a.foods,
        ..StimulusProtocol::default()
    };
    let seed = stage_seed(a.seed, "synth", a.subject);
    let (rec, labels) = synthesize_session(
        &protocol,
        &ChannelLayout::default(),
        &ClassProfile::alpha_profile(),
        seed,
    )?;
    let mut w = BufWriter::new(
        File::create(&a.recording)
            .with_context(|| format!("creating {}", a.recording.display()))?,
    );
    write_recording_to(&mut w, &rec)?;
    w.flush()?;
    write_labels(&a.labels, &labels)?;
    log::info!(
        "wrote {} samples x {} channels",
        rec.len(),
        rec.channel_count()
    );
    Ok(())
}

fn preprocess(a: PreprocessArgs) -> Result<()> {
    let mut cfg = if a.wideband {
        PreprocessConfig::wideband()
    } else {
        PreprocessConfig::default()
    };
    if let Some((lo, hi)) = a.band {
        cfg.band_lo_hz = lo;
        cfg.band_hi_hz = hi;
    }
    if a.no_denoise {
        cfg.denoise = None;
    } else if let Some(d) = a.denoise {
        cfg.denoise = Some(d);
    }
    cfg.filter_order = a.order;
    let rec = read_recording(open_input(&a.input)?, &ChannelLayout::default(), a.fs)?;
    let clean = preprocess_recording(&rec, &cfg)?;
    let mut out = open_output(&a.output)?;
    write_recording_to(&mut out, &clean)?;
    out.flush()?;
    Ok(())
}

fn features(a: FeaturesArgs) -> Result<()> {
    let mut cfg = a.config.load()?;
    if let Some(m) = a.channels {
        cfg.channel_mode = m;
    }
    if let Some(e) = a.epoch_seconds {
        cfg.epoch_seconds = e;
    }
    if a.sessions.recordings.len() != a.sessions.labels.len() {
        bail!("--recording and --labels must be given the same number of times");
    }
    let sessions = a
        .sessions
        .recordings
        .iter()
        .zip(&a.sessions.labels)
        .enumerate()
        .map(|(subject, (r, l))| {
            Ok(Session {
                subject,
                recording: load_recording(
                    r,
                    &ChannelLayout::default(),
                    cfg.protocol.sample_rate_hz,
                )?
                .with_protocol(Some(cfg.protocol)),
                labels: load_labels(l)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let set = build_feature_set(&sessions, &cfg)?;
    log::info!("{} epochs", set.len());
    emit_json(&a.output, &set)
}

fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = a.config.load()?;
    if a.split_by_subject {
        cfg.split = SplitMode::BySubject;
    }
    if let Some(f) = a.train_fraction {
        cfg.train_fraction = f;
    }
    if let Some(t) = a.tie_rule {
        cfg.tie_rule = match t {
            CliTieRule::MeanConfidence => TieRule::MeanConfidence,
            CliTieRule::Zero => TieRule::Zero,
        };
    }
    let set: FeatureSet = read_json(&a.features)?;
    let (bundle, targets) = train_and_evaluate(&set, &cfg)?;
    save_bundle(&a.model, &bundle)?;
    emit_json(
        &a.metrics,
        &MetricsSummary {
            positive_class: cfg.positive_class,
            split: cfg.split,
            train_fraction: cfg.train_fraction,
            rows: set.len(),
            targets,
        },
    )
}

#[derive(Serialize)]
struct EvalEntry {
    target: Target,
    rows: usize,
    hierarchical: amrp::metrics::MetricsReport,
    per_method: Vec<amrp::pipeline::MethodMetrics>,
}

fn eval(a: EvalArgs) -> Result<()> {
    let bundle = load_bundle(&a.model)?;
    let set: FeatureSet = read_json(&a.features)?;
    let mut out = Vec::new();
    for target in Target::ALL {
        let ens = bundle
            .ensemble(target)
            .ok_or_else(|| anyhow!("model has no {target} ensemble"))?;
        let (hierarchical, per_method) = evaluate(ens, &set.datasets(target)?, a.positive_class)?;
        out.push(EvalEntry {
            target,
            rows: set.len(),
            hierarchical,
            per_method,
        });
    }
    emit_json("-", &out)
}

fn recommend_cmd(a: RecommendArgs) -> Result<()> {
    let table = read_affectivity(open_input(&a.table)?)?;
    let rec = recommend(&table, &a.weights, a.top)?;
    match a.format {
        Format::Json => emit_json("-", &rec.top),
        Format::Text => {
            print!("{}", render_ranking(&rec.top));
            Ok(())
        }
    }
}

/// Accepts either a bare ranking array or a full recommendation object.
fn read_ranking(path: &Path) -> Result<Vec<RankedFood>> {
    let v: serde_json::Value = read_json(path)?;
    let list = match v.get("all") {
        Some(all) => all.clone(),
        None => v,
    };
    serde_json::from_value(list).with_context(|| format!("{} is not a ranking", path.display()))
}

fn plan(a: PlanArgs) -> Result<()> {
    let db = load_food_db(&a.foods)?;
    let budget: DayBudget = match &a.budget {
        Some(p) => read_json(p)?,
        None => DayBudget::default(),
    };
    budget.validate()?;
    let scored = match &a.ranking {
        Some(p) => read_ranking(p)?
            .into_iter()
            .map(|r| {
                db.get(&r.food_id)
                    .map(|f| (f.clone(), r.score))
                    .ok_or_else(|| {
                        anyhow!(
                            "ranked food `{}` is not in {}",
                            r.food_id,
                            a.foods.display()
                        )
                    })
            })
            .collect::<Result<Vec<_>>>()?,
        None => db.items().iter().map(|f| (f.clone(), 1.0)).collect(),
    };
    let menu = plan_menu(&scored, &budget)?;
    match a.format {
        Format::Json => emit_json("-", &PlanReport::new(&menu, &budget)),
        Format::Text => {
            print!("{}", render_plan(&menu));
            Ok(())
        }
    }
}

fn export_spectrogram(a: SpectrogramArgs) -> Result<()> {
    let layout = ChannelLayout::default();
    let rec = load_recording(&a.recording, &layout, a.fs)?;
    let ch = layout
        .index_of(&a.channel)
        .ok_or_else(|| anyhow!("--channel: unknown channel `{}`", a.channel))?;
    let signal: Vec<f64> = match a.trial {
        None => rec.channel(ch).to_vec(),
        Some(k) => {
            let protocol = StimulusProtocol {
                food_count: a.foods,
                sample_rate_hz: a.fs,
                ..StimulusProtocol::default()
            };
            let trials = segment_trials(&rec, &protocol)?;
            let t = trials
                .iter()
                .find(|t| t.food_index == k)
                .ok_or_else(|| anyhow!("--trial: no trial {k} ({} trials)", trials.len()))?;
            t.samples[ch].clone()
        }
    };
    let cfg = StftConfig {
        window_len: a.window,
        hop: a.hop,
        ..StftConfig::default()
    };
    let spec = stft(&signal, &cfg, a.fs)?;
    write_spectrogram_csv(&spec, open_output(&a.output)?)?;
    Ok(())
}

fn fixtures(a: FixturesArgs) -> Result<bool> {
    let outcomes = run_fixtures(a.positive_class, a.tolerance);
    let mut passed = 0;
    for o in &outcomes {
        let status = if o.within_tolerance { "pass" } else { "FAIL" };
        passed += usize::from(o.within_tolerance);
        println!(
            "{status} {:<34} printed {:.4} computed {:.4} accuracy {:.4}",
            o.name, o.printed_f1, o.computed_f1, o.accuracy
        );
    }
    println!(
        "{passed}/{} fixtures within {}",
        outcomes.len(),
        a.tolerance
    );
    let mut topsis_ok = true;
    for (label, got, want) in reference_checks()? {
        let ok = (got - want).abs() <= 1e-3;
        topsis_ok &= ok;
        println!(
            "{} topsis {label:<20} computed {got:.5} expected {want:.5}",
            if ok { "pass" } else { "FAIL" }
        );
    }
    Ok(!a.strict || (passed == outcomes.len() && topsis_ok))
}

fn run(a: RunArgs) -> Result<()> {
    let mut cfg = PipelineConfig::load(&a.config)?;
    cfg.apply_process_env();
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(d) = a.output_dir {
        cfg.output_dir = Some(d);
    }
    let out = run_pipeline(&cfg)?;
    for t in &out.metrics.targets {
        log::info!("{}: accuracy {:.4}", t.target, t.hierarchical.accuracy);
    }
    for f in &out.files {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    let result = match cli.command {
        Command::Synth(a) => synth(a).map(|_| true),
        Command::Preprocess(a) => preprocess(a).map(|_| true),
        Command::Features(a) => features(a).map(|_| true),
        Command::Train(a) => train(a).map(|_| true),
        Command::Eval(a) => eval(a).map(|_| true),
        Command::Recommend(a) => recommend_cmd(a).map(|_| true),
        Command::Plan(a) => plan(a).map(|_| true),
        Command::ExportSpectrogram(a) => export_spectrogram(a).map(|_| true),
        Command::Fixtures(a) => fixtures(a),
        Command::Run(a) => run(a).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
