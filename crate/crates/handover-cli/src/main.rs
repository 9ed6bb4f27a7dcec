//! Command-line front end for the handover pipeline.
//!
//! Exit codes: 0 success, 2 usage error, 3 data/format error,
//! 4 validation error, 5 numeric failure.

use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use handover::data::{
    grip_force, load_manifest, load_record, save_manifest, save_record, DatasetManifest,
    HandoverRecord, ManifestEntry, Vec3,
};
use handover::features::{
    extract_features, grip_release_time, stats::summarize, transfer_time, FeatureSet,
    WeightCategory,
};
use handover::model::{
    load_model, make_windows, save_model, train, ForwardMode, GripWindow, Stage, TrainConfig,
};
use handover::motion::plan_reach;
use handover::segmentation::{
    extract, find_coholding_segments, find_grip_intersections, SegmentationConfig,
};
use handover::signal::FilterSpec;
use handover::strategy::{
    latency_audit, run_trace, serve, EngineConfig, PullAxis, StrategyKind, TICK_BUDGET_MS,
};
use handover::synth::{benchmark, generate, GeneratorSpec, GroundTruth};
use handover::{data::Body, Error, Result, SAMPLE_RATE_HZ};

/// Layered configuration: built-in defaults, overridden by a JSON config
/// file, overridden by command-line flags. The effective configuration is
/// echoed as `config.json` into every output directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct Config {
    contact_threshold_n: f64,
    pull_threshold_n: f64,
    load_share_fraction: f64,
    light_threshold_n: f64,
    weight_cutover_kg: f64,
    filter_order: usize,
    filter_cutoff_hz: f64,
    pull_axis: PullAxis,
    taker_load_positive: bool,
    seed: u64,
    train: TrainConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            contact_threshold_n: 0.4,
            pull_threshold_n: 4.0,
            load_share_fraction: 0.5,
            light_threshold_n: 4.0,
            weight_cutover_kg: 0.8,
            filter_order: 4,
            filter_cutoff_hz: 5.0,
            pull_axis: PullAxis::Z,
            taker_load_positive: true,
            seed: 7,
            train: TrainConfig::default(),
        }
    }
}

impl Config {
    fn load(path: Option<&Path>) -> Result<Config> {
        match path {
            None => Ok(Config::default()),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::format(p, format!("bad config: {e}")))
            }
        }
    }

    fn engine(&self) -> EngineConfig {
        EngineConfig {
            pull_axis: self.pull_axis,
            taker_load_positive: self.taker_load_positive,
        }
    }

    fn filter(&self) -> FilterSpec {
        FilterSpec {
            order: self.filter_order,
            cutoff_hz: self.filter_cutoff_hz,
            sample_rate_hz: SAMPLE_RATE_HZ,
        }
    }

    fn echo_into(&self, out_dir: &Path) -> Result<()> {
        fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        let path = out_dir.join("config.json");
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::format(&path, e.to_string()))?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

#[derive(Parser)]
#[command(name = "handover", version, about = "Handover analysis and control pipeline")]
struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    Pretrain,
    Finetune,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Gr2,
    Loadshare,
    Pull,
}

#[derive(Clone, Copy, ValueEnum)]
enum CategoryArg {
    Low,
    Moderate,
    High,
}

impl From<CategoryArg> for WeightCategory {
    fn from(c: CategoryArg) -> WeightCategory {
        match c {
            CategoryArg::Low => WeightCategory::Low,
            CategoryArg::Moderate => WeightCategory::Moderate,
            CategoryArg::High => WeightCategory::High,
        }
    }
}

#[derive(Args)]
struct SegmentCmd {
    /// Directory holding one unsegmented session (signals.csv + meta.json).
    session_dir: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeCmd {
    /// manifest.json listing record directories (paths relative to it).
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainCmd {
    #[arg(long, value_enum)]
    stage: StageArg,
    #[arg(long)]
    manifest: PathBuf,
    /// Output model file; curves.csv and config.json go next to it.
    #[arg(long)]
    out: PathBuf,
    /// Warm-start model (required for --stage finetune).
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
}

#[derive(Args)]
struct EvaluateCmd {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Optional report file; the report always prints to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayCmd {
    #[arg(long, value_enum)]
    strategy: StrategyArg,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Directory of one segmented record.
    #[arg(long)]
    record: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchCmd {
    /// Directory of record subdirectories (or with a manifest.json).
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenCmd {
    /// Generator spec JSON; defaults are used when omitted.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PlanCmd {
    /// JSON array of [x, y, z] waypoints, meters.
    #[arg(long)]
    waypoints: PathBuf,
    #[arg(long, value_enum)]
    category: CategoryArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ServeCmd {
    #[arg(long)]
    port: u16,
    #[arg(long, value_enum)]
    strategy: StrategyArg,
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Cut a session into centered 800-sample handover records.
    Segment(SegmentCmd),
    /// Extract per-record metrics and dataset statistics.
    Analyze(AnalyzeCmd),
    /// Train the grip-release classifier (two-stage).
    Train(TrainCmd),
    /// Accuracy/confusion report of a model on a manifest.
    Evaluate(EvaluateCmd),
    /// Replay a record through a strategy, writing trace.csv.
    Replay(ReplayCmd),
    /// Compare strategies over a corpus, writing benchmark.json.
    Bench(BenchCmd),
    /// Generate a synthetic corpus with planted ground truth.
    Gen(GenCmd),
    /// Plan a weight-adaptive minimum-jerk reach, writing trajectory.csv.
    Plan(PlanCmd),
    /// Streaming decision server (newline-delimited JSON over TCP).
    Serve(ServeCmd),
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Parameter(_) => 2,
        Error::Io { .. }
        | Error::Format { .. }
        | Error::ModelFormat(_)
        | Error::ModelVersion { .. } => 3,
        Error::Validation { .. }
        | Error::Alignment { .. }
        | Error::Length { .. }
        | Error::EmptySignal
        | Error::Bounds { .. }
        | Error::MetricUndefined { .. }
        | Error::MissingForces
        | Error::Shape(_) => 4,
        Error::Numeric(_) => 5,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = Config::load(cli.config.as_deref()).and_then(|config| match cli.command {
        Command::Segment(cmd) => cmd_segment(&cmd, &config),
        Command::Analyze(cmd) => cmd_analyze(&cmd, &config),
        Command::Train(cmd) => cmd_train(&cmd, &config),
        Command::Evaluate(cmd) => cmd_evaluate(&cmd, &config),
        Command::Replay(cmd) => cmd_replay(&cmd, &config),
        Command::Bench(cmd) => cmd_bench(&cmd, &config),
        Command::Gen(cmd) => cmd_gen(&cmd, &config),
        Command::Plan(cmd) => cmd_plan(&cmd, &config),
        Command::Serve(cmd) => cmd_serve(&cmd, &config),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text =
        serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn cmd_segment(cmd: &SegmentCmd, config: &Config) -> Result<()> {
    let session = load_record(&cmd.session_dir)?;
    let seg_config = SegmentationConfig {
        contact_threshold_n: config.contact_threshold_n,
        filter: config.filter(),
        ..SegmentationConfig::default()
    };
    let boundaries = match &session.forces {
        Some(f) => {
            let giver = grip_force(&f.giver_grip)?;
            let taker = grip_force(&f.taker_grip)?;
            find_grip_intersections(&giver, &taker, &seg_config)?
        }
        None => {
            let hand = |frames: &[handover::data::SkeletonFrame], h| {
                frames
                    .iter()
                    .map(|fr| {
                        *fr.body(match h {
                            handover::data::Handedness::Left => Body::LeftHand,
                            handover::data::Handedness::Right => Body::RightHand,
                        })
                    })
                    .collect::<Vec<_>>()
            };
            let giver_hand = hand(
                &session.giver_skeleton,
                session.meta.participants.giver.handedness,
            );
            let taker_hand = hand(
                &session.taker_skeleton,
                session.meta.participants.taker.handedness,
            );
            find_coholding_segments(&giver_hand, &taker_hand, &session.object_pose, &seg_config)?
        }
    };
    config.echo_into(&cmd.out)?;
    let mut entries = Vec::new();
    for (i, b) in boundaries.iter().enumerate() {
        let record = extract(&session, b)?;
        let name = format!("segment_{i:03}");
        save_record(&record, &cmd.out.join(&name))?;
        entries.push(ManifestEntry {
            path: name,
            weight_kg: record.meta.weight_kg,
            object_label: record.meta.object_label.clone(),
            dataset_tag: record.meta.dataset_tag,
            has_forces: record.forces.is_some(),
        });
    }
    write_json(&boundaries, &cmd.out.join("segments.json"))?;
    save_manifest(
        &DatasetManifest { entries },
        &cmd.out.join("manifest.json"),
    )?;
    println!("wrote {} segments to {}", boundaries.len(), cmd.out.display());
    Ok(())
}

fn load_manifest_records(manifest_path: &Path) -> Result<Vec<(String, HandoverRecord)>> {
    let manifest = load_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut records = Vec::with_capacity(manifest.entries.len());
    for entry in &manifest.entries {
        let record = load_record(&base.join(&entry.path))?;
        records.push((entry.path.clone(), record));
    }
    Ok(records)
}

fn feature_csv(rows: &[(String, FeatureSet)], path: &Path) -> Result<()> {
    let mut writer =
        csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    writer
        .write_record([
            "path",
            "weight_kg",
            "category",
            "t_tak_con_ms",
            "t_giv_rel_ms",
            "t_tf_ms",
            "t_gr_ms",
            "max_pull_n",
            "max_pull_over_weight",
            "t_ld_shift_ms",
            "transfer_height_norm",
            "avg_velocity",
            "max_velocity",
            "avg_acceleration",
            "max_acceleration",
        ])
        .map_err(|e| Error::format(path, e.to_string()))?;
    for (name, fs) in rows {
        writer
            .write_record([
                name.clone(),
                fs.weight_kg.to_string(),
                fs.category.to_string(),
                fmt(fs.t_tak_con_ms),
                fmt(fs.t_giv_rel_ms),
                fmt(fs.t_tf_ms),
                fmt(fs.t_gr_ms),
                fmt(fs.max_pull_n),
                fmt(fs.max_pull_over_weight),
                fmt(fs.t_ld_shift_ms),
                fmt(fs.transfer_height_norm),
                fmt(fs.avg_velocity),
                fmt(fs.max_velocity),
                fmt(fs.avg_acceleration),
                fmt(fs.max_acceleration),
            ])
            .map_err(|e| Error::format(path, e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

fn cmd_analyze(cmd: &AnalyzeCmd, config: &Config) -> Result<()> {
    let records = load_manifest_records(&cmd.manifest)?;
    if records.is_empty() {
        return Err(Error::Parameter("manifest lists no records".into()));
    }
    config.echo_into(&cmd.out)?;
    let mut rows = Vec::with_capacity(records.len());
    for (name, record) in &records {
        rows.push((name.clone(), extract_features(record)?));
    }
    feature_csv(&rows, &cmd.out.join("features.csv"))?;
    let sets: Vec<FeatureSet> = rows.iter().map(|(_, f)| f.clone()).collect();
    write_json(&summarize(&sets), &cmd.out.join("stats.json"))?;
    println!("analyzed {} records into {}", rows.len(), cmd.out.display());
    Ok(())
}

/// Windows of one record, labeled against its detected release start.
fn record_windows(record: &HandoverRecord) -> Result<Vec<GripWindow>> {
    let forces = record.forces()?;
    let giver = grip_force(&forces.giver_grip)?;
    let taker = grip_force(&forces.taker_grip)?;
    let tt = transfer_time(&giver, &taker)?;
    let gr = grip_release_time(&giver, tt.t_tak_con)?;
    make_windows(record, gr.t_rel_start)
}

fn manifest_windows(manifest_path: &Path) -> Result<Vec<GripWindow>> {
    let records = load_manifest_records(manifest_path)?;
    let mut windows = Vec::new();
    for (_, record) in &records {
        windows.extend(record_windows(record)?);
    }
    Ok(windows)
}

fn cmd_train(cmd: &TrainCmd, config: &Config) -> Result<()> {
    let mut train_config = config.train.clone();
    train_config.stage = match cmd.stage {
        StageArg::Pretrain => Stage::Pretrain,
        StageArg::Finetune => Stage::Finetune,
    };
    if let Some(s) = cmd.seed {
        train_config.seed = s;
    }
    if let Some(e) = cmd.epochs {
        train_config.max_epochs = e;
    }
    if let Some(b) = cmd.batch_size {
        train_config.batch_size = b;
    }
    if let Some(lr) = cmd.learning_rate {
        train_config.learning_rate = lr;
    }
    if train_config.stage == Stage::Finetune && cmd.init.is_none() {
        return Err(Error::Parameter(
            "--stage finetune requires --init with a pretrained model".into(),
        ));
    }
    let initial = cmd.init.as_deref().map(load_model).transpose()?;
    let windows = manifest_windows(&cmd.manifest)?;
    let outcome = train(&windows, &train_config, initial.as_ref())?;
    let out_dir = cmd.out.parent().unwrap_or(Path::new("."));
    let mut echoed = config.clone();
    echoed.train = train_config.clone();
    echoed.echo_into(out_dir)?;
    save_model(&outcome.model, &cmd.out)?;
    let curves_path = out_dir.join("curves.csv");
    let mut writer = csv::Writer::from_path(&curves_path)
        .map_err(|e| Error::format(&curves_path, e.to_string()))?;
    writer
        .write_record(["epoch", "train_loss", "test_loss", "train_accuracy", "test_accuracy"])
        .map_err(|e| Error::format(&curves_path, e.to_string()))?;
    for c in &outcome.curves {
        writer
            .write_record([
                c.epoch.to_string(),
                c.train_loss.to_string(),
                c.test_loss.to_string(),
                c.train_accuracy.to_string(),
                c.test_accuracy.to_string(),
            ])
            .map_err(|e| Error::format(&curves_path, e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(&curves_path, e))?;
    println!(
        "trained on {} windows ({} epochs, best epoch {}); model at {}",
        windows.len(),
        outcome.curves.len(),
        outcome.best_epoch,
        cmd.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct EvaluationReport {
    windows: usize,
    accuracy: f64,
    true_positives: usize,
    true_negatives: usize,
    false_positives: usize,
    false_negatives: usize,
    mean_loss: f64,
}

fn cmd_evaluate(cmd: &EvaluateCmd, _config: &Config) -> Result<()> {
    let model = load_model(&cmd.model)?;
    let windows = manifest_windows(&cmd.manifest)?;
    if windows.is_empty() {
        return Err(Error::Parameter("manifest yields no windows".into()));
    }
    let (mut tp, mut tn, mut fp, mut fneg) = (0usize, 0usize, 0usize, 0usize);
    let mut loss_sum = 0.0;
    for w in &windows {
        let out = model.forward(w, ForwardMode::Eval)?;
        let predicted = out.p >= 0.5;
        match (predicted, w.label == 1) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
        }
        let (_, _, t) = handover::model::loss(out.p, w.label, &out.mu, &out.logvar);
        loss_sum += t;
    }
    let report = EvaluationReport {
        windows: windows.len(),
        accuracy: (tp + tn) as f64 / windows.len() as f64,
        true_positives: tp,
        true_negatives: tn,
        false_positives: fp,
        false_negatives: fneg,
        mean_loss: loss_sum / windows.len() as f64,
    };
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::format(&cmd.manifest, e.to_string()))?;
    println!("{text}");
    if let Some(out) = &cmd.out {
        write_json(&report, out)?;
    }
    Ok(())
}

fn build_strategy(
    arg: StrategyArg,
    model_path: Option<&Path>,
    config: &Config,
) -> Result<StrategyKind> {
    Ok(match arg {
        StrategyArg::Gr2 => {
            let path = model_path.ok_or_else(|| {
                Error::Parameter("--strategy gr2 requires --model".into())
            })?;
            StrategyKind::Gr2 {
                model: load_model(path)?,
                light_threshold_n: config.light_threshold_n,
                weight_cutover_kg: config.weight_cutover_kg,
            }
        }
        StrategyArg::Loadshare => StrategyKind::LoadShare {
            fraction: config.load_share_fraction,
        },
        StrategyArg::Pull => StrategyKind::PullForce {
            threshold_n: config.pull_threshold_n,
        },
    })
}

fn cmd_replay(cmd: &ReplayCmd, config: &Config) -> Result<()> {
    let strategy = build_strategy(cmd.strategy, cmd.model.as_deref(), config)?;
    let record = load_record(&cmd.record)?;
    let trace = run_trace(&strategy, &record, config.engine())?;
    config.echo_into(&cmd.out)?;
    let csv_path = cmd.out.join("trace.csv");
    let mut writer = csv::Writer::from_path(&csv_path)
        .map_err(|e| Error::format(&csv_path, e.to_string()))?;
    writer
        .write_record([
            "tick",
            "fy",
            "fz",
            "load_share_fraction",
            "model_p",
            "decision",
            "compute_time_us",
        ])
        .map_err(|e| Error::format(&csv_path, e.to_string()))?;
    for t in &trace.ticks {
        writer
            .write_record([
                t.tick.to_string(),
                t.fy.to_string(),
                t.fz.to_string(),
                t.load_share_fraction.to_string(),
                t.model_p.map(|p| p.to_string()).unwrap_or_default(),
                match t.decision {
                    handover::strategy::Decision::Hold => "hold".to_string(),
                    handover::strategy::Decision::Release => "release".to_string(),
                },
                t.compute_time_us.to_string(),
            ])
            .map_err(|e| Error::format(&csv_path, e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(&csv_path, e))?;

    #[derive(Serialize)]
    struct TraceSummary<'a> {
        strategy: handover::strategy::StrategyTag,
        release_tick: Option<usize>,
        counterfactuals: &'a [handover::strategy::Counterfactual],
        latency: handover::strategy::LatencyReport,
    }
    let summary = TraceSummary {
        strategy: trace.strategy,
        release_tick: trace.release_tick,
        counterfactuals: &trace.counterfactuals,
        latency: latency_audit(&trace, TICK_BUDGET_MS),
    };
    write_json(&summary, &cmd.out.join("trace.json"))?;
    println!(
        "replayed {} ticks; release at {:?}",
        trace.ticks.len(),
        trace.release_tick
    );
    Ok(())
}

fn load_corpus(dir: &Path) -> Result<Vec<HandoverRecord>> {
    let manifest_path = dir.join("manifest.json");
    if manifest_path.exists() {
        return Ok(load_manifest_records(&manifest_path)?
            .into_iter()
            .map(|(_, r)| r)
            .collect());
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.join("meta.json").exists())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Parameter(format!(
            "no record directories under {}",
            dir.display()
        )));
    }
    dirs.iter().map(|p| load_record(p)).collect()
}

fn cmd_bench(cmd: &BenchCmd, config: &Config) -> Result<()> {
    let corpus = load_corpus(&cmd.corpus)?;
    let mut strategies = Vec::new();
    if let Some(model_path) = &cmd.model {
        strategies.push(StrategyKind::Gr2 {
            model: load_model(model_path)?,
            light_threshold_n: config.light_threshold_n,
            weight_cutover_kg: config.weight_cutover_kg,
        });
    }
    strategies.push(StrategyKind::LoadShare {
        fraction: config.load_share_fraction,
    });
    strategies.push(StrategyKind::PullForce {
        threshold_n: config.pull_threshold_n,
    });
    let report = benchmark(&strategies, &corpus, config.engine())?;
    config.echo_into(&cmd.out)?;
    write_json(&report, &cmd.out.join("benchmark.json"))?;
    println!(
        "benchmarked {} strategies over {} records into {}",
        report.strategies.len(),
        report.corpus_size,
        cmd.out.display()
    );
    Ok(())
}

fn cmd_gen(cmd: &GenCmd, config: &Config) -> Result<()> {
    let mut spec = match &cmd.spec {
        None => GeneratorSpec::default(),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::format(p, format!("bad generator spec: {e}")))?
        }
    };
    if let Some(seed) = cmd.seed {
        spec.seed = seed;
    } else if cmd.spec.is_none() {
        spec.seed = config.seed;
    }
    if cmd.n == 0 {
        return Err(Error::Parameter("--n must be positive".into()));
    }
    config.echo_into(&cmd.out)?;
    let mut entries = Vec::with_capacity(cmd.n);
    let mut truths: Vec<(String, GroundTruth)> = Vec::with_capacity(cmd.n);
    for i in 0..cmd.n {
        let spec_i = GeneratorSpec {
            seed: spec.seed.wrapping_add(i as u64),
            ..spec.clone()
        };
        let (record, truth) = generate(&spec_i)?;
        let name = format!("record_{i:04}");
        save_record(&record, &cmd.out.join(&name))?;
        entries.push(ManifestEntry {
            path: name.clone(),
            weight_kg: record.meta.weight_kg,
            object_label: record.meta.object_label.clone(),
            dataset_tag: record.meta.dataset_tag,
            has_forces: true,
        });
        truths.push((name, truth));
    }
    save_manifest(
        &DatasetManifest { entries },
        &cmd.out.join("manifest.json"),
    )?;
    write_json(&truths, &cmd.out.join("truth.json"))?;
    write_json(&spec, &cmd.out.join("generator_spec.json"))?;
    println!("generated {} records into {}", cmd.n, cmd.out.display());
    Ok(())
}

fn cmd_plan(cmd: &PlanCmd, config: &Config) -> Result<()> {
    let text = fs::read_to_string(&cmd.waypoints).map_err(|e| Error::io(&cmd.waypoints, e))?;
    let points: Vec<[f64; 3]> = serde_json::from_str(&text)
        .map_err(|e| Error::format(&cmd.waypoints, format!("bad waypoints: {e}")))?;
    let waypoints: Vec<Vec3> = points.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect();
    let plan = plan_reach(&waypoints, cmd.category.into(), SAMPLE_RATE_HZ)?;
    config.echo_into(&cmd.out)?;
    let csv_path = cmd.out.join("trajectory.csv");
    let mut writer = csv::Writer::from_path(&csv_path)
        .map_err(|e| Error::format(&csv_path, e.to_string()))?;
    writer
        .write_record(["time_s", "px", "py", "pz", "vx", "vy", "vz", "ax", "ay", "az"])
        .map_err(|e| Error::format(&csv_path, e.to_string()))?;
    let t = &plan.trajectory;
    for i in 0..t.len() {
        writer
            .write_record([
                t.time_s[i].to_string(),
                t.position[i].x.to_string(),
                t.position[i].y.to_string(),
                t.position[i].z.to_string(),
                t.velocity[i].x.to_string(),
                t.velocity[i].y.to_string(),
                t.velocity[i].z.to_string(),
                t.acceleration[i].x.to_string(),
                t.acceleration[i].y.to_string(),
                t.acceleration[i].z.to_string(),
            ])
            .map_err(|e| Error::format(&csv_path, e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(&csv_path, e))?;

    #[derive(Serialize)]
    struct PlanSummary {
        category: String,
        max_accel_cap: f64,
        segment_durations_s: Vec<f64>,
        collapsed_waypoints: usize,
        max_speed: f64,
        max_accel: f64,
        samples: usize,
    }
    let summary = PlanSummary {
        category: plan.profile.category.to_string(),
        max_accel_cap: plan.profile.max_accel_cap,
        segment_durations_s: plan.segment_durations_s.clone(),
        collapsed_waypoints: plan.collapsed_waypoints,
        max_speed: plan.trajectory.max_speed(),
        max_accel: plan.trajectory.max_accel(),
        samples: plan.trajectory.len(),
    };
    write_json(&summary, &cmd.out.join("plan.json"))?;
    println!(
        "planned {} samples across {} segments",
        plan.trajectory.len(),
        plan.segment_durations_s.len()
    );
    Ok(())
}

fn cmd_serve(cmd: &ServeCmd, config: &Config) -> Result<()> {
    let strategy = build_strategy(cmd.strategy, cmd.model.as_deref(), config)?;
    let addr = format!("127.0.0.1:{}", cmd.port);
    let listener = TcpListener::bind(&addr).map_err(|e| Error::io(&addr, e))?;
    println!("listening on {addr}");
    serve(listener, strategy, config.engine())
}
