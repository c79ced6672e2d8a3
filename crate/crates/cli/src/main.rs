//! Command-line front end: one subcommand per pipeline stage plus `run`
//! for the whole chain driven by a TOML config.

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use econlob::book::{build_book, OverdrawPolicy, DEFAULT_DEPTH};
use econlob::cleaning::{outlier_filter, FilterParams};
use econlob::features::{
    extract_features, CleanedDay, FeatureConfig, FeatureFlags,
};
use econlob::messages::{parse_message_file, write_message_file};
use econlob::model::checkpoint;
use econlob::model::nadam::NadamConfig;
use econlob::model::train::{evaluate, train, TrainConfig};
use econlob::model::{Mlp, ModelConfig, Preset, Task};
use econlob::pipeline::{
    self, label_windows, run_pipeline, stage_seed, ProtocolConfig, RunConfig,
};
use econlob::protocol::{chronological_split, undersample, MinMaxScaler, SplitSpec};
use econlob::snapio::{read_snapshots_binary, write_snapshots_binary, write_snapshots_text};
use econlob::synth::{generate_messages, SynthConfig};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "econlob",
    about = "Limit-order-book feature pipeline and price-move prediction",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic message file with a ground-truth companion
    Synth(SynthArgs),
    /// Rebuild the order book from a message file
    Book(BookArgs),
    /// Flag outlier observations in the reconstructed mid series
    Clean(CleanArgs),
    /// Extract per-window features from snapshots
    Features(FeaturesArgs),
    /// Attach labels to extracted feature windows
    Label(LabelArgs),
    /// Split, balance, and min-max normalize a labeled feature file
    Normalize(NormalizeArgs),
    /// Train a network on normalized features
    Train(TrainArgs),
    /// Evaluate a trained model on the held-out test rows
    Evaluate(EvaluateArgs),
    /// Run the full pipeline from a TOML config
    Run(RunArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output message file
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth JSON companion
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of mid-price moves (four messages each)
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    /// Initial mid price in integer price units
    #[arg(long, default_value_t = 1_000_000)]
    s0: i64,
    #[arg(long, default_value_t = 100)]
    tick: i64,
    /// Per-step volatility of the log mid
    #[arg(long, default_value_t = 4e-4)]
    sigma: f64,
    #[arg(long, default_value_t = 34_200_000)]
    start_timestamp: i64,
    /// Median inter-message gap in ms
    #[arg(long, default_value_t = 50)]
    dt_ms: i64,
    /// Use random touch volumes instead of the predictive encoding
    #[arg(long)]
    no_signal: bool,
}

#[derive(Args)]
struct BookArgs {
    /// Input message file
    #[arg(long)]
    input: PathBuf,
    /// Output snapshot file (binary)
    #[arg(long)]
    out: PathBuf,
    /// Also write a delimited text copy here
    #[arg(long)]
    text: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_DEPTH)]
    depth: usize,
    /// Fail on overdrawn cancellations/executions instead of clamping
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct CleanArgs {
    /// Input snapshot file
    #[arg(long)]
    input: PathBuf,
    /// Output keep-mask file
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 40)]
    k: usize,
    #[arg(long, default_value_t = 3.0)]
    alpha: f64,
    #[arg(long, default_value_t = 2.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0.10)]
    trim: f64,
}

#[derive(Args)]
struct FeaturesArgs {
    /// Input snapshot file
    #[arg(long)]
    input: PathBuf,
    /// Keep mask from `clean`
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Output feature file
    #[arg(long)]
    out: PathBuf,
    /// Prediction task; sets the window stride
    #[arg(long, value_parser = parse_task, default_value = "direction")]
    task: Task,
    #[arg(long, default_value_t = 1)]
    tick: i64,
    /// Disable the noise feature group
    #[arg(long)]
    no_noise: bool,
}

#[derive(Args)]
struct LabelArgs {
    /// Snapshot file the features were extracted from
    #[arg(long)]
    snapshots: PathBuf,
    /// Keep mask used during extraction, if any
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Feature file from `features`
    #[arg(long)]
    features: PathBuf,
    /// Output labeled feature file
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_parser = parse_task, default_value = "direction")]
    task: Task,
    /// Stationarity threshold (three-class task)
    #[arg(long, default_value_t = 2e-5)]
    alpha: f64,
    /// Look-ahead in events (three-class task)
    #[arg(long, default_value_t = 10)]
    lookahead: usize,
}

#[derive(Args)]
struct NormalizeArgs {
    /// Labeled feature file
    #[arg(long)]
    input: PathBuf,
    /// Output normalized feature file
    #[arg(long)]
    out: PathBuf,
    /// Output scaler parameters
    #[arg(long)]
    scaler: PathBuf,
    /// Output split indices
    #[arg(long)]
    split: PathBuf,
    #[arg(long, default_value_t = 0.7)]
    train_fraction: f64,
    #[arg(long, default_value_t = 0.2)]
    validation_fraction: f64,
    /// Skip undersampling of the training block
    #[arg(long)]
    no_undersample: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    /// Normalized labeled feature file
    #[arg(long)]
    input: PathBuf,
    /// Split indices from `normalize`
    #[arg(long)]
    split: PathBuf,
    /// Output model checkpoint
    #[arg(long)]
    out: PathBuf,
    /// Output per-epoch loss history
    #[arg(long)]
    history: Option<PathBuf>,
    #[arg(long, default_value = "mlp1")]
    preset: String,
    #[arg(long, value_parser = parse_task, default_value = "direction")]
    task: Task,
    #[arg(long, default_value_t = 250)]
    epochs: usize,
    #[arg(long, default_value_t = 256)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.002)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Normalized labeled feature file
    #[arg(long)]
    input: PathBuf,
    /// Split indices from `normalize`
    #[arg(long)]
    split: PathBuf,
    /// Model checkpoint from `train`
    #[arg(long)]
    model: PathBuf,
    /// Write the full report as JSON here
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration
    #[arg(long)]
    config: PathBuf,
}

fn parse_task(raw: &str) -> Result<Task, String> {
    match raw.to_ascii_lowercase().as_str() {
        "direction" | "p1" => Ok(Task::Direction),
        "three-class" | "three_class" | "p2" => Ok(Task::ThreeClass),
        other => Err(format!(
            "unknown task {other:?}; use `direction` or `three-class`"
        )),
    }
}

fn main() {
    if let Err(e) = dispatch(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Book(args) => cmd_book(args),
        Command::Clean(args) => cmd_clean(args),
        Command::Features(args) => cmd_features(args),
        Command::Label(args) => cmd_label(args),
        Command::Normalize(args) => cmd_normalize(args),
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Run(args) => cmd_run(args),
    }
}

fn cmd_synth(args: SynthArgs) -> anyhow::Result<()> {
    let config = SynthConfig {
        seed: args.seed,
        n_steps: args.steps,
        s0: args.s0,
        tick: args.tick,
        sigma: args.sigma,
        start_timestamp: args.start_timestamp,
        dt_ms: args.dt_ms,
        signal: !args.no_signal,
    };
    let (events, truth) = generate_messages(&config).context("stage synth")?;
    write_message_file(&args.out, &events).context("stage synth")?;
    if let Some(truth_path) = &args.truth {
        truth.write_json(truth_path).context("stage synth")?;
    }
    println!(
        "synth: wrote {} messages ({} steps) to {}",
        events.len(),
        args.steps,
        args.out.display()
    );
    Ok(())
}

fn cmd_book(args: BookArgs) -> anyhow::Result<()> {
    let events = parse_message_file(&args.input).context("stage book")?;
    let policy = if args.strict {
        OverdrawPolicy::Hard
    } else {
        OverdrawPolicy::ClampWarn
    };
    let (snapshots, stats) = build_book(&events, args.depth, policy).context("stage book")?;
    write_snapshots_binary(&args.out, &snapshots, args.depth).context("stage book")?;
    if let Some(text) = &args.text {
        write_snapshots_text(text, &snapshots, args.depth).context("stage book")?;
    }
    println!(
        "book: {} events -> {} snapshots (clamped {}, one-sided {}, unknown ids {})",
        stats.events,
        snapshots.len(),
        stats.clamped,
        stats.one_sided_snapshots,
        stats.unknown_id_fallbacks
    );
    Ok(())
}

fn cmd_clean(args: CleanArgs) -> anyhow::Result<()> {
    let snapshots = read_snapshots_binary(&args.input).context("stage clean")?;
    let params = FilterParams {
        k: args.k,
        alpha_sd: args.alpha,
        gamma: args.gamma,
        trim_fraction: args.trim,
    };
    let two_sided: Vec<usize> = snapshots
        .iter()
        .enumerate()
        .filter(|(_, s)| s.mid.is_some())
        .map(|(i, _)| i)
        .collect();
    let mids: Vec<f64> = two_sided
        .iter()
        .map(|&i| snapshots[i].mid.expect("two-sided").as_f64())
        .collect();
    let (keep, report) = outlier_filter(&mids, &params).context("stage clean")?;
    let mut mask = vec![true; snapshots.len()];
    for (&i, &k) in two_sided.iter().zip(&keep) {
        mask[i] = k;
    }
    pipeline::write_mask_csv(&args.out, &mask).context("stage clean")?;
    println!("clean: {}", report.summary());
    Ok(())
}

fn cmd_features(args: FeaturesArgs) -> anyhow::Result<()> {
    let snapshots = read_snapshots_binary(&args.input).context("stage features")?;
    let mask = args
        .mask
        .as_deref()
        .map(pipeline::read_mask_csv)
        .transpose()
        .context("stage features")?;
    if let Some(m) = &mask {
        if m.len() != snapshots.len() {
            bail!(
                "stage features: mask covers {} snapshots, file has {}",
                m.len(),
                snapshots.len()
            );
        }
    }
    let day = CleanedDay::from_snapshots(&snapshots, mask.as_deref());
    let config = FeatureConfig {
        flags: FeatureFlags {
            noise: !args.no_noise,
            ..FeatureFlags::default()
        },
        window: RunConfig::window_for_task(args.task),
        tick: args.tick,
        ..FeatureConfig::default()
    };
    let (matrix, stats) =
        extract_features(&day, snapshots.len(), &config).context("stage features")?;
    pipeline::write_matrix_csv(&args.out, &matrix).context("stage features")?;
    println!(
        "features: {} windows -> {} rows ({} dropped, {} short noise windows)",
        stats.windows_total,
        matrix.n_rows(),
        stats.windows_dropped,
        stats.short_noise_windows
    );
    Ok(())
}

fn cmd_label(args: LabelArgs) -> anyhow::Result<()> {
    let snapshots = read_snapshots_binary(&args.snapshots).context("stage label")?;
    let mask = args
        .mask
        .as_deref()
        .map(pipeline::read_mask_csv)
        .transpose()
        .context("stage label")?;
    let day = CleanedDay::from_snapshots(&snapshots, mask.as_deref());
    let matrix = pipeline::read_matrix_csv(&args.features).context("stage label")?;
    let protocol = ProtocolConfig {
        task: args.task,
        alpha: args.alpha,
        lookahead: args.lookahead,
        undersample: true,
    };
    let (labeled, unlabeled) = label_windows(&matrix, &day, &protocol);
    if labeled.is_empty() {
        bail!("stage label: no window could be labeled");
    }
    pipeline::write_features_csv(&args.out, &labeled).context("stage label")?;
    println!(
        "label: {} rows labeled, {} dropped without a label",
        labeled.len(),
        unlabeled
    );
    Ok(())
}

fn cmd_normalize(args: NormalizeArgs) -> anyhow::Result<()> {
    let labeled = pipeline::read_features_csv(&args.input).context("stage normalize")?;
    let split_spec = SplitSpec {
        train_fraction: args.train_fraction,
        validation_fraction: args.validation_fraction,
    };
    let mut split = chronological_split(labeled.len(), &split_spec).context("stage normalize")?;
    let full_train = split.train.len();
    if !args.no_undersample {
        let classes: Vec<usize> = split.train.iter().map(|&i| labeled.classes[i]).collect();
        let kept =
            undersample(&classes, stage_seed(args.seed, "undersample")).context("stage normalize")?;
        split.train = kept.into_iter().map(|i| split.train[i]).collect();
    }
    let scaler = MinMaxScaler::fit(&labeled.rows, &split.train).context("stage normalize")?;
    let mut normalized = labeled.clone();
    normalized.rows = scaler.apply(&labeled.rows).context("stage normalize")?;
    pipeline::write_features_csv(&args.out, &normalized).context("stage normalize")?;
    pipeline::write_scaler_json(&args.scaler, &scaler).context("stage normalize")?;
    pipeline::write_split_json(&args.split, &split).context("stage normalize")?;
    println!(
        "normalize: train {} (balanced from {}), validation {}, test {}, {} constant columns",
        split.train.len(),
        full_train,
        split.validation.len(),
        split.test.len(),
        scaler.constant_columns.len()
    );
    Ok(())
}

fn cmd_train(args: TrainArgs) -> anyhow::Result<()> {
    let labeled = pipeline::read_features_csv(&args.input).context("stage train")?;
    let split = pipeline::read_split_json(&args.split).context("stage train")?;
    let preset = Preset::parse(&args.preset).context("stage train")?;
    let mut model = Mlp::new(ModelConfig::from_preset(
        preset,
        labeled.columns.len(),
        args.task,
        stage_seed(args.seed, "init"),
    ))
    .context("stage train")?;
    let train_set = labeled.select(&split.train).to_dataset().context("stage train")?;
    let val_set = labeled
        .select(&split.validation)
        .to_dataset()
        .context("stage train")?;
    let config = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch_size,
        optimizer: NadamConfig {
            learning_rate: args.learning_rate,
            ..NadamConfig::default()
        },
        seed: stage_seed(args.seed, "shuffle"),
    };
    let history = train(
        &mut model,
        &train_set,
        (!split.validation.is_empty()).then_some(&val_set),
        &config,
    )
    .context("stage train")?;
    checkpoint::save(&model, &args.out).context("stage train")?;
    if let Some(history_path) = &args.history {
        std::fs::write(history_path, history.to_csv()).context("stage train")?;
    }
    println!(
        "train: {} rows, {} epochs, final loss {:.6} -> {}",
        train_set.len(),
        args.epochs,
        history.final_train_loss().unwrap_or(f64::NAN),
        args.out.display()
    );
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> anyhow::Result<()> {
    let labeled = pipeline::read_features_csv(&args.input).context("stage evaluate")?;
    let split = pipeline::read_split_json(&args.split).context("stage evaluate")?;
    let model = checkpoint::load(&args.model).context("stage evaluate")?;
    let test_set = labeled
        .select(&split.test)
        .to_dataset()
        .context("stage evaluate")?;
    let report = evaluate(&model, &test_set).context("stage evaluate")?;
    if let Some(out) = &args.out {
        let json = serde_json::to_string_pretty(&report).expect("serializable");
        std::fs::write(out, json).context("stage evaluate")?;
    }
    println!("evaluate: {}", report.summary());
    Ok(())
}

fn cmd_run(args: RunArgs) -> anyhow::Result<()> {
    let config = RunConfig::load(&args.config).context("stage run")?;
    let manifest = run_pipeline(&config).context("stage run")?;
    print!("{}", manifest.report());
    println!(
        "run: artifacts and manifest written to {}",
        config.output_dir.display()
    );
    Ok(())
}
