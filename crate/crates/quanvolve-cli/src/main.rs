//! Command-line front end: cache building, training, evaluation, resource
//! counting and metrics aggregation.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use quanvolve::accounting;
use quanvolve::data::{
    load_idx, make_splits, preencode, Dataset, EncodedDataset, Split, DATA_DIR_ENV, EDGE,
    NUM_CLASSES,
};
use quanvolve::encoders::{EncoderKind, ThresholdConfig};
use quanvolve::experiment::{aggregate, run_experiment, ExperimentConfig, MetricsLog, TrainedModel};
use quanvolve::quanvolution::FilterSpec;

#[derive(Parser)]
#[command(
    name = "quanvolve",
    version,
    about = "Trainable quanvolutional networks over quantum image encodings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pre-encode one dataset split into a QENC state cache.
    Encode(EncodeArgs),
    /// Train a model and write a metrics CSV.
    Train(TrainArgs),
    /// Evaluate a saved model against an encoded dataset.
    Eval(EvalArgs),
    /// Print the resource table row (N, Q, G, P) for a configuration.
    Count(CountArgs),
    /// Aggregate metrics CSVs from a seed sweep.
    Report(ReportArgs),
}

#[derive(Args)]
struct DataArgs {
    /// MNIST directory holding train-images-idx3-ubyte and
    /// train-labels-idx1-ubyte; falls back to $QUANVOLVE_DATA_DIR.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 10000)]
    train_size: usize,
    #[arg(long, default_value_t = 200)]
    val_size: usize,
    #[arg(long, default_value_t = 1000)]
    test_size: usize,
    /// Seed for the split shuffle and head initialization.
    #[arg(long, default_value_t = 42)]
    dataset_seed: u64,
}

impl DataArgs {
    fn splits(&self) -> Result<(Dataset, Dataset, Dataset)> {
        let dir = match &self.data_dir {
            Some(d) => d.clone(),
            None => PathBuf::from(std::env::var(DATA_DIR_ENV).with_context(|| {
                format!("--data-dir not given and {DATA_DIR_ENV} is not set")
            })?),
        };
        let raw = load_idx(
            &dir.join("train-images-idx3-ubyte"),
            &dir.join("train-labels-idx1-ubyte"),
        )?;
        Ok(make_splits(
            &raw,
            (self.train_size, self.val_size, self.test_size),
            self.dataset_seed,
        )?)
    }
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long, value_parser = EncoderKind::from_str)]
    encoder: EncoderKind,
    /// Filter edge length (2 or 4).
    #[arg(long)]
    filter: usize,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Threshold-encoder cutoff t; pixels above t map to |1>.
    #[arg(long, default_value_t = 0)]
    threshold: u8,
    #[arg(long, value_parser = Split::from_str)]
    split: Split,
    #[command(flatten)]
    data: DataArgs,
    /// Output QENC file path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_parser = EncoderKind::from_str)]
    encoder: EncoderKind,
    #[arg(long)]
    filter: usize,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Number of trainable rotation gates R in the quanvolution circuit.
    #[arg(long)]
    rotations: usize,
    /// Circuit seed.
    #[arg(long)]
    seed: u64,
    /// Whether the quantum angles are trained (true) or frozen (false).
    #[arg(long, action = clap::ArgAction::Set)]
    trainable: bool,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 100)]
    steps: usize,
    #[arg(long, default_value_t = 50)]
    val_steps: usize,
    #[arg(long, default_value_t = 2)]
    batch: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    threshold: u8,
    /// Directory holding train.qenc, val.qenc and test.qenc. When omitted,
    /// the splits are encoded on the fly from --data-dir.
    #[arg(long)]
    cache: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
    /// Metrics CSV output path.
    #[arg(long)]
    metrics_out: PathBuf,
    /// Optional path for the trained model file.
    #[arg(long)]
    model_out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Saved model file.
    #[arg(long)]
    model: PathBuf,
    /// QENC cache file to evaluate against.
    #[arg(long)]
    cache: PathBuf,
    #[arg(long, default_value_t = 2)]
    batch: usize,
}

#[derive(Args)]
struct CountArgs {
    #[arg(long, value_parser = EncoderKind::from_str)]
    encoder: EncoderKind,
    #[arg(long)]
    filter: usize,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long)]
    rotations: usize,
}

#[derive(Args)]
struct ReportArgs {
    /// Glob matching the metrics CSVs of one configuration's seed sweep.
    #[arg(long)]
    metrics_glob: String,
    /// Number of final epochs averaged per run.
    #[arg(long, default_value_t = 20)]
    last_epochs: usize,
}

fn encode(args: &EncodeArgs) -> Result<()> {
    let filter = FilterSpec::new(args.filter, args.stride)?;
    let (train, val, test) = args.data.splits()?;
    let dataset = match args.split {
        Split::Train => train,
        Split::Val => val,
        Split::Test => test,
    };
    let encoded = preencode(
        &dataset,
        args.encoder,
        &filter,
        ThresholdConfig { t: args.threshold },
    )?;
    encoded.write_to(&args.out)?;
    eprintln!(
        "wrote {} ({} images x {} patches, {} qubits)",
        args.out.display(),
        encoded.len(),
        encoded.patches_per_image(),
        encoded.num_qubits()
    );
    Ok(())
}

fn load_split_caches(dir: &Path) -> Result<(EncodedDataset, EncodedDataset, EncodedDataset)> {
    let read = |name: &str| {
        EncodedDataset::read_from(&dir.join(name))
            .with_context(|| format!("reading {}", dir.join(name).display()))
    };
    Ok((read("train.qenc")?, read("val.qenc")?, read("test.qenc")?))
}

fn train(args: &TrainArgs) -> Result<()> {
    let filter = FilterSpec::new(args.filter, args.stride)?;
    let threshold = ThresholdConfig { t: args.threshold };
    let (enc_train, enc_val, enc_test) = match &args.cache {
        Some(dir) => load_split_caches(dir)?,
        None => {
            eprintln!("no --cache given, encoding splits on the fly");
            let (train, val, test) = args.data.splits()?;
            (
                preencode(&train, args.encoder, &filter, threshold)?,
                preencode(&val, args.encoder, &filter, threshold)?,
                preencode(&test, args.encoder, &filter, threshold)?,
            )
        }
    };

    let mut cfg = ExperimentConfig::new(args.encoder, filter, args.rotations, args.seed, args.trainable);
    cfg.epochs = args.epochs;
    cfg.steps_per_epoch = args.steps;
    cfg.val_steps = args.val_steps;
    cfg.batch_size = args.batch;
    cfg.lr = args.lr;
    cfg.threshold = threshold;
    cfg.dataset_seed = args.data.dataset_seed;

    let (log, model) = run_experiment(&cfg, &enc_train, &enc_val, &enc_test, |row| {
        eprintln!(
            "epoch {:>3}  train {:.4} / {:.3}  val {:.4} / {:.3}  ({:.1}s)",
            row.epoch, row.train_loss, row.train_acc, row.val_loss, row.val_acc, row.wall_secs
        );
    })?;

    std::fs::write(&args.metrics_out, log.to_csv())
        .with_context(|| format!("writing {}", args.metrics_out.display()))?;
    if let Some(path) = &args.model_out {
        model.save(path)?;
        eprintln!("saved model to {}", path.display());
    }
    println!("test,,,{},{}", log.test_loss, log.test_acc);
    Ok(())
}

fn eval(args: &EvalArgs) -> Result<()> {
    let model = TrainedModel::load(&args.model)?;
    let data = EncodedDataset::read_from(&args.cache)?;
    let (loss, acc) = model.evaluate(&data, args.batch)?;
    println!("loss,acc");
    println!("{loss},{acc}");
    Ok(())
}

fn count(args: &CountArgs) -> Result<()> {
    let counts = accounting::resources(
        args.encoder,
        EDGE as u64,
        EDGE as u64,
        args.filter as u64,
        args.stride as u64,
        args.rotations as u64,
        NUM_CLASSES as u64,
    )?;
    println!("N,Q,G,P");
    println!(
        "{},{},{},{}",
        counts.patches, counts.qubits, counts.gates, counts.params
    );
    Ok(())
}

fn report(args: &ReportArgs) -> Result<()> {
    let mut paths: Vec<PathBuf> = glob::glob(&args.metrics_glob)
        .context("bad glob pattern")?
        .collect::<std::result::Result<_, _>>()?;
    paths.sort();
    if paths.is_empty() {
        bail!("no metrics files match {:?}", args.metrics_glob);
    }
    let logs: Vec<MetricsLog> = paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading {}", p.display()))?;
            Ok(MetricsLog::from_csv(&text)?)
        })
        .collect::<Result<_>>()?;
    for p in &paths {
        eprintln!("aggregating {}", p.display());
    }
    let summary = aggregate(&logs, args.last_epochs)?;
    println!(
        "runs,train_loss_mean,train_loss_max,train_acc_mean,train_acc_max,\
         val_loss_mean,val_loss_max,val_acc_mean,val_acc_max,\
         test_loss_mean,test_loss_max,test_acc_mean,test_acc_max"
    );
    println!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
        summary.runs,
        summary.train_loss.mean,
        summary.train_loss.max,
        summary.train_acc.mean,
        summary.train_acc.max,
        summary.val_loss.mean,
        summary.val_loss.max,
        summary.val_acc.mean,
        summary.val_acc.max,
        summary.test_loss.mean,
        summary.test_loss.max,
        summary.test_acc.mean,
        summary.test_acc.max
    );
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Encode(args) => encode(&args),
        Command::Train(args) => train(&args),
        Command::Eval(args) => eval(&args),
        Command::Count(args) => count(&args),
        Command::Report(args) => report(&args),
    }
}
