//! `qcredit` command-line driver.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use qcredit::data::{self, Dataset, GeneratorSpec};
use qcredit::experiments::{self, BenchSpec, SweepSpec};
use qcredit::model::Checkpoint;
use qcredit::training::{self, TrainConfig};

#[derive(Parser, Debug)]
#[command(
    name = "qcredit",
    version,
    about = "Hybrid quantum/classical credit-scoring experiments"
)]
struct Cli {
    /// Log progress (repeat for debug output).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic imbalanced dataset as CSV.
    GenData(GenDataArgs),
    /// Train one model (or several seeds) and write reports.
    Train(TrainArgs),
    /// Mean test AUC over a qubit x block grid plus classical baselines.
    Sweep(SweepArgs),
    /// Time training steps over qubit and block counts.
    Bench(BenchArgs),
    /// ROC points from a run report (.json) or a score CSV.
    Roc(RocArgs),
}

#[derive(Args, Debug)]
struct GenDataArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 246)]
    n_pos: usize,
    #[arg(long, default_value_t = 2000)]
    n_neg: usize,
    #[arg(long, default_value_t = 1.0)]
    signal: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Training settings; unset flags fall back to the config file, then to
/// the defaults.
#[derive(Args, Debug, Default)]
struct TrainFlags {
    /// Flat `key = value` file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// fh or cc.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    layers: Option<usize>,
    /// ring or chain.
    #[arg(long)]
    entangler: Option<String>,
    /// adjoint or parameter-shift.
    #[arg(long)]
    gradient: Option<String>,
    /// Seed of the train/validation/test split.
    #[arg(long)]
    split_seed: Option<u64>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    qubits: Option<usize>,
    #[arg(long)]
    blocks: Option<usize>,
    /// Independent seeds derived from --seed.
    #[arg(long)]
    runs: Option<usize>,
    #[command(flatten)]
    flags: TrainFlags,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// desk (qubits 6-12, blocks 1-4) or full (qubits 6-18, blocks 1-10).
    #[arg(long, default_value = "desk")]
    preset: String,
    #[arg(long, value_delimiter = ',')]
    qubits: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    blocks: Option<Vec<usize>>,
    #[arg(long)]
    runs: Option<usize>,
    /// Epoch budgets of the classical reference rows.
    #[arg(long, value_delimiter = ',')]
    cc_epochs: Option<Vec<usize>>,
    #[command(flatten)]
    flags: TrainFlags,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "8")]
    qubits: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    blocks: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long, default_value_t = 64)]
    epoch_rows: usize,
    #[arg(long, default_value_t = 0.02)]
    min_sample_seconds: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct RocArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<qcredit::Error>() {
            Some(qcredit::Error::Config(_)) => Failure::Usage(describe(&e)),
            _ => Failure::Runtime(e),
        }
    }
}

impl From<qcredit::Error> for Failure {
    fn from(e: qcredit::Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

type CliResult<T = ()> = Result<T, Failure>;

/// Training config plus the extra keys the config file may carry.
struct Resolved {
    train: TrainConfig,
    split_seed: u64,
    runs: Option<usize>,
}

fn resolve(
    flags: &TrainFlags,
    qubits: Option<usize>,
    blocks: Option<usize>,
) -> CliResult<Resolved> {
    let file = match &flags.config {
        Some(path) => experiments::load_config(path)?,
        None => BTreeMap::new(),
    };
    let mut train = TrainConfig::default();
    let mut split_seed = 0;
    let mut runs = None;
    for (key, value) in &file {
        match key.as_str() {
            "split_seed" => split_seed = parse_file_value(key, value)?,
            "runs" => runs = Some(parse_file_value(key, value)?),
            _ => {
                if !experiments::apply_train_key(&mut train, key, value)? {
                    return Err(Failure::Usage(format!("unknown config key {key:?}")));
                }
            }
        }
    }
    let cli: [(&str, Option<String>); 11] = [
        ("model", flags.model.clone()),
        ("epochs", flags.epochs.map(|v| v.to_string())),
        ("batch_size", flags.batch_size.map(|v| v.to_string())),
        ("lr", flags.lr.map(|v| v.to_string())),
        ("dropout", flags.dropout.map(|v| v.to_string())),
        ("seed", flags.seed.map(|v| v.to_string())),
        ("layers", flags.layers.map(|v| v.to_string())),
        ("entangler", flags.entangler.clone()),
        ("gradient", flags.gradient.clone()),
        ("qubits", qubits.map(|v| v.to_string())),
        ("blocks", blocks.map(|v| v.to_string())),
    ];
    for (key, value) in cli {
        if let Some(value) = value {
            experiments::apply_train_key(&mut train, key, &value)?;
        }
    }
    if let Some(s) = flags.split_seed {
        split_seed = s;
    }
    train.validate()?;
    Ok(Resolved {
        train,
        split_seed,
        runs,
    })
}

fn parse_file_value<T: std::str::FromStr>(key: &str, value: &str) -> CliResult<T> {
    value
        .parse()
        .map_err(|_| Failure::Usage(format!("invalid value {value:?} for {key}")))
}

fn load_prepared(path: &Path, split_seed: u64) -> CliResult<Dataset> {
    let dataset = Dataset::load_csv(path)?;
    Ok(dataset
        .prepare(split_seed)
        .with_context(|| format!("preparing {}", path.display()))?)
}

fn create_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(Failure::Runtime)
}

fn gen_data(args: &GenDataArgs) -> CliResult {
    let spec = GeneratorSpec {
        n_pos: args.n_pos,
        n_neg: args.n_neg,
        signal_strength: args.signal,
        seed: args.seed,
    };
    let synthetic = data::generate(&spec)?;
    let header = format!(
        "config: {}",
        serde_json::to_string(&spec).map_err(anyhow::Error::from)?
    );
    synthetic.dataset.save_csv(&args.out, &[header])?;
    println!(
        "wrote {} rows ({} positive) to {}",
        synthetic.dataset.len(),
        synthetic.dataset.n_pos(),
        args.out.display()
    );
    Ok(())
}

fn train(args: &TrainArgs) -> CliResult {
    let resolved = resolve(&args.flags, args.qubits, args.blocks)?;
    let runs = args.runs.or(resolved.runs).unwrap_or(1);
    if runs == 0 {
        return Err(Failure::Usage("--runs must be >= 1".into()));
    }
    let dataset = load_prepared(&args.data, resolved.split_seed)?;
    create_dir(&args.out)?;
    let cfg = &resolved.train;
    for line in experiments::overrides(cfg) {
        log::info!("override: {line}");
    }
    if runs == 1 {
        let outcome = training::train(cfg, &dataset)?;
        let report = &outcome.report;
        report.save_json(args.out.join("report.json"))?;
        report.save_csvs(args.out.join("epochs.csv"), args.out.join("scores.csv"))?;
        Checkpoint::new(outcome.best_model, cfg.seed, cfg)?
            .save(args.out.join("checkpoint.json"))?;
        println!(
            "best validation AUC {:.4} at epoch {}; test AUC {:.4}",
            report.best_val_auc, report.best_epoch, report.test_auc
        );
    } else {
        let summary = training::repeat_runs(cfg, &dataset, runs).map_err(|f| {
            for (i, r) in f.completed.iter().enumerate() {
                let _ = r.save_json(args.out.join(format!("run{i}_report.json")));
            }
            Failure::Runtime(anyhow::Error::from(f))
        })?;
        for (i, r) in summary.reports.iter().enumerate() {
            r.save_json(args.out.join(format!("run{i}_report.json")))?;
            r.save_csvs(
                args.out.join(format!("run{i}_epochs.csv")),
                args.out.join(format!("run{i}_scores.csv")),
            )?;
        }
        let path = args.out.join("summary.json");
        let text = serde_json::to_string_pretty(&summary).map_err(anyhow::Error::from)?;
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        println!(
            "{runs} runs: mean test AUC {:.4} (std {:.4})",
            summary.mean_test_auc, summary.std_test_auc
        );
    }
    Ok(())
}

fn sweep(args: &SweepArgs) -> CliResult {
    let resolved = resolve(&args.flags, None, None)?;
    let mut spec = match args.preset.as_str() {
        "desk" => SweepSpec::desk(resolved.train),
        "full" => SweepSpec::full(resolved.train),
        other => {
            return Err(Failure::Usage(format!(
                "unknown preset {other:?}; use desk or full"
            )))
        }
    };
    if let Some(q) = &args.qubits {
        spec.qubits = q.clone();
    }
    if let Some(b) = &args.blocks {
        spec.blocks = b.clone();
    }
    if let Some(runs) = args.runs.or(resolved.runs) {
        spec.runs_per_cell = runs;
    }
    if let Some(e) = &args.cc_epochs {
        spec.cc_epochs = e.clone();
    }
    spec.validate()?;
    let dataset = load_prepared(&args.data, resolved.split_seed)?;
    let result = experiments::run_sweep(&spec, &dataset)?;
    result.save(&args.out)?;
    for row in result.rows() {
        let blocks = row
            .n_blocks
            .map(|b| b.to_string())
            .unwrap_or_else(|| "-".into());
        println!(
            "{} qubits={} blocks={} epochs={}: {:.4} +/- {:.4}",
            row.model,
            row.n_qubits,
            blocks,
            row.epochs,
            row.summary.mean_test_auc,
            row.summary.std_test_auc
        );
    }
    Ok(())
}

fn bench(args: &BenchArgs) -> CliResult {
    let spec = BenchSpec {
        qubits: args.qubits.clone(),
        blocks: args.blocks.clone(),
        reps: args.reps,
        epoch_rows: args.epoch_rows,
        min_sample_seconds: args.min_sample_seconds,
        seed: args.seed,
        ..BenchSpec::default()
    };
    spec.validate()?;
    let records = experiments::run_bench(&spec)?;
    let summary = experiments::save_bench(&spec, &records, &args.out)?;
    for r in &records {
        println!(
            "qubits={} blocks={}: {:.3e} s/step, {:.3e} s/epoch",
            r.n_qubits, r.n_blocks, r.seconds_per_training_step, r.seconds_per_epoch
        );
    }
    for f in &summary.block_fits {
        println!(
            "blocks fit at {} qubits: R^2 {:.4}",
            f.n_qubits, f.fit.r_squared
        );
    }
    for r in &summary.qubit_ratios {
        println!(
            "{} -> {} qubits: x{:.3} per qubit",
            r.from_qubits, r.to_qubits, r.per_qubit_ratio
        );
    }
    Ok(())
}

fn roc(args: &RocArgs) -> CliResult {
    let curve = experiments::roc_from_file(&args.input)?;
    experiments::save_roc(&curve, &args.input, &args.out)?;
    println!("{} points, AUC {:.4}", curve.fpr.len(), curve.area());
    Ok(())
}

/// Error chain joined with `: `, skipping causes already quoted by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match &cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train(a),
        Command::Sweep(a) => sweep(a),
        Command::Bench(a) => bench(a),
        Command::Roc(a) => roc(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(2)
        }
    }
}
