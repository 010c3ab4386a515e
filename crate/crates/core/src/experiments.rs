//! Experiment drivers: qubit/block sweeps, timing benchmarks, ROC export and
//! flat `key = value` configuration files.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ansatz::{self, AnsatzConfig, Entangler, GradientMethod};
use crate::data::Dataset;
use crate::metrics::{self, RocCurve};
use crate::model::{Model, ModelKind, ModelSpec, N_FEATURES};
use crate::qsim::Statevector;
use crate::training::{self, RepeatSummary, RunReport, TrainConfig};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// configuration files

/// Parses `key = value` lines. Blank lines and `#` comments are skipped;
/// a repeated key is an error.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected key = value, got {raw:?}", i + 1))
        })?;
        let key = key.trim().replace('-', "_");
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", i + 1)));
        }
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(Error::Config(format!(
                "line {}: duplicate key {key:?}",
                i + 1
            )));
        }
    }
    Ok(map)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

/// Keys understood by [`apply_train_key`].
pub const TRAIN_KEYS: &[&str] = &[
    "model",
    "epochs",
    "batch_size",
    "lr",
    "dropout",
    "seed",
    "qubits",
    "blocks",
    "layers",
    "entangler",
    "gradient",
];

/// Sets one [`TrainConfig`] field from its textual form. Returns `false` for
/// keys that are not training settings.
pub fn apply_train_key(cfg: &mut TrainConfig, key: &str, value: &str) -> Result<bool> {
    match key {
        "model" => cfg.model_kind = parse_value(key, value)?,
        "epochs" => cfg.epochs = parse_value(key, value)?,
        "batch_size" => cfg.batch_size = parse_value(key, value)?,
        "lr" => cfg.lr = parse_value(key, value)?,
        "dropout" => cfg.dropout = parse_value(key, value)?,
        "seed" => cfg.seed = parse_value(key, value)?,
        "qubits" => cfg.ansatz.n_qubits = parse_value(key, value)?,
        "blocks" => cfg.ansatz.n_blocks = parse_value(key, value)?,
        "layers" => cfg.ansatz.layers_per_block = parse_value(key, value)?,
        "entangler" => {
            cfg.ansatz.entangler = match value {
                "ring" => Entangler::Ring,
                "chain" => Entangler::Chain,
                _ => {
                    return Err(Error::Config(format!(
                        "entangler must be ring or chain, got {value:?}"
                    )))
                }
            }
        }
        "gradient" => {
            cfg.gradient_method = match value {
                "adjoint" => GradientMethod::Adjoint,
                "parameter-shift" | "parameter_shift" => GradientMethod::ParameterShift,
                _ => {
                    return Err(Error::Config(format!(
                        "gradient must be adjoint or parameter-shift, got {value:?}"
                    )))
                }
            }
        }
        _ => return Ok(false),
    }
    Ok(true)
}

/// Human-readable list of settings that differ from the defaults.
pub fn overrides(cfg: &TrainConfig) -> Vec<String> {
    let d = TrainConfig::default();
    let mut out = Vec::new();
    let mut note = |key: &str, value: String, default: String| {
        if value != default {
            out.push(format!("{key}={value} (default {default})"));
        }
    };
    note(
        "model",
        cfg.model_kind.to_string(),
        d.model_kind.to_string(),
    );
    note("epochs", cfg.epochs.to_string(), d.epochs.to_string());
    note(
        "batch_size",
        cfg.batch_size.to_string(),
        d.batch_size.to_string(),
    );
    note("lr", cfg.lr.to_string(), d.lr.to_string());
    note("dropout", cfg.dropout.to_string(), d.dropout.to_string());
    note("seed", cfg.seed.to_string(), d.seed.to_string());
    note(
        "qubits",
        cfg.ansatz.n_qubits.to_string(),
        d.ansatz.n_qubits.to_string(),
    );
    note(
        "blocks",
        cfg.ansatz.n_blocks.to_string(),
        d.ansatz.n_blocks.to_string(),
    );
    note(
        "layers",
        cfg.ansatz.layers_per_block.to_string(),
        d.ansatz.layers_per_block.to_string(),
    );
    note(
        "entangler",
        format!("{:?}", cfg.ansatz.entangler),
        format!("{:?}", d.ansatz.entangler),
    );
    note(
        "gradient",
        format!("{:?}", cfg.gradient_method),
        format!("{:?}", d.gradient_method),
    );
    out
}

/// `# config: {...}` plus one `# override:` line per non-default setting.
pub fn config_header(
    label: &str,
    config: &impl Serialize,
    train: Option<&TrainConfig>,
) -> Result<String> {
    let mut header = format!("# {label}: {}\n", serde_json::to_string(config)?);
    if let Some(cfg) = train {
        for o in overrides(cfg) {
            header.push_str(&format!("# override: {o}\n"));
        }
    }
    Ok(header)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    Ok(BufWriter::new(
        File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.flush().map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// sweeps

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub qubits: Vec<usize>,
    pub blocks: Vec<usize>,
    pub runs_per_cell: usize,
    /// Shared settings; qubits, blocks and model kind are overridden per cell.
    pub base: TrainConfig,
    /// Epoch budgets of the classical reference rows.
    pub cc_epochs: Vec<usize>,
}

impl SweepSpec {
    /// Qubits 6..=12 step 2, blocks 1..=4.
    pub fn desk(base: TrainConfig) -> Self {
        SweepSpec {
            qubits: vec![6, 8, 10, 12],
            blocks: (1..=4).collect(),
            runs_per_cell: 5,
            base,
            cc_epochs: vec![350, 3500],
        }
    }

    /// Qubits 6..=18 step 2, blocks 1..=10.
    pub fn full(base: TrainConfig) -> Self {
        SweepSpec {
            qubits: (6..=18).step_by(2).collect(),
            blocks: (1..=10).collect(),
            ..Self::desk(base)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.qubits.is_empty() || self.blocks.is_empty() {
            return Err(Error::Config(
                "sweep needs at least one qubit count and one block count".into(),
            ));
        }
        if self.runs_per_cell == 0 {
            return Err(Error::Config("runs per cell must be >= 1".into()));
        }
        if self.cc_epochs.contains(&0) {
            return Err(Error::Config(
                "classical baseline epochs must be >= 1".into(),
            ));
        }
        for cfg in self.cell_configs() {
            cfg.validate()?;
        }
        self.base.validate()
    }

    fn cell_configs(&self) -> Vec<TrainConfig> {
        let mut out = Vec::new();
        for &n in &self.qubits {
            for &b in &self.blocks {
                let mut cfg = self.base.clone();
                cfg.model_kind = ModelKind::Fh;
                cfg.ansatz.n_qubits = n;
                cfg.ansatz.n_blocks = b;
                out.push(cfg);
            }
        }
        out
    }

    fn baseline_configs(&self) -> Vec<TrainConfig> {
        self.cc_epochs
            .iter()
            .map(|&epochs| TrainConfig {
                model_kind: ModelKind::Cc,
                epochs,
                ..self.base.clone()
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub model: ModelKind,
    pub n_qubits: usize,
    /// `None` for the classical rows.
    pub n_blocks: Option<usize>,
    pub epochs: usize,
    pub summary: RepeatSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub cells: Vec<SweepRow>,
    pub baselines: Vec<SweepRow>,
}

fn repeat(cfg: &TrainConfig, dataset: &Dataset, runs: usize, what: &str) -> Result<RepeatSummary> {
    training::repeat_runs(cfg, dataset, runs).map_err(|f| {
        Error::Training(format!(
            "{what}: {f} ({} completed runs discarded)",
            f.completed.len()
        ))
    })
}

/// Every FH cell and classical baseline, each averaged over
/// `runs_per_cell` seeds derived from `spec.base.seed`. All rows share
/// `dataset` and its split.
pub fn run_sweep(spec: &SweepSpec, dataset: &Dataset) -> Result<SweepResult> {
    spec.validate()?;
    let mut cells = Vec::new();
    for cfg in spec.cell_configs() {
        let (n, b) = (cfg.ansatz.n_qubits, cfg.ansatz.n_blocks);
        let start = Instant::now();
        let summary = repeat(
            &cfg,
            dataset,
            spec.runs_per_cell,
            &format!("cell {n} qubits x {b} blocks"),
        )?;
        log::info!(
            "fh {n} qubits x {b} blocks: mean AUC {:.4} (std {:.4}) in {:.1}s",
            summary.mean_test_auc,
            summary.std_test_auc,
            start.elapsed().as_secs_f64()
        );
        cells.push(SweepRow {
            model: ModelKind::Fh,
            n_qubits: n,
            n_blocks: Some(b),
            epochs: cfg.epochs,
            summary,
        });
    }
    let mut baselines = Vec::new();
    for cfg in spec.baseline_configs() {
        let summary = repeat(
            &cfg,
            dataset,
            spec.runs_per_cell,
            &format!("cc baseline {} epochs", cfg.epochs),
        )?;
        log::info!(
            "cc {} epochs: mean AUC {:.4}",
            cfg.epochs,
            summary.mean_test_auc
        );
        baselines.push(SweepRow {
            model: ModelKind::Cc,
            n_qubits: cfg.ansatz.n_qubits,
            n_blocks: None,
            epochs: cfg.epochs,
            summary,
        });
    }
    Ok(SweepResult {
        spec: spec.clone(),
        cells,
        baselines,
    })
}

impl SweepResult {
    pub fn without_timings(&self) -> SweepResult {
        let mut copy = self.clone();
        for row in copy.cells.iter_mut().chain(copy.baselines.iter_mut()) {
            for r in &mut row.summary.reports {
                *r = r.without_timings();
            }
        }
        copy
    }

    pub fn rows(&self) -> impl Iterator<Item = &SweepRow> {
        self.cells.iter().chain(&self.baselines)
    }

    /// Mean test AUC of the FH cell, if it was part of the sweep.
    pub fn cell(&self, n_qubits: usize, n_blocks: usize) -> Option<&SweepRow> {
        self.cells
            .iter()
            .find(|c| c.n_qubits == n_qubits && c.n_blocks == Some(n_blocks))
    }

    /// Long-format matrix: one row per FH cell, then the classical rows.
    pub fn write_matrix_csv<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(config_header("config", &self.spec, Some(&self.spec.base))?.as_bytes())
            .map_err(|e| Error::io("<matrix csv>", e))?;
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record([
            "model",
            "n_qubits",
            "n_blocks",
            "epochs",
            "runs",
            "mean_test_auc",
            "std_test_auc",
        ])?;
        for row in self.rows() {
            writer.write_record([
                row.model.to_string(),
                row.n_qubits.to_string(),
                row.n_blocks.map(|b| b.to_string()).unwrap_or_default(),
                row.epochs.to_string(),
                row.summary.reports.len().to_string(),
                row.summary.mean_test_auc.to_string(),
                row.summary.std_test_auc.to_string(),
            ])?;
        }
        writer.flush().map_err(|e| Error::io("<matrix csv>", e))?;
        Ok(())
    }

    /// Writes `matrix.csv`, `sweep.json` and one JSON report per row under `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let path = dir.join("matrix.csv");
        let mut out = create(&path)?;
        self.write_matrix_csv(&mut out)?;
        out.flush().map_err(|e| Error::io(&path, e))?;
        for row in self.rows() {
            let name = match row.n_blocks {
                Some(b) => format!("fh_q{}_b{}.json", row.n_qubits, b),
                None => format!("cc_q{}_e{}.json", row.n_qubits, row.epochs),
            };
            write_json(&dir.join("cells").join(name), row)?;
        }
        write_json(&dir.join("sweep.json"), self)
    }
}

// ---------------------------------------------------------------------------
// timing

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchSpec {
    pub qubits: Vec<usize>,
    pub blocks: Vec<usize>,
    /// Timed samples per configuration; the median is reported.
    pub reps: usize,
    pub batch_size: usize,
    /// Rows in the synthetic set used for the per-epoch timing.
    pub epoch_rows: usize,
    /// Lower bound on the duration of one timed sample.
    pub min_sample_seconds: f64,
    pub seed: u64,
    pub gradient_method: GradientMethod,
}

impl Default for BenchSpec {
    fn default() -> Self {
        BenchSpec {
            qubits: vec![8],
            blocks: vec![1],
            reps: 3,
            batch_size: 16,
            epoch_rows: 64,
            min_sample_seconds: 0.02,
            seed: 0,
            gradient_method: GradientMethod::default(),
        }
    }
}

impl BenchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.qubits.is_empty() || self.blocks.is_empty() {
            return Err(Error::Config(
                "bench needs at least one qubit count and one block count".into(),
            ));
        }
        if self.reps < 3 {
            return Err(Error::Config(format!(
                "bench needs at least 3 repetitions, got {}",
                self.reps
            )));
        }
        if !(self.min_sample_seconds >= 0.0 && self.min_sample_seconds.is_finite()) {
            return Err(Error::Config(
                "minimum sample duration must be finite and >= 0".into(),
            ));
        }
        if self.batch_size == 0 || self.epoch_rows == 0 {
            return Err(Error::Config(
                "batch size and epoch rows must be >= 1".into(),
            ));
        }
        for &n in &self.qubits {
            for &b in &self.blocks {
                AnsatzConfig::new(n, b)?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub n_qubits: usize,
    pub n_blocks: usize,
    /// Training steps over `epoch_rows` rows.
    pub seconds_per_epoch: f64,
    /// Forward, backward and update for one batch.
    pub seconds_per_training_step: f64,
    /// Embedding-gate application of every block for one sample.
    pub embedding_seconds: f64,
    pub repetitions: usize,
    /// Timed calls per sample of each quantity, raised until a sample spans
    /// at least [`MIN_TICKS`] timer ticks.
    pub inner_iterations: [usize; 3],
    pub epoch_samples: Vec<f64>,
    pub step_samples: Vec<f64>,
    pub embedding_samples: Vec<f64>,
}

pub const MIN_TICKS: u32 = 10;

/// Smallest non-zero difference between consecutive [`Instant`] readings.
pub fn timer_resolution() -> Duration {
    let mut best = Duration::MAX;
    for _ in 0..50 {
        let start = Instant::now();
        let mut now = Instant::now();
        while now == start {
            now = Instant::now();
        }
        best = best.min(now - start);
    }
    best
}

pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    }
}

fn random_rows(rng: &mut ChaCha8Rng, n: usize) -> Vec<(Vec<f64>, u8)> {
    (0..n)
        .map(|i| {
            let x = (0..N_FEATURES)
                .map(|_| rng.sample(StandardNormal))
                .collect();
            (x, (i % 2) as u8)
        })
        .collect()
}

/// Fixed inputs and model of one timed configuration.
struct BenchCell {
    ansatz: AnsatzConfig,
    model: Model,
    rng: ChaCha8Rng,
    batch: Vec<(Vec<f64>, u8)>,
    epoch: Vec<(Vec<f64>, u8)>,
    embedding: Vec<crate::qsim::Gate>,
    state: Statevector,
    batch_size: usize,
    method: GradientMethod,
}

impl BenchCell {
    fn new(spec: &BenchSpec, n_qubits: usize, n_blocks: usize) -> Result<Self> {
        let ansatz = AnsatzConfig::new(n_qubits, n_blocks)?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let model_spec = ModelSpec {
            kind: ModelKind::Fh,
            ansatz,
            dropout: TrainConfig::default().dropout,
        };
        let model = Model::init(&model_spec, &mut rng)?;
        let batch = random_rows(&mut rng, spec.batch_size);
        let epoch = random_rows(&mut rng, spec.epoch_rows);
        let embedding = ansatz::embedding_gates(&ansatz, &batch[0].0[..n_qubits.min(N_FEATURES)])?;
        Ok(BenchCell {
            ansatz,
            model,
            rng,
            batch,
            epoch,
            embedding,
            state: Statevector::zero(n_qubits)?,
            batch_size: spec.batch_size,
            method: spec.gradient_method,
        })
    }

    /// Runs quantity `which` (0 epoch, 1 step, 2 embedding) once.
    fn run(&mut self, which: usize) -> Result<()> {
        // lr 0 keeps the parameters fixed across repetitions
        let lr = 0.0;
        match which {
            0 => {
                for chunk in self.epoch.chunks(self.batch_size) {
                    let rows: Vec<(&[f64], u8)> =
                        chunk.iter().map(|(x, y)| (x.as_slice(), *y)).collect();
                    training::train_step(&mut self.model, &rows, lr, self.method, &mut self.rng)?;
                }
            }
            1 => {
                let rows: Vec<(&[f64], u8)> =
                    self.batch.iter().map(|(x, y)| (x.as_slice(), *y)).collect();
                training::train_step(&mut self.model, &rows, lr, self.method, &mut self.rng)?;
            }
            _ => {
                self.state.reset();
                for _ in 0..self.ansatz.n_blocks {
                    self.state.apply_all(&self.embedding)?;
                }
            }
        }
        Ok(())
    }

    fn timed(&mut self, which: usize, inner: usize) -> Result<Duration> {
        let start = Instant::now();
        for _ in 0..inner {
            self.run(which)?;
        }
        Ok(start.elapsed())
    }

    /// Smallest power-of-two call count whose duration reaches `floor`.
    fn calibrate(&mut self, which: usize, floor: Duration) -> Result<usize> {
        self.run(which)?; // warm-up
        let mut inner = 1usize;
        while self.timed(which, inner)? < floor {
            inner *= 2;
        }
        Ok(inner)
    }
}

/// Times every `(qubits, blocks)` pair. Configurations run one at a time;
/// repetitions are interleaved across configurations so slow spells of the
/// host spread over all of them instead of skewing one.
pub fn run_bench(spec: &BenchSpec) -> Result<Vec<TimingRecord>> {
    spec.validate()?;
    let tick = timer_resolution();
    let floor = (tick * MIN_TICKS).max(Duration::from_secs_f64(spec.min_sample_seconds));
    let mut cells = Vec::new();
    for &n in &spec.qubits {
        for &b in &spec.blocks {
            let mut cell = BenchCell::new(spec, n, b)?;
            let inner = [
                cell.calibrate(0, floor)?,
                cell.calibrate(1, floor)?,
                cell.calibrate(2, floor)?,
            ];
            cells.push((cell, inner, [Vec::new(), Vec::new(), Vec::new()]));
        }
    }
    for _ in 0..spec.reps {
        for (cell, inner, samples) in &mut cells {
            for which in 0..3 {
                let elapsed = cell.timed(which, inner[which])?;
                samples[which].push(elapsed.as_secs_f64() / inner[which] as f64);
            }
        }
    }
    let records: Vec<TimingRecord> = cells
        .into_iter()
        .map(
            |(cell, inner, [epoch_samples, step_samples, embedding_samples])| TimingRecord {
                n_qubits: cell.ansatz.n_qubits,
                n_blocks: cell.ansatz.n_blocks,
                seconds_per_epoch: median(&epoch_samples),
                seconds_per_training_step: median(&step_samples),
                embedding_seconds: median(&embedding_samples),
                repetitions: spec.reps,
                inner_iterations: inner,
                epoch_samples,
                step_samples,
                embedding_samples,
            },
        )
        .collect();
    for r in &records {
        log::info!(
            "{} qubits x {} blocks: {:.3e} s/step, {:.3e} s/epoch, {:.3e} s embedding",
            r.n_qubits,
            r.n_blocks,
            r.seconds_per_training_step,
            r.seconds_per_epoch,
            r.embedding_seconds
        );
    }
    Ok(records)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Data(
            "linear fit needs at least two paired points".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Data("linear fit needs distinct x values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - (slope * a + intercept)).powi(2))
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockFit {
    pub n_qubits: usize,
    pub fit: LinearFit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitRatio {
    pub n_blocks: usize,
    pub from_qubits: usize,
    pub to_qubits: usize,
    /// `(t_to / t_from)^(1 / (to - from))` on seconds per training step.
    pub per_qubit_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    /// Seconds per step against blocks, for every qubit count with two or
    /// more block values.
    pub block_fits: Vec<BlockFit>,
    /// Consecutive qubit counts at each block count.
    pub qubit_ratios: Vec<QubitRatio>,
}

pub fn summarize(records: &[TimingRecord]) -> Result<BenchSummary> {
    let mut by_qubits: BTreeMap<usize, Vec<&TimingRecord>> = BTreeMap::new();
    let mut by_blocks: BTreeMap<usize, Vec<&TimingRecord>> = BTreeMap::new();
    for r in records {
        by_qubits.entry(r.n_qubits).or_default().push(r);
        by_blocks.entry(r.n_blocks).or_default().push(r);
    }
    let mut block_fits = Vec::new();
    for (n_qubits, mut rows) in by_qubits {
        rows.sort_by_key(|r| r.n_blocks);
        rows.dedup_by_key(|r| r.n_blocks);
        if rows.len() >= 2 {
            let x: Vec<f64> = rows.iter().map(|r| r.n_blocks as f64).collect();
            let y: Vec<f64> = rows.iter().map(|r| r.seconds_per_training_step).collect();
            block_fits.push(BlockFit {
                n_qubits,
                fit: linear_fit(&x, &y)?,
            });
        }
    }
    let mut qubit_ratios = Vec::new();
    for (n_blocks, mut rows) in by_blocks {
        rows.sort_by_key(|r| r.n_qubits);
        rows.dedup_by_key(|r| r.n_qubits);
        for pair in rows.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let ratio = b.seconds_per_training_step / a.seconds_per_training_step;
            qubit_ratios.push(QubitRatio {
                n_blocks,
                from_qubits: a.n_qubits,
                to_qubits: b.n_qubits,
                per_qubit_ratio: ratio.powf(1.0 / (b.n_qubits - a.n_qubits) as f64),
            });
        }
    }
    Ok(BenchSummary {
        block_fits,
        qubit_ratios,
    })
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(";")
}

/// One row per configuration; raw samples are `;`-separated.
pub fn write_timing_csv<W: Write>(
    spec: &BenchSpec,
    records: &[TimingRecord],
    mut out: W,
) -> Result<()> {
    out.write_all(config_header("config", spec, None)?.as_bytes())
        .map_err(|e| Error::io("<timing csv>", e))?;
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record([
        "n_qubits",
        "n_blocks",
        "repetitions",
        "seconds_per_epoch",
        "seconds_per_training_step",
        "embedding_seconds",
        "epoch_samples",
        "step_samples",
        "embedding_samples",
    ])?;
    for r in records {
        writer.write_record([
            r.n_qubits.to_string(),
            r.n_blocks.to_string(),
            r.repetitions.to_string(),
            r.seconds_per_epoch.to_string(),
            r.seconds_per_training_step.to_string(),
            r.embedding_seconds.to_string(),
            join(&r.epoch_samples),
            join(&r.step_samples),
            join(&r.embedding_samples),
        ])?;
    }
    writer.flush().map_err(|e| Error::io("<timing csv>", e))?;
    Ok(())
}

/// Writes `timings.csv` and `summary.json` under `dir`.
pub fn save_bench(
    spec: &BenchSpec,
    records: &[TimingRecord],
    dir: impl AsRef<Path>,
) -> Result<BenchSummary> {
    let dir = dir.as_ref();
    let path = dir.join("timings.csv");
    let mut out = create(&path)?;
    write_timing_csv(spec, records, &mut out)?;
    out.flush().map_err(|e| Error::io(&path, e))?;
    let summary = summarize(records)?;
    #[derive(Serialize)]
    struct Saved<'a> {
        config: &'a BenchSpec,
        summary: &'a BenchSummary,
        records: &'a [TimingRecord],
    }
    write_json(
        &dir.join("summary.json"),
        &Saved {
            config: spec,
            summary: &summary,
            records,
        },
    )?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// ROC export

pub fn roc_from_report(report: &RunReport) -> Result<RocCurve> {
    let scores: Vec<f64> = report.test_scores.iter().map(|s| s.score).collect();
    let labels: Vec<u8> = report.test_scores.iter().map(|s| s.label).collect();
    metrics::roc_curve(&scores, &labels)
}

/// ROC points from a JSON run report or a `score,label` CSV, chosen by the
/// `.json` extension.
pub fn roc_from_file(path: impl AsRef<Path>) -> Result<RocCurve> {
    let path = path.as_ref();
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
    {
        roc_from_report(&RunReport::load_json(path)?)
    } else {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let (scores, labels) = training::read_scores_csv(file)?;
        metrics::roc_curve(&scores, &labels)
    }
}

/// Writes the curve with a `# source:` line naming the input.
pub fn save_roc(curve: &RocCurve, source: &Path, out_path: &Path) -> Result<()> {
    let mut out = create(out_path)?;
    writeln!(out, "# source: {}", source.display()).map_err(|e| Error::io(out_path, e))?;
    writeln!(out, "# auc: {}", curve.area()).map_err(|e| Error::io(out_path, e))?;
    curve.write_csv(&mut out)?;
    out.flush().map_err(|e| Error::io(out_path, e))
}
