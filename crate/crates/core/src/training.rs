//! Mini-batch SGD training, evaluation and repeated-seed runs.

use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ansatz::{AnsatzConfig, GradientMethod};
use crate::data::{Dataset, SplitKind};
use crate::metrics;
use crate::model::{Gradients, Model, ModelKind, ModelSpec, ParamCount};
use crate::nn::{self, Mode};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub dropout: f64,
    pub seed: u64,
    pub model_kind: ModelKind,
    pub ansatz: AnsatzConfig,
    #[serde(default)]
    pub gradient_method: GradientMethod,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 350,
            batch_size: 16,
            lr: 0.001,
            dropout: 0.1,
            seed: 0,
            model_kind: ModelKind::Fh,
            ansatz: AnsatzConfig::new(6, 1).expect("valid default ansatz"),
            gradient_method: GradientMethod::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.ansatz.validate()?;
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be finite and >= 0, got {}",
                self.lr
            )));
        }
        nn::Dropout::new(self.dropout)?;
        Ok(())
    }

    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec {
            kind: self.model_kind,
            ansatz: self.ansatz,
            dropout: self.dropout,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub train_auc: f64,
    pub val_auc: f64,
    /// Wall time of the whole epoch, including end-of-epoch evaluation.
    pub epoch_seconds: f64,
    /// Mean wall time of one SGD step.
    pub step_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredRow {
    pub row: usize,
    pub score: f64,
    pub label: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: TrainConfig,
    pub seed: u64,
    pub param_count: ParamCount,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_auc: f64,
    pub test_loss: f64,
    pub test_auc: f64,
    /// Test-split probabilities of the best checkpoint.
    pub test_scores: Vec<ScoredRow>,
}

impl RunReport {
    /// Copy with every wall-clock field zeroed; everything else is a pure
    /// function of config, data and seed.
    pub fn without_timings(&self) -> RunReport {
        let mut copy = self.clone();
        for e in &mut copy.epochs {
            e.epoch_seconds = 0.0;
            e.step_seconds = 0.0;
        }
        copy
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    fn config_comment(&self) -> Result<String> {
        Ok(format!(
            "# config: {}\n",
            serde_json::to_string(&self.config)?
        ))
    }

    pub fn write_epoch_csv<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(self.config_comment()?.as_bytes())
            .map_err(|e| Error::io("<epoch csv>", e))?;
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record([
            "epoch",
            "train_loss",
            "val_loss",
            "train_auc",
            "val_auc",
            "epoch_seconds",
            "step_seconds",
        ])?;
        for e in &self.epochs {
            writer.write_record([
                e.epoch.to_string(),
                e.train_loss.to_string(),
                e.val_loss.to_string(),
                e.train_auc.to_string(),
                e.val_auc.to_string(),
                e.epoch_seconds.to_string(),
                e.step_seconds.to_string(),
            ])?;
        }
        writer.flush().map_err(|e| Error::io("<epoch csv>", e))?;
        Ok(())
    }

    /// `row,score,label` for the test split.
    pub fn write_scores_csv<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(self.config_comment()?.as_bytes())
            .map_err(|e| Error::io("<score csv>", e))?;
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["row", "score", "label"])?;
        for s in &self.test_scores {
            writer.write_record([s.row.to_string(), s.score.to_string(), s.label.to_string()])?;
        }
        writer.flush().map_err(|e| Error::io("<score csv>", e))?;
        Ok(())
    }

    pub fn save_csvs(
        &self,
        epochs_path: impl AsRef<Path>,
        scores_path: impl AsRef<Path>,
    ) -> Result<()> {
        for (path, scores) in [(epochs_path.as_ref(), false), (scores_path.as_ref(), true)] {
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            let out = std::io::BufWriter::new(file);
            if scores {
                self.write_scores_csv(out)?;
            } else {
                self.write_epoch_csv(out)?;
            }
        }
        Ok(())
    }
}

/// Reads `score,label` columns (other columns ignored, `#` comments allowed).
pub fn read_scores_csv<R: std::io::Read>(input: R) -> Result<(Vec<f64>, Vec<u8>)> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("score file lacks a {name:?} column")))
    };
    let (score_col, label_col) = (col("score")?, col("label")?);
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let score: f64 = record[score_col].parse().map_err(|_| {
            Error::Data(format!("row {}: bad score {:?}", i + 1, &record[score_col]))
        })?;
        let label = match &record[label_col] {
            "0" => 0,
            "1" => 1,
            other => return Err(Error::Data(format!("row {}: bad label {other:?}", i + 1))),
        };
        scores.push(score);
        labels.push(label);
    }
    Ok((scores, labels))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub auc: f64,
    pub scores: Vec<f64>,
}

/// Mean BCE and AUC over one split, with dropout disabled.
pub fn evaluate(model: &Model, dataset: &Dataset, split: SplitKind) -> Result<Evaluation> {
    if !dataset.is_prepared() {
        return Err(Error::Data("dataset must be split and standardized".into()));
    }
    let rows = dataset.indices(split)?;
    if rows.is_empty() {
        return Err(Error::Data(format!("{split} split is empty")));
    }
    // never sampled in eval mode
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut scores = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    let mut loss = 0.0;
    for &i in rows {
        let p = model
            .forward(dataset.row(i), Mode::Eval, &mut rng)?
            .probability;
        loss += nn::bce_loss(p, dataset.label(i))?.0;
        scores.push(p);
        labels.push(dataset.label(i));
    }
    let auc = metrics::auc(&scores, &labels)?.value;
    Ok(Evaluation {
        loss: loss / rows.len() as f64,
        auc,
        scores,
    })
}

/// One SGD update from the mean gradient of `batch`. Returns the mean
/// training-mode loss. Per-sample gradients are summed in batch order.
pub fn train_step<R: Rng + ?Sized>(
    model: &mut Model,
    batch: &[(&[f64], u8)],
    lr: f64,
    method: GradientMethod,
    rng: &mut R,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Training("empty batch".into()));
    }
    let mut total = Gradients::zeros_like(model);
    let mut loss = 0.0;
    for &(features, label) in batch {
        let cache = model.forward(features, Mode::Train, rng)?;
        let (l, d_prob) = nn::bce_loss(cache.probability, label)?;
        loss += l;
        total.add_assign(&model.backward(&cache, d_prob, method)?);
    }
    let scale = 1.0 / batch.len() as f64;
    total.scale(scale);
    model.apply_sgd(&total, lr)?;
    Ok(loss * scale)
}

/// Report plus the best-validation checkpoint.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub report: RunReport,
    pub best_model: Model,
}

/// Trains for the full epoch budget and keeps the model with the highest
/// validation AUC (earliest epoch on ties). The test split is scored once,
/// on that model.
pub fn train(config: &TrainConfig, dataset: &Dataset) -> Result<TrainOutcome> {
    config.validate()?;
    if !dataset.is_prepared() {
        return Err(Error::Data(
            "dataset must be split and standardized before training".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = Model::init(&config.model_spec(), &mut rng)?;
    let param_count = model.param_count();
    let mut order = dataset.indices(SplitKind::Train)?.to_vec();

    let mut epochs = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, f64, Model)> = None;
    for epoch in 1..=config.epochs {
        let epoch_start = Instant::now();
        order.shuffle(&mut rng);
        let mut step_total = 0.0;
        let mut steps = 0usize;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<(&[f64], u8)> = chunk
                .iter()
                .map(|&i| (dataset.row(i), dataset.label(i)))
                .collect();
            let step_start = Instant::now();
            let loss = train_step(
                &mut model,
                &batch,
                config.lr,
                config.gradient_method,
                &mut rng,
            )
            .map_err(|e| Error::Training(format!("epoch {epoch}, batch {b}: {e}")))?;
            step_total += step_start.elapsed().as_secs_f64();
            steps += 1;
            if !loss.is_finite() {
                return Err(Error::Training(format!(
                    "epoch {epoch}, batch {b}: loss is {loss}"
                )));
            }
        }
        let train_eval = evaluate(&model, dataset, SplitKind::Train)?;
        let val_eval = evaluate(&model, dataset, SplitKind::Validation)?;
        if !(train_eval.loss.is_finite() && val_eval.loss.is_finite()) {
            return Err(Error::Training(format!(
                "epoch {epoch}: non-finite evaluation loss"
            )));
        }
        epochs.push(EpochRecord {
            epoch,
            train_loss: train_eval.loss,
            val_loss: val_eval.loss,
            train_auc: train_eval.auc,
            val_auc: val_eval.auc,
            epoch_seconds: epoch_start.elapsed().as_secs_f64(),
            step_seconds: step_total / steps as f64,
        });
        log::debug!(
            "epoch {epoch}: train loss {:.4} auc {:.4}, val loss {:.4} auc {:.4}",
            train_eval.loss,
            train_eval.auc,
            val_eval.loss,
            val_eval.auc
        );
        if best.as_ref().is_none_or(|(_, auc, _)| val_eval.auc > *auc) {
            best = Some((epoch, val_eval.auc, model.clone()));
        }
    }

    let (best_epoch, best_val_auc, best_model) = best.expect("at least one epoch");
    let test_eval = evaluate(&best_model, dataset, SplitKind::Test)?;
    let test_scores = dataset
        .indices(SplitKind::Test)?
        .iter()
        .zip(&test_eval.scores)
        .map(|(&row, &score)| ScoredRow {
            row,
            score,
            label: dataset.label(row),
        })
        .collect();
    Ok(TrainOutcome {
        report: RunReport {
            config: config.clone(),
            seed: config.seed,
            param_count,
            epochs,
            best_epoch,
            best_val_auc,
            test_loss: test_eval.loss,
            test_auc: test_eval.auc,
            test_scores,
        },
        best_model,
    })
}

/// Seed of run `index` derived from a master seed (splitmix64).
pub fn derive_seed(master: u64, index: usize) -> u64 {
    let mut z = master.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatSummary {
    pub mean_test_auc: f64,
    /// Population standard deviation (zero for a single run).
    pub std_test_auc: f64,
    pub reports: Vec<RunReport>,
}

/// A repeated run that stopped early; completed reports are kept.
#[derive(Debug, thiserror::Error)]
#[error("run {run} of {n_runs} failed: {source}")]
pub struct RepeatFailure {
    pub run: usize,
    pub n_runs: usize,
    pub completed: Vec<RunReport>,
    #[source]
    pub source: Error,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// `n_runs` independent trainings with seeds derived from `config.seed`.
pub fn repeat_runs(
    config: &TrainConfig,
    dataset: &Dataset,
    n_runs: usize,
) -> std::result::Result<RepeatSummary, RepeatFailure> {
    let mut reports = Vec::with_capacity(n_runs);
    if n_runs == 0 {
        return Err(RepeatFailure {
            run: 0,
            n_runs,
            completed: reports,
            source: Error::Config("n_runs must be >= 1".into()),
        });
    }
    for run in 0..n_runs {
        let cfg = TrainConfig {
            seed: derive_seed(config.seed, run),
            ..config.clone()
        };
        match train(&cfg, dataset) {
            Ok(outcome) => reports.push(outcome.report),
            Err(source) => {
                return Err(RepeatFailure {
                    run,
                    n_runs,
                    completed: reports,
                    source,
                })
            }
        }
    }
    let aucs: Vec<f64> = reports.iter().map(|r| r.test_auc).collect();
    let (mean_test_auc, std_test_auc) = mean_std(&aucs);
    Ok(RepeatSummary {
        mean_test_auc,
        std_test_auc,
        reports,
    })
}
