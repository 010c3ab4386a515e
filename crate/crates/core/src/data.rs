//! Datasets: CSV input/output, a synthetic imbalanced generator, stratified
//! splitting and train-only standardization.
//!
//! CSV layout: a header row, [`N_FEATURES`] numeric feature columns and one
//! `label` column holding 0 or 1. Lines starting with `#` are comments.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::model::N_FEATURES;
use crate::{Error, Result};

pub const LABEL_COLUMN: &str = "label";

/// Lower bound on a fitted standard deviation.
pub const STD_FLOOR: f64 = 1e-8;

pub const DEFAULT_VAL_FRAC: f64 = 0.10;
pub const DEFAULT_TEST_FRAC: f64 = 0.15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitKind {
    Train,
    Validation,
    Test,
}

impl std::fmt::Display for SplitKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SplitKind::Train => "train",
            SplitKind::Validation => "validation",
            SplitKind::Test => "test",
        })
    }
}

/// Row indices of each split, each sorted ascending.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn indices(&self, kind: SplitKind) -> &[usize] {
        match kind {
            SplitKind::Train => &self.train,
            SplitKind::Validation => &self.validation,
            SplitKind::Test => &self.test,
        }
    }
}

/// Per-feature mean and standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Population statistics over `rows`; deviations below [`STD_FLOOR`] are floored.
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>, width: usize) -> Result<Self> {
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        if rows.is_empty() {
            return Err(Error::Data(
                "cannot fit standardization on zero rows".into(),
            ));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; width];
        for row in &rows {
            for (m, x) in mean.iter_mut().zip(row.iter()) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; width];
        for row in &rows {
            for ((v, x), m) in var.iter_mut().zip(row.iter()).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var
            .iter()
            .enumerate()
            .map(|(j, v)| {
                let s = (v / n).sqrt();
                if s < STD_FLOOR {
                    log::warn!(
                        "feature {j} is constant on the training rows; std floored at {STD_FLOOR}"
                    );
                    STD_FLOOR
                } else {
                    s
                }
            })
            .collect();
        Ok(Standardizer { mean, std })
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    feature_names: Vec<String>,
    features: Vec<Vec<f64>>,
    labels: Vec<u8>,
    split: Option<Split>,
    standardizer: Option<Standardizer>,
    #[serde(skip)]
    standardized: Vec<Vec<f64>>,
}

fn default_feature_names() -> Vec<String> {
    (1..=N_FEATURES).map(|i| format!("f{i:02}")).collect()
}

impl Dataset {
    pub fn from_rows(features: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::Dimension {
                what: "label count",
                expected: features.len(),
                actual: labels.len(),
            });
        }
        for (i, row) in features.iter().enumerate() {
            if row.len() != N_FEATURES {
                return Err(Error::Data(format!(
                    "row {}: expected {N_FEATURES} features, found {}",
                    i + 1,
                    row.len()
                )));
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::Data(format!(
                    "row {}: non-finite feature value",
                    i + 1
                )));
            }
        }
        if let Some(i) = labels.iter().position(|&y| y > 1) {
            return Err(Error::Data(format!(
                "row {}: label must be 0 or 1, got {}",
                i + 1,
                labels[i]
            )));
        }
        Ok(Dataset {
            feature_names: default_feature_names(),
            features,
            labels,
            split: None,
            standardizer: None,
            standardized: Vec::new(),
        })
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file).map_err(|e| match e {
            Error::Data(msg) => Error::Data(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(input);
        let headers = reader.headers()?.clone();
        if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
            return Err(Error::Data("empty file: no header row".into()));
        }
        let label_col = headers
            .iter()
            .position(|h| h == LABEL_COLUMN)
            .ok_or_else(|| Error::Data(format!("missing \"{LABEL_COLUMN}\" column")))?;
        let feature_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != label_col).collect();
        if feature_cols.len() != N_FEATURES {
            return Err(Error::Data(format!(
                "expected {N_FEATURES} features, found {}",
                feature_cols.len()
            )));
        }

        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let row_no = i + 1;
            if record.len() != headers.len() {
                return Err(Error::Data(format!(
                    "row {row_no}: expected {} columns, found {}",
                    headers.len(),
                    record.len()
                )));
            }
            let mut row = Vec::with_capacity(N_FEATURES);
            for &c in &feature_cols {
                let value: f64 = record[c].parse().map_err(|_| {
                    Error::Data(format!(
                        "row {row_no}: non-numeric value {:?} in column {:?}",
                        &record[c], &headers[c]
                    ))
                })?;
                if !value.is_finite() {
                    return Err(Error::Data(format!(
                        "row {row_no}: non-finite value in column {:?}",
                        &headers[c]
                    )));
                }
                row.push(value);
            }
            let label = match record[label_col].parse::<f64>() {
                Ok(0.0) => 0,
                Ok(1.0) => 1,
                _ => {
                    return Err(Error::Data(format!(
                        "row {row_no}: label must be 0 or 1, got {:?}",
                        &record[label_col]
                    )))
                }
            };
            features.push(row);
            labels.push(label);
        }
        if features.is_empty() {
            return Err(Error::Data("file has a header but no data rows".into()));
        }
        let mut dataset = Dataset::from_rows(features, labels)?;
        dataset.feature_names = feature_cols
            .iter()
            .map(|&c| headers[c].to_string())
            .collect();
        Ok(dataset)
    }

    /// Writes the raw (unstandardized) rows. Each `comments` entry becomes a `# ` line.
    pub fn write_csv<W: Write>(&self, mut out: W, comments: &[String]) -> Result<()> {
        for line in comments {
            writeln!(out, "# {line}").map_err(|e| Error::io("<dataset csv>", e))?;
        }
        let mut writer = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(LABEL_COLUMN);
        writer.write_record(&header)?;
        for (row, label) in self.features.iter().zip(&self.labels) {
            let mut record: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            record.push(label.to_string());
            writer.write_record(&record)?;
        }
        writer.flush().map_err(|e| Error::io("<dataset csv>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, comments: &[String]) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file), comments)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn raw_row(&self, i: usize) -> &[f64] {
        &self.features[i]
    }

    pub fn raw_row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.features[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn n_pos(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    pub fn split_indices(&self) -> Option<&Split> {
        self.split.as_ref()
    }

    pub fn indices(&self, kind: SplitKind) -> Result<&[usize]> {
        self.split
            .as_ref()
            .map(|s| s.indices(kind))
            .ok_or_else(|| Error::Data("dataset has not been split".into()))
    }

    pub fn standardizer(&self) -> Option<&Standardizer> {
        self.standardizer.as_ref()
    }

    /// Standardized row `i`. Panics if [`Dataset::fit_standardize`] has not run.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.standardized[i]
    }

    pub fn is_prepared(&self) -> bool {
        self.split.is_some() && self.standardized.len() == self.labels.len()
    }

    /// Stratified random split. Split sizes are `round(n * frac)`; each class
    /// is apportioned across splits by largest remainder so every split's
    /// class counts are within one row of the global proportion.
    pub fn split(mut self, val_frac: f64, test_frac: f64, seed: u64) -> Result<Self> {
        for (name, f) in [("validation", val_frac), ("test", test_frac)] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Config(format!(
                    "{name} fraction must be in (0, 1), got {f}"
                )));
            }
        }
        if val_frac + test_frac >= 1.0 {
            return Err(Error::Config(format!(
                "validation + test fractions must be < 1, got {}",
                val_frac + test_frac
            )));
        }
        let n = self.len();
        let n_val = (n as f64 * val_frac).round() as usize;
        let n_test = (n as f64 * test_frac).round() as usize;
        if n_val + n_test >= n {
            return Err(Error::Data(format!("{n} rows leave no training rows")));
        }
        let sizes = [n_val, n_test, n - n_val - n_test];

        let n_pos = self.n_pos();
        let pos_counts = apportion(n_pos, &sizes, n);

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut buckets: [Vec<usize>; 3] = Default::default();
        for class in [0u8, 1] {
            let mut idx: Vec<usize> = (0..n).filter(|&i| self.labels[i] == class).collect();
            idx.shuffle(&mut rng);
            let mut offset = 0;
            for (s, bucket) in buckets.iter_mut().enumerate() {
                let take = if class == 1 {
                    pos_counts[s]
                } else {
                    sizes[s] - pos_counts[s]
                };
                bucket.extend_from_slice(&idx[offset..offset + take]);
                offset += take;
            }
        }
        let [mut validation, mut test, mut train] = buckets;
        for (kind, bucket) in [
            (SplitKind::Train, &mut train),
            (SplitKind::Validation, &mut validation),
            (SplitKind::Test, &mut test),
        ] {
            bucket.sort_unstable();
            let pos = bucket.iter().filter(|&&i| self.labels[i] == 1).count();
            if pos == 0 || pos == bucket.len() {
                let missing = if pos == 0 { "positive" } else { "negative" };
                return Err(Error::Data(format!(
                    "{kind} split of {} rows has no {missing} examples",
                    bucket.len()
                )));
            }
        }
        self.split = Some(Split {
            train,
            validation,
            test,
        });
        self.standardizer = None;
        self.standardized.clear();
        Ok(self)
    }

    /// Fits mean/std on the training rows and standardizes every row with them.
    pub fn fit_standardize(&mut self) -> Result<()> {
        let split = self
            .split
            .as_ref()
            .ok_or_else(|| Error::Data("split the dataset before standardizing".into()))?;
        let scaler = Standardizer::fit(
            split.train.iter().map(|&i| self.features[i].as_slice()),
            N_FEATURES,
        )?;
        self.standardized = self.features.iter().map(|r| scaler.apply(r)).collect();
        self.standardizer = Some(scaler);
        Ok(())
    }

    /// Split with the default fractions and standardize.
    pub fn prepare(self, seed: u64) -> Result<Self> {
        let mut ds = self.split(DEFAULT_VAL_FRAC, DEFAULT_TEST_FRAC, seed)?;
        ds.fit_standardize()?;
        Ok(ds)
    }
}

/// Largest-remainder allocation of `count` items over splits of `sizes` (summing to `n`).
fn apportion(count: usize, sizes: &[usize; 3], n: usize) -> [usize; 3] {
    let exact: Vec<f64> = sizes
        .iter()
        .map(|&s| count as f64 * s as f64 / n as f64)
        .collect();
    let mut out = [0usize; 3];
    for (o, e) in out.iter_mut().zip(&exact) {
        *o = e.floor() as usize;
    }
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut left = count - out.iter().sum::<usize>();
    for &s in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if out[s] < sizes[s] {
            out[s] += 1;
            left -= 1;
        }
    }
    out
}

/// Parameters of the synthetic generator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n_pos: usize,
    pub n_neg: usize,
    pub signal_strength: f64,
    pub seed: u64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            n_pos: 246,
            n_neg: 2000,
            signal_strength: 1.0,
            seed: 0,
        }
    }
}

/// A generated dataset together with its latent scoring direction.
#[derive(Clone, Debug)]
pub struct Synthetic {
    pub dataset: Dataset,
    /// Unit-norm `w`; `w . x` is the Bayes-optimal linear score.
    pub direction: Vec<f64>,
}

/// Standard-normal features; the `n_pos` rows with the highest
/// `signal_strength * (w . x) + noise` (unit-variance noise) are labelled 1.
pub fn generate(spec: &GeneratorSpec) -> Result<Synthetic> {
    if spec.n_pos == 0 || spec.n_neg == 0 {
        return Err(Error::Config(format!(
            "generator needs at least one row per class, got n_pos={} n_neg={}",
            spec.n_pos, spec.n_neg
        )));
    }
    if !(spec.signal_strength >= 0.0 && spec.signal_strength.is_finite()) {
        return Err(Error::Config(format!(
            "signal strength must be finite and >= 0, got {}",
            spec.signal_strength
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut direction: Vec<f64> = (0..N_FEATURES)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    let norm = direction.iter().map(|w| w * w).sum::<f64>().sqrt();
    direction.iter_mut().for_each(|w| *w /= norm);

    let n = spec.n_pos + spec.n_neg;
    let mut features = Vec::with_capacity(n);
    let mut logits = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..N_FEATURES)
            .map(|_| rng.sample(StandardNormal))
            .collect();
        let score: f64 = row.iter().zip(&direction).map(|(x, w)| x * w).sum();
        let noise: f64 = rng.sample(StandardNormal);
        logits.push(spec.signal_strength * score + noise);
        features.push(row);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| logits[b].total_cmp(&logits[a]).then(a.cmp(&b)));
    let mut labels = vec![0u8; n];
    for &i in &order[..spec.n_pos] {
        labels[i] = 1;
    }
    Ok(Synthetic {
        dataset: Dataset::from_rows(features, labels)?,
        direction,
    })
}
