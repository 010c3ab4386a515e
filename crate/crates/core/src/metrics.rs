//! ROC curves and AUC.
//!
//! AUC uses the Mann-Whitney rank statistic with midranks for ties, which is
//! the same quantity as the trapezoidal area under [`roc_curve`].

use std::cmp::Ordering;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// Descending; the first entry is `+inf` for the `(0, 0)` corner.
    pub thresholds: Vec<f64>,
    pub fpr: Vec<f64>,
    pub tpr: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AucScore {
    pub value: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

fn class_counts(scores: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension {
            what: "scores vs labels",
            expected: labels.len(),
            actual: scores.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::NonFinite(format!("score at index {i}")));
    }
    let mut n_pos = 0;
    for (i, &y) in labels.iter().enumerate() {
        match y {
            0 => {}
            1 => n_pos += 1,
            other => {
                return Err(Error::Data(format!(
                    "label at index {i} is {other}, expected 0 or 1"
                )))
            }
        }
    }
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 {
        return Err(Error::SingleClass("positive (label 1)"));
    }
    if n_neg == 0 {
        return Err(Error::SingleClass("negative (label 0)"));
    }
    Ok((n_pos, n_neg))
}

fn sorted_desc(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));
    order
}

/// ROC points at every distinct score, highest first. Tied scores share one point.
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<RocCurve> {
    let (n_pos, n_neg) = class_counts(scores, labels)?;
    let order = sorted_desc(scores);
    let mut curve = RocCurve {
        thresholds: vec![f64::INFINITY],
        fpr: vec![0.0],
        tpr: vec![0.0],
    };
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        curve.thresholds.push(threshold);
        curve.fpr.push(fp as f64 / n_neg as f64);
        curve.tpr.push(tp as f64 / n_pos as f64);
    }
    Ok(curve)
}

impl RocCurve {
    /// Trapezoidal area under the curve.
    pub fn area(&self) -> f64 {
        self.fpr
            .windows(2)
            .zip(self.tpr.windows(2))
            .map(|(f, t)| (f[1] - f[0]) * (t[0] + t[1]) / 2.0)
            .sum()
    }

    /// `threshold,fpr,tpr` rows with a header. The `+inf` threshold is written as `inf`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["threshold", "fpr", "tpr"])?;
        for ((t, f), p) in self.thresholds.iter().zip(&self.fpr).zip(&self.tpr) {
            writer.write_record([t.to_string(), f.to_string(), p.to_string()])?;
        }
        writer.flush().map_err(|e| Error::io("<roc csv>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file)
    }
}

/// Rank-based AUC with midrank tie correction.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<AucScore> {
    let (n_pos, n_neg) = class_counts(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));

    // Ranks are doubled (2 * midrank) so tied groups stay integral.
    let mut doubled_rank_sum: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j, midrank (i+1+j)/2
        let doubled_mid = (i + 1 + j) as u64;
        let positives = order[i..j].iter().filter(|&&k| labels[k] == 1).count() as u64;
        doubled_rank_sum += doubled_mid * positives;
        i = j;
    }
    let np = n_pos as u64;
    // U = R - n_pos (n_pos + 1) / 2, kept doubled.
    let doubled_u = doubled_rank_sum - np * (np + 1);
    let value = doubled_u as f64 / (2.0 * n_pos as f64 * n_neg as f64);
    Ok(AucScore {
        value,
        n_pos,
        n_neg,
    })
}
