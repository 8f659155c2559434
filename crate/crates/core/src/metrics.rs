//! Evaluation over batches of ordering logits.
//!
//! Every metric reads the argmax (or the top-k set) of each logit row. Ties
//! go to the lowest class index, which makes a row of equal logits predict
//! class 0. Recall and precision are macro averages over classes; classes
//! with no support are left out of the recall average, and classes that have
//! support but are never predicted count as precision 0.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::permutation::{factorial, KtdMatrix};
use crate::summation::pairwise_sum;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("batch is empty")]
    Empty,
    #[error("logits hold {len} values, expected {rows} rows of width {width}")]
    Shape { len: usize, rows: usize, width: usize },
    #[error("truth label {label} at row {row} is out of range for {classes} classes")]
    TruthRange {
        row: usize,
        label: usize,
        classes: usize,
    },
    #[error("top_k={top_k} must lie in 1..={classes}")]
    TopK { top_k: usize, classes: usize },
    #[error("distance matrix is for k={matrix_k}, batch is for k={batch_k}")]
    Dimension { matrix_k: usize, batch_k: usize },
    #[error("k must be at least 2, got {0}")]
    BadK(usize),
}

/// Row-major `N x k!` logits with one ground-truth label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionBatch {
    logits: Vec<f64>,
    truths: Vec<usize>,
    k: usize,
    classes: usize,
}

impl PredictionBatch {
    pub fn new(logits: Vec<f64>, truths: Vec<usize>, k: usize) -> Result<Self, MetricsError> {
        if !(2..=10).contains(&k) {
            return Err(MetricsError::BadK(k));
        }
        let classes = factorial(k);
        if truths.is_empty() {
            return Err(MetricsError::Empty);
        }
        if logits.len() != truths.len() * classes {
            return Err(MetricsError::Shape {
                len: logits.len(),
                rows: truths.len(),
                width: classes,
            });
        }
        if let Some((row, &label)) = truths.iter().enumerate().find(|(_, &t)| t >= classes) {
            return Err(MetricsError::TruthRange {
                row,
                label,
                classes,
            });
        }
        Ok(PredictionBatch {
            logits,
            truths,
            k,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.truths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truths.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_classes(&self) -> usize {
        self.classes
    }

    pub fn truths(&self) -> &[usize] {
        &self.truths
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.logits[i * self.classes..(i + 1) * self.classes]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.logits.chunks_exact(self.classes)
    }

    pub fn predictions(&self) -> Vec<usize> {
        self.rows().map(argmax).collect()
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// Whether `class` sits among the `top_k` largest entries of `row` under a
/// stable descending sort.
fn in_top_k(row: &[f64], class: usize, top_k: usize) -> bool {
    let t = row[class];
    let ahead = row
        .iter()
        .enumerate()
        .filter(|&(j, &v)| v > t || (v == t && j < class))
        .count();
    ahead < top_k
}

fn fraction(hits: usize, total: usize) -> f64 {
    hits as f64 / total as f64
}

pub fn top1_accuracy(batch: &PredictionBatch) -> f64 {
    let hits = batch
        .rows()
        .zip(&batch.truths)
        .filter(|(row, &t)| argmax(row) == t)
        .count();
    fraction(hits, batch.len())
}

pub fn topk_accuracy(batch: &PredictionBatch, top_k: usize) -> Result<f64, MetricsError> {
    if top_k == 0 || top_k > batch.classes {
        return Err(MetricsError::TopK {
            top_k,
            classes: batch.classes,
        });
    }
    let hits = batch
        .rows()
        .zip(&batch.truths)
        .filter(|(row, &t)| in_top_k(row, t, top_k))
        .count();
    Ok(fraction(hits, batch.len()))
}

/// Mean of `K[argmax, truth]` over rows.
pub fn mean_kendall_tau(batch: &PredictionBatch, matrix: &KtdMatrix) -> Result<f64, MetricsError> {
    if matrix.k() != batch.k {
        return Err(MetricsError::Dimension {
            matrix_k: matrix.k(),
            batch_k: batch.k,
        });
    }
    let per_row: Vec<f64> = batch
        .rows()
        .zip(&batch.truths)
        .map(|(row, &t)| matrix.get(argmax(row), t) as f64)
        .collect();
    Ok(pairwise_sum(&per_row) / batch.len() as f64)
}

struct Confusion {
    true_pos: Vec<usize>,
    support: Vec<usize>,
    predicted: Vec<usize>,
}

fn confusion(batch: &PredictionBatch) -> Confusion {
    let c = batch.classes;
    let mut out = Confusion {
        true_pos: vec![0; c],
        support: vec![0; c],
        predicted: vec![0; c],
    };
    for (row, &t) in batch.rows().zip(&batch.truths) {
        let p = argmax(row);
        out.support[t] += 1;
        out.predicted[p] += 1;
        if p == t {
            out.true_pos[t] += 1;
        }
    }
    out
}

pub fn macro_recall(batch: &PredictionBatch) -> f64 {
    let cm = confusion(batch);
    let per_class: Vec<f64> = (0..batch.classes)
        .filter(|&c| cm.support[c] > 0)
        .map(|c| fraction(cm.true_pos[c], cm.support[c]))
        .collect();
    pairwise_sum(&per_class) / per_class.len() as f64
}

pub fn macro_precision(batch: &PredictionBatch) -> f64 {
    let cm = confusion(batch);
    let per_class: Vec<f64> = (0..batch.classes)
        .filter(|&c| cm.support[c] > 0 || cm.predicted[c] > 0)
        .map(|c| {
            if cm.predicted[c] == 0 {
                0.0
            } else {
                fraction(cm.true_pos[c], cm.predicted[c])
            }
        })
        .collect();
    pairwise_sum(&per_class) / per_class.len() as f64
}

/// Flat report; the serialized key names are fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(rename = "top1_accuracy")]
    pub top1: f64,
    #[serde(rename = "topk_accuracy")]
    pub topk: f64,
    #[serde(rename = "kendall_tau_distance")]
    pub mean_ktd: f64,
    pub recall: f64,
    pub precision: f64,
    #[serde(rename = "top_k")]
    pub k_used_for_topk: usize,
}

impl MetricsReport {
    /// Key names in serialized order.
    pub const KEYS: [&'static str; 6] = [
        "top1_accuracy",
        "topk_accuracy",
        "kendall_tau_distance",
        "recall",
        "precision",
        "top_k",
    ];
}

pub fn compute_report(
    batch: &PredictionBatch,
    matrix: &KtdMatrix,
    top_k: usize,
) -> Result<MetricsReport, MetricsError> {
    Ok(MetricsReport {
        top1: top1_accuracy(batch),
        topk: topk_accuracy(batch, top_k)?,
        mean_ktd: mean_kendall_tau(batch, matrix)?,
        recall: macro_recall(batch),
        precision: macro_precision(batch),
        k_used_for_topk: top_k,
    })
}
