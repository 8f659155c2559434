//! Cross-entropy with a Kendall-tau distance term and a trainable offset
//! matrix.
//!
//! ```text
//! total = CE + alpha * mean_i (K + O)[pred_i, y_i] + beta * sum |O|
//! ```
//!
//! In [`KtdMode::Faithful`] `pred_i` is the argmax of row `i`. That lookup is
//! piecewise constant in the logits, so the logits gradient is exactly the
//! cross-entropy gradient and only `O` receives a gradient from the distance
//! term. [`KtdMode::Soft`] replaces the lookup by its expectation under the
//! softmax, `sum_j p_ij (K + O)[j, y_i]`, which does reach the logits.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{argmax, MetricsError, PredictionBatch};
use crate::permutation::{factorial, KtdMatrix};
use crate::summation::pairwise_sum;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("non-finite logit in row {row}")]
    NonFinite { row: usize },
    #[error("offset matrix has non-finite entry at ({row}, {col})")]
    NonFiniteOffset { row: usize, col: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid loss config: {0}")]
    Config(String),
    #[error(transparent)]
    Batch(#[from] MetricsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KtdMode {
    /// Argmax-indexed lookup.
    #[default]
    Faithful,
    /// Softmax-expected distance.
    Soft,
}

/// Which axis of `K + O` the prediction indexes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexOrder {
    /// `(K + O)[pred, truth]`
    #[default]
    PredictedFirst,
    /// `(K + O)[truth, pred]`
    TruthFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub alpha: f64,
    pub beta: f64,
    pub mode: KtdMode,
    pub index_order: IndexOrder,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            alpha: 1.0,
            beta: 0.1,
            mode: KtdMode::Faithful,
            index_order: IndexOrder::PredictedFirst,
        }
    }
}

impl LossConfig {
    /// Plain cross-entropy: both extra terms switched off.
    pub fn cross_entropy_only() -> Self {
        LossConfig {
            alpha: 0.0,
            beta: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), LossError> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !v.is_finite() || v < 0.0 {
                return Err(LossError::Config(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    fn cell(&self, predicted: usize, truth: usize) -> (usize, usize) {
        match self.index_order {
            IndexOrder::PredictedFirst => (predicted, truth),
            IndexOrder::TruthFirst => (truth, predicted),
        }
    }
}

/// Additive correction to the distance matrix, same `k! x k!` shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetMatrix {
    k: usize,
    n: usize,
    entries: Vec<f64>,
    pub trainable: bool,
}

impl OffsetMatrix {
    pub fn zeros(k: usize) -> Self {
        let n = factorial(k);
        OffsetMatrix {
            k,
            n,
            entries: vec![0.0; n * n],
            trainable: true,
        }
    }

    pub fn from_entries(k: usize, entries: Vec<f64>) -> Result<Self, LossError> {
        let n = factorial(k);
        if entries.len() != n * n {
            return Err(LossError::Dimension(format!(
                "offset matrix for k={k} needs {} entries, got {}",
                n * n,
                entries.len()
            )));
        }
        if let Some(i) = entries.iter().position(|v| !v.is_finite()) {
            return Err(LossError::NonFiniteOffset {
                row: i / n,
                col: i % n,
            });
        }
        Ok(OffsetMatrix {
            k,
            n,
            entries,
            trainable: true,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.n + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.entries[row * self.n + col] = value;
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [f64] {
        &mut self.entries
    }

    pub fn l1_norm(&self) -> f64 {
        l1_reg(self)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (0..self.n).map(|i| i.to_string()).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for r in 0..self.n {
            let row: Vec<String> = self.entries[r * self.n..(r + 1) * self.n]
                .iter()
                .map(|v| format!("{v:e}"))
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossValue {
    pub total: f64,
    pub ce_part: f64,
    pub ktd_part: f64,
    pub l1_part: f64,
}

fn check_finite(batch: &PredictionBatch) -> Result<(), LossError> {
    for (row, logits) in batch.rows().enumerate() {
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(LossError::NonFinite { row });
        }
    }
    Ok(())
}

fn check_shapes(
    batch: &PredictionBatch,
    matrix: &KtdMatrix,
    offset: &OffsetMatrix,
) -> Result<(), LossError> {
    if matrix.k() != batch.k() || offset.k() != batch.k() {
        return Err(LossError::Dimension(format!(
            "batch k={}, distance matrix k={}, offset k={}",
            batch.k(),
            matrix.k(),
            offset.k()
        )));
    }
    Ok(())
}

/// Numerically stable softmax of one row.
pub fn softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}

/// Mean negative log-likelihood of the true class.
pub fn cross_entropy(batch: &PredictionBatch) -> Result<f64, LossError> {
    check_finite(batch)?;
    let per_row: Vec<f64> = batch
        .rows()
        .zip(batch.truths())
        .map(|(row, &t)| log_sum_exp(row) - row[t])
        .collect();
    Ok(pairwise_sum(&per_row) / batch.len() as f64)
}

/// `(softmax - onehot) / N`, row-major.
pub fn cross_entropy_grad(batch: &PredictionBatch) -> Result<Vec<f64>, LossError> {
    check_finite(batch)?;
    let inv_n = 1.0 / batch.len() as f64;
    let mut grad = Vec::with_capacity(batch.logits().len());
    for (row, &t) in batch.rows().zip(batch.truths()) {
        let mut p = softmax(row);
        p[t] -= 1.0;
        grad.extend(p.into_iter().map(|g| g * inv_n));
    }
    Ok(grad)
}

fn combined(matrix: &KtdMatrix, offset: &OffsetMatrix, row: usize, col: usize) -> f64 {
    matrix.get(row, col) as f64 + offset.get(row, col)
}

/// Mean distance term, before the `alpha` weight.
pub fn ktd_term(
    batch: &PredictionBatch,
    matrix: &KtdMatrix,
    offset: &OffsetMatrix,
    config: &LossConfig,
) -> Result<f64, LossError> {
    check_shapes(batch, matrix, offset)?;
    check_finite(batch)?;
    let per_row: Vec<f64> = match config.mode {
        KtdMode::Faithful => batch
            .rows()
            .zip(batch.truths())
            .map(|(row, &t)| {
                let (r, c) = config.cell(argmax(row), t);
                combined(matrix, offset, r, c)
            })
            .collect(),
        KtdMode::Soft => batch
            .rows()
            .zip(batch.truths())
            .map(|(row, &t)| expected_distance(&softmax(row), t, matrix, offset, config))
            .collect(),
    };
    Ok(pairwise_sum(&per_row) / batch.len() as f64)
}

fn expected_distance(
    probs: &[f64],
    truth: usize,
    matrix: &KtdMatrix,
    offset: &OffsetMatrix,
    config: &LossConfig,
) -> f64 {
    probs
        .iter()
        .enumerate()
        .map(|(j, &p)| {
            let (r, c) = config.cell(j, truth);
            p * combined(matrix, offset, r, c)
        })
        .sum()
}

/// Sum of absolute offsets.
pub fn l1_reg(offset: &OffsetMatrix) -> f64 {
    let abs: Vec<f64> = offset.entries().iter().map(|v| v.abs()).collect();
    pairwise_sum(&abs)
}

pub fn ktdce_loss(
    batch: &PredictionBatch,
    matrix: &KtdMatrix,
    offset: &OffsetMatrix,
    config: &LossConfig,
) -> Result<LossValue, LossError> {
    config.validate()?;
    let ce_part = cross_entropy(batch)?;
    let ktd_part = ktd_term(batch, matrix, offset, config)?;
    let l1_part = l1_reg(offset);
    Ok(LossValue {
        total: ce_part + config.alpha * ktd_part + config.beta * l1_part,
        ce_part,
        ktd_part,
        l1_part,
    })
}

/// Gradient of the total loss with respect to the logits.
///
/// Faithful mode returns the cross-entropy gradient itself.
pub fn grad_logits(
    batch: &PredictionBatch,
    matrix: &KtdMatrix,
    offset: &OffsetMatrix,
    config: &LossConfig,
) -> Result<Vec<f64>, LossError> {
    config.validate()?;
    check_shapes(batch, matrix, offset)?;
    let mut grad = cross_entropy_grad(batch)?;
    if config.mode == KtdMode::Faithful || config.alpha == 0.0 {
        return Ok(grad);
    }
    let classes = batch.num_classes();
    let scale = config.alpha / batch.len() as f64;
    for (i, (row, &t)) in batch.rows().zip(batch.truths()).enumerate() {
        let p = softmax(row);
        let expected = expected_distance(&p, t, matrix, offset, config);
        let g = &mut grad[i * classes..(i + 1) * classes];
        for j in 0..classes {
            let (r, c) = config.cell(j, t);
            g[j] += scale * p[j] * (combined(matrix, offset, r, c) - expected);
        }
    }
    Ok(grad)
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Gradient of the total loss with respect to `O`, row-major `k! x k!`.
pub fn grad_offset(
    batch: &PredictionBatch,
    matrix: &KtdMatrix,
    offset: &OffsetMatrix,
    config: &LossConfig,
) -> Result<Vec<f64>, LossError> {
    config.validate()?;
    check_shapes(batch, matrix, offset)?;
    check_finite(batch)?;
    let n = offset.size();
    let mut grad: Vec<f64> = offset
        .entries()
        .iter()
        .map(|&o| config.beta * sign(o))
        .collect();
    if config.alpha == 0.0 {
        return Ok(grad);
    }
    let scale = config.alpha / batch.len() as f64;
    for (row, &t) in batch.rows().zip(batch.truths()) {
        match config.mode {
            KtdMode::Faithful => {
                let (r, c) = config.cell(argmax(row), t);
                grad[r * n + c] += scale;
            }
            KtdMode::Soft => {
                for (j, p) in softmax(row).into_iter().enumerate() {
                    let (r, c) = config.cell(j, t);
                    grad[r * n + c] += scale * p;
                }
            }
        }
    }
    Ok(grad)
}

/// Loss value together with both gradients.
#[derive(Debug, Clone)]
pub struct LossEvaluation {
    pub value: LossValue,
    pub grad_logits: Vec<f64>,
    pub grad_offset: Vec<f64>,
}

pub fn evaluate(
    batch: &PredictionBatch,
    matrix: &KtdMatrix,
    offset: &OffsetMatrix,
    config: &LossConfig,
) -> Result<LossEvaluation, LossError> {
    Ok(LossEvaluation {
        value: ktdce_loss(batch, matrix, offset, config)?,
        grad_logits: grad_logits(batch, matrix, offset, config)?,
        grad_offset: grad_offset(batch, matrix, offset, config)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k3() -> KtdMatrix {
        KtdMatrix::build(3).unwrap()
    }

    fn batch(logits: Vec<f64>, truths: Vec<usize>) -> PredictionBatch {
        PredictionBatch::new(logits, truths, 3).unwrap()
    }

    fn peaked(class: usize, height: f64) -> Vec<f64> {
        let mut v = vec![0.0; 6];
        v[class] = height;
        v
    }

    #[test]
    fn cross_entropy_examples() {
        let b = batch(peaked(2, 60.0), vec![2]);
        assert!(cross_entropy(&b).unwrap() < 1e-20);
        let b = batch(vec![0.3; 12], vec![1, 4]);
        assert!((cross_entropy(&b).unwrap() - 6f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn cross_entropy_two_rows_by_hand() {
        let logits = vec![1.0, 2.0, 0.5, -1.0, 0.0, 3.0, 0.2, 0.2, 0.2, 0.2, 0.2, 1.2];
        let b = batch(logits.clone(), vec![1, 5]);
        // Direct softmax arithmetic, no shifting.
        let nll = |row: &[f64], t: usize| {
            let z: f64 = row.iter().map(|v| v.exp()).sum();
            -(row[t].exp() / z).ln()
        };
        let expected = 0.5 * (nll(&logits[..6], 1) + nll(&logits[6..], 5));
        assert!((cross_entropy(&b).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn non_finite_rejected() {
        let mut l = vec![0.0; 6];
        l[3] = f64::NAN;
        assert_eq!(
            cross_entropy(&batch(l, vec![0])),
            Err(LossError::NonFinite { row: 0 })
        );
    }

    #[test]
    fn ktd_term_examples() {
        let m = k3();
        let o = OffsetMatrix::zeros(3);
        let faithful = LossConfig::default();
        let soft = LossConfig {
            mode: KtdMode::Soft,
            ..Default::default()
        };
        let b = batch(peaked(4, 5.0), vec![4]);
        assert_eq!(ktd_term(&b, &m, &o, &faithful).unwrap(), 0.0);
        let b = batch(peaked(5, 5.0), vec![0]);
        assert_eq!(ktd_term(&b, &m, &o, &faithful).unwrap(), 3.0);
        for t in 0..6 {
            let b = batch(vec![0.7; 6], vec![t]);
            assert!((ktd_term(&b, &m, &o, &soft).unwrap() - 1.5).abs() < 1e-15);
        }
    }

    #[test]
    fn index_order_only_matters_through_offset() {
        let m = k3();
        let mut o = OffsetMatrix::zeros(3);
        o.set(5, 0, 0.25);
        let b = batch(peaked(5, 5.0), vec![0]);
        let pf = LossConfig::default();
        let tf = LossConfig {
            index_order: IndexOrder::TruthFirst,
            ..Default::default()
        };
        assert_eq!(ktd_term(&b, &m, &o, &pf).unwrap(), 3.25);
        assert_eq!(ktd_term(&b, &m, &o, &tf).unwrap(), 3.0);
    }

    #[test]
    fn l1_examples() {
        let mut o = OffsetMatrix::zeros(3);
        assert_eq!(l1_reg(&o), 0.0);
        o.set(1, 2, 0.5);
        o.set(4, 0, -0.5);
        assert_eq!(l1_reg(&o), 1.0);
    }

    #[test]
    fn degenerate_configs() {
        let m = k3();
        let o = OffsetMatrix::zeros(3);
        let b = batch(vec![0.1, 0.9, -0.3, 0.0, 0.4, 0.2], vec![3]);
        let v = ktdce_loss(&b, &m, &o, &LossConfig::cross_entropy_only()).unwrap();
        assert_eq!(v.total, cross_entropy(&b).unwrap());
        let b = batch(peaked(3, 4.0), vec![3]);
        let v = ktdce_loss(&b, &m, &o, &LossConfig::default()).unwrap();
        assert_eq!(v.total, v.ce_part);
    }

    #[test]
    fn config_validation() {
        let bad = LossConfig {
            alpha: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = LossConfig {
            beta: f64::INFINITY,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn offset_gradient_examples() {
        let m = k3();
        let mut o = OffsetMatrix::zeros(3);
        let cfg = LossConfig::default();
        let b = batch(peaked(5, 5.0), vec![0]);
        let g = grad_offset(&b, &m, &o, &cfg).unwrap();
        for (i, &v) in g.iter().enumerate() {
            assert_eq!(v, if i == 5 * 6 { 1.0 } else { 0.0 });
        }
        o.set(2, 2, 0.3);
        let g = grad_offset(&b, &m, &o, &cfg).unwrap();
        assert_eq!(g[2 * 6 + 2], 0.1);
    }

    #[test]
    fn dimension_mismatch() {
        let m = KtdMatrix::build(4).unwrap();
        let o = OffsetMatrix::zeros(3);
        let b = batch(vec![0.0; 6], vec![0]);
        assert!(matches!(
            ktd_term(&b, &m, &o, &LossConfig::default()),
            Err(LossError::Dimension(_))
        ));
        assert!(OffsetMatrix::from_entries(3, vec![0.0; 35]).is_err());
    }
}
