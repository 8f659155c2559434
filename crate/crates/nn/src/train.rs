//! One optimisation step over a mini-batch: forward, loss, backward, update.

use shotseq_core::loss::{grad_logits, grad_offset, ktdce_loss};
use shotseq_core::{KtdMatrix, LossConfig, LossValue, OffsetMatrix, PredictionBatch};

use crate::error::NnError;
use crate::model::{SampleInput, VideoOrderModel};
use crate::optim::{Sgd, SgdConfig};
use crate::real::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample<T> {
    pub input: SampleInput<T>,
    /// Ordering class index.
    pub label: usize,
}

/// Model, offset matrix and optimizer state advanced together.
#[derive(Debug, Clone)]
pub struct Trainer<T> {
    pub model: VideoOrderModel<T>,
    pub offset: OffsetMatrix,
    pub optimizer: Sgd<T>,
    pub loss: LossConfig,
    matrix: KtdMatrix,
    step: u64,
}

impl<T: Real> Trainer<T> {
    pub fn new(
        model: VideoOrderModel<T>,
        loss: LossConfig,
        sgd: SgdConfig,
    ) -> Result<Self, NnError> {
        let k = model.config().k;
        let offset = OffsetMatrix::zeros(k);
        let optimizer = Sgd::new(sgd, model.params(), offset.entries().len());
        Self::from_parts(model, offset, optimizer, loss, 0)
    }

    pub fn from_parts(
        model: VideoOrderModel<T>,
        offset: OffsetMatrix,
        optimizer: Sgd<T>,
        loss: LossConfig,
        step: u64,
    ) -> Result<Self, NnError> {
        loss.validate()?;
        let k = model.config().k;
        if offset.k() != k {
            return Err(NnError::Shape(format!(
                "offset matrix is for k={}, model k={k}",
                offset.k()
            )));
        }
        let matrix = KtdMatrix::build(k).map_err(|e| NnError::Config(e.to_string()))?;
        Ok(Trainer {
            model,
            offset,
            optimizer,
            loss,
            matrix,
            step,
        })
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn matrix(&self) -> &KtdMatrix {
        &self.matrix
    }

    /// Per-sample logits as `f64` rows plus the matching batch.
    pub fn predict(&self, inputs: &[SampleInput<T>]) -> Result<Vec<Vec<f64>>, NnError> {
        inputs
            .iter()
            .map(|x| Ok(self.model.logits(x)?.into_iter().map(T::into_f64).collect()))
            .collect()
    }

    /// Computes gradients for `batch` into the parameter buffers and returns
    /// the batch loss and offset gradient, without updating anything.
    pub fn accumulate_gradients(
        &mut self,
        batch: &[TrainingExample<T>],
    ) -> Result<(LossValue, Vec<f64>), NnError> {
        if batch.is_empty() {
            return Err(NnError::Shape("empty batch".into()));
        }
        let k = self.model.config().k;
        let scale = T::from_f64(1.0 / batch.len() as f64);
        self.model.params_mut().zero_grads();
        let mut all_logits = Vec::with_capacity(batch.len() * self.matrix.size());
        for example in batch {
            let pass = self.model.forward(&example.input)?;
            let row: Vec<f64> = pass.logits().iter().map(|v| v.into_f64()).collect();
            let single = PredictionBatch::new(row.clone(), vec![example.label], k)
                .map_err(shotseq_core::LossError::from)?;
            // Per-row logit gradients only depend on that row, so each sample
            // is differentiated alone and rescaled to the batch mean.
            let g = grad_logits(&single, &self.matrix, &self.offset, &self.loss)?;
            let g: Vec<T> = g.into_iter().map(|v| T::from_f64(v) * scale).collect();
            self.model.backward(&pass, &g)?;
            all_logits.extend(row);
        }
        let labels = batch.iter().map(|e| e.label).collect();
        let full =
            PredictionBatch::new(all_logits, labels, k).map_err(shotseq_core::LossError::from)?;
        let value = ktdce_loss(&full, &self.matrix, &self.offset, &self.loss)?;
        let goff = grad_offset(&full, &self.matrix, &self.offset, &self.loss)?;
        Ok((value, goff))
    }

    /// One SGD update of the model and, when trainable, the offset matrix.
    pub fn train_step(
        &mut self,
        batch: &[TrainingExample<T>],
        lr: f64,
    ) -> Result<LossValue, NnError> {
        let step = self.step;
        let (value, goff) = match self.accumulate_gradients(batch) {
            Ok(v) => v,
            Err(NnError::NonFinite { .. }) => {
                return Err(NnError::Diverged {
                    step,
                    loss: f64::NAN,
                })
            }
            Err(e) => return Err(e),
        };
        if !value.total.is_finite() {
            return Err(NnError::Diverged {
                step,
                loss: value.total,
            });
        }
        self.optimizer.step(self.model.params_mut(), lr);
        if self.offset.trainable {
            self.optimizer
                .step_offset(self.offset.entries_mut(), &goff, lr);
        }
        self.step += 1;
        Ok(value)
    }
}
