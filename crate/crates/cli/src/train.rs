//! The training loop: per-epoch shuffling, augmentation, SGD with the step
//! schedule, validation, JSONL logging and checkpoints.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use shotseq_core::metrics::compute_report;
use shotseq_core::{LossValue, MetricsReport, PredictionBatch};
use shotseq_data::seed::derive_seed;
use shotseq_data::{shuffle_augment, SampleMode, SequenceSample, Split};
use shotseq_nn::{lr_schedule, Checkpoint, NnError, RngState, Trainer, VideoOrderModel};

use crate::config::RunConfig;
use crate::dataset::{InputBuilder, LoadedDataset};
use crate::error::{io_err, CliError, Result};

pub const LOG_FILE: &str = "train_log.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub kind: String,
    pub seed: u64,
    pub train_samples: usize,
    pub val_samples: usize,
    pub parameters: usize,
    pub config: RunConfig,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub ce: f64,
    pub ktd: f64,
    pub l1: f64,
}

impl LossParts {
    fn add(&mut self, v: &LossValue, weight: f64) {
        self.total += v.total * weight;
        self.ce += v.ce_part * weight;
        self.ktd += v.ktd_part * weight;
        self.l1 += v.l1_part * weight;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub steps: u64,
    /// Sample-weighted mean over the epoch's batches.
    pub loss: LossParts,
    pub offset_l1: f64,
    pub val: Option<MetricsReport>,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub trainer: Trainer<f32>,
    pub epochs: Vec<EpochLog>,
    pub checkpoint: PathBuf,
    pub log: PathBuf,
}

fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    derive_seed(seed, "train-epoch", epoch as u64)
}

pub fn new_trainer(config: &RunConfig) -> Result<Trainer<f32>> {
    config.validate()?;
    let model = VideoOrderModel::<f32>::new(config.model_config())?;
    let mut trainer = Trainer::new(model, config.loss, config.sgd)?;
    trainer.offset.trainable = config.offset_trainable;
    Ok(trainer)
}

fn save(trainer: &Trainer<f32>, epoch: usize, seed: u64, path: &Path) -> Result<()> {
    let ckpt = Checkpoint {
        trainer: trainer.clone(),
        epoch: epoch as u64,
        rng: RngState {
            seed: epoch_seed(seed, epoch),
            stream: 0,
            word_pos: 0,
        },
    };
    ckpt.save(path)?;
    Ok(())
}

/// Top-k report of `trainer` on `samples` with deterministic test-mode
/// frame sampling.
pub fn evaluate(
    trainer: &Trainer<f32>,
    inputs: &mut InputBuilder,
    samples: &[SequenceSample],
    top_k: usize,
) -> Result<MetricsReport> {
    if samples.is_empty() {
        return Err(CliError::Usage("nothing to evaluate".into()));
    }
    let config = trainer.model.config().clone();
    inputs.check(&config)?;
    // Test-mode sampling draws nothing from this generator.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut logits = Vec::with_capacity(samples.len() * trainer.matrix().size());
    let mut truths = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(64) {
        let examples = chunk
            .iter()
            .map(|s| inputs.example(s, &config, SampleMode::Test, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let inputs: Vec<_> = examples.iter().map(|e| e.input.clone()).collect();
        for (row, e) in trainer.predict(&inputs)?.into_iter().zip(&examples) {
            logits.extend(row);
            truths.push(e.label);
        }
    }
    let batch = PredictionBatch::new(logits, truths, config.k)?;
    Ok(compute_report(&batch, trainer.matrix(), top_k)?)
}

/// Trains from scratch, writing `train_log.jsonl` and `checkpoint.bin` into
/// `out_dir`. The checkpoint is replaced after every completed epoch, so a
/// divergence leaves the last good one in place. `on_epoch` sees the
/// trainer after each epoch.
pub fn train(
    config: &RunConfig,
    data: &mut LoadedDataset,
    out_dir: &Path,
    mut on_epoch: impl FnMut(&EpochLog, &Trainer<f32>),
) -> Result<TrainOutcome> {
    let mut trainer = new_trainer(config)?;
    let model_config = trainer.model.config().clone();
    data.inputs.check(&model_config)?;
    let train_set = data.split(Split::Train);
    let val_set = data.split(Split::Val);
    if train_set.is_empty() && config.epochs > 0 {
        return Err(CliError::Format("manifest has no training samples".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let log_path = out_dir.join(LOG_FILE);
    let ckpt_path = out_dir.join(CHECKPOINT_FILE);
    let mut log = BufWriter::new(File::create(&log_path).map_err(|e| io_err(&log_path, e))?);
    let header = LogHeader {
        kind: "header".into(),
        seed: config.seed,
        train_samples: train_set.len(),
        val_samples: val_set.len(),
        parameters: trainer.model.num_parameters(),
        config: config.clone(),
    };
    let write_line = |log: &mut BufWriter<File>, line: String| -> Result<()> {
        writeln!(log, "{line}")
            .and_then(|_| log.flush())
            .map_err(|e| io_err(&log_path, e))
    };
    write_line(&mut log, serde_json::to_string(&header).expect("header serializes"))?;
    save(&trainer, 0, config.seed, &ckpt_path)?;

    let mut epochs = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 0..config.epochs {
        let lr = lr_schedule(epoch, config.sgd.lr, config.epochs);
        let mut rng = ChaCha8Rng::seed_from_u64(epoch_seed(config.seed, epoch));
        order.shuffle(&mut rng);
        let mut parts = LossParts::default();
        for batch_idx in order.chunks(config.batch_size) {
            let mut batch = Vec::with_capacity(batch_idx.len());
            for &i in batch_idx {
                let sample = if config.augment {
                    shuffle_augment(&train_set[i], &mut rng)?
                } else {
                    train_set[i].clone()
                };
                batch.push(data.inputs.example(&sample, &model_config, SampleMode::Train, &mut rng)?);
            }
            let value = trainer.train_step(&batch, lr).map_err(|e| match e {
                NnError::Diverged { .. } => CliError::Numeric(format!(
                    "{e} in epoch {epoch}; last good checkpoint kept at {}",
                    ckpt_path.display()
                )),
                other => other.into(),
            })?;
            parts.add(&value, batch.len() as f64 / train_set.len() as f64);
        }
        let val = if val_set.is_empty() {
            None
        } else {
            Some(evaluate(&trainer, &mut data.inputs, &val_set, config.top_k)?)
        };
        let entry = EpochLog {
            epoch,
            lr,
            steps: trainer.steps_taken(),
            loss: parts,
            offset_l1: trainer.offset.l1_norm(),
            val,
        };
        write_line(&mut log, serde_json::to_string(&entry).expect("log serializes"))?;
        save(&trainer, epoch + 1, config.seed, &ckpt_path)?;
        on_epoch(&entry, &trainer);
        epochs.push(entry);
    }
    Ok(TrainOutcome {
        trainer,
        epochs,
        checkpoint: ckpt_path,
        log: log_path,
    })
}

/// Loads a checkpoint, rejecting one whose geometry does not fit `data`.
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint<f32>> {
    Ok(Checkpoint::<f32>::load(path)?)
}
