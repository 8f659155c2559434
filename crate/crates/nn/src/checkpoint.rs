//! Binary checkpoint container.
//!
//! Layout: 8-byte magic, `u32` format version, `u32` header length, a JSON
//! header, then little-endian blobs in header order: parameters, momentum
//! buffers (model dtype), offset matrix and its velocity (`f64`).

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use shotseq_core::{LossConfig, OffsetMatrix};

use crate::config::ModelConfig;
use crate::error::NnError;
use crate::model::VideoOrderModel;
use crate::optim::{Sgd, SgdConfig};
use crate::real::Real;
use crate::train::Trainer;

const MAGIC: &[u8; 8] = b"SHOTSEQ\0";
pub const FORMAT_VERSION: u32 = 1;

/// Position of a ChaCha stream, enough to resume it exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub stream: u64,
    pub word_pos: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    dtype: String,
    config: ModelConfig,
    loss: LossConfig,
    sgd: SgdConfig,
    epoch: u64,
    step: u64,
    rng: RngState,
    offset_trainable: bool,
    tensors: Vec<TensorEntry>,
}

/// Everything needed to resume training or reproduce predictions.
#[derive(Debug, Clone)]
pub struct Checkpoint<T> {
    pub trainer: Trainer<T>,
    pub epoch: u64,
    pub rng: RngState,
}

fn bad(msg: impl Into<String>) -> NnError {
    NnError::Checkpoint(msg.into())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| bad("truncated file"))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn reals<T: Real>(&mut self, n: usize) -> Result<Vec<T>, NnError> {
        Ok(self
            .take(n * T::BYTES)?
            .chunks_exact(T::BYTES)
            .map(T::read_le)
            .collect())
    }
}

impl<T: Real> Checkpoint<T> {
    pub fn to_bytes(&self) -> Result<Vec<u8>, NnError> {
        let t = &self.trainer;
        let header = Header {
            dtype: T::DTYPE.to_string(),
            config: t.model.config().clone(),
            loss: t.loss,
            sgd: t.optimizer.config,
            epoch: self.epoch,
            step: t.steps_taken(),
            rng: self.rng,
            offset_trainable: t.offset.trainable,
            tensors: t
                .model
                .params()
                .iter()
                .map(|(name, a)| TensorEntry {
                    name: name.to_string(),
                    shape: a.shape().to_vec(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| bad(e.to_string()))?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, a) in t.model.params().iter() {
            a.values().iter().for_each(|v| v.write_le(&mut out));
        }
        for v in t.optimizer.velocity() {
            v.iter().for_each(|x| x.write_le(&mut out));
        }
        for v in t
            .offset
            .entries()
            .iter()
            .chain(t.optimizer.offset_velocity())
        {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NnError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(bad(format!("unsupported format version {version}")));
        }
        let len = r.u32()? as usize;
        let header: Header =
            serde_json::from_slice(r.take(len)?).map_err(|e| bad(e.to_string()))?;
        if header.dtype != T::DTYPE {
            return Err(bad(format!(
                "stored as {}, requested {}",
                header.dtype,
                T::DTYPE
            )));
        }

        let mut model = VideoOrderModel::<T>::new(header.config.clone())?;
        let expected: Vec<TensorEntry> = model
            .params()
            .iter()
            .map(|(name, a)| TensorEntry {
                name: name.to_string(),
                shape: a.shape().to_vec(),
            })
            .collect();
        if expected != header.tensors {
            return Err(bad("parameter layout does not match the stored config"));
        }
        let sizes: Vec<usize> = expected.iter().map(|e| e.shape.iter().product()).collect();
        let values = sizes
            .iter()
            .map(|&n| r.reals::<T>(n))
            .collect::<Result<Vec<_>, _>>()?;
        let velocity = sizes
            .iter()
            .map(|&n| r.reals::<T>(n))
            .collect::<Result<Vec<_>, _>>()?;
        model.load_values(values)?;

        let n = model.config().num_classes();
        let mut offset = OffsetMatrix::from_entries(header.config.k, r.reals::<f64>(n * n)?)?;
        offset.trainable = header.offset_trainable;
        let offset_velocity = r.reals::<f64>(n * n)?;
        if r.pos != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        let optimizer = Sgd::from_state(header.sgd, velocity, offset_velocity);
        Ok(Checkpoint {
            trainer: Trainer::from_parts(model, offset, optimizer, header.loss, header.step)?,
            epoch: header.epoch,
            rng: header.rng,
        })
    }

    /// Writes through a temporary sibling and renames, so a crash never
    /// leaves a half-written checkpoint at `path`.
    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        let bytes = self.to_bytes()?;
        let tmp = path.with_extension("tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        Self::from_bytes(&fs::read(path)?)
    }
}
