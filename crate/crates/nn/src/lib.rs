//! A small video transformer that classifies the shuffle applied to a
//! sequence of shots, with optional cinematology label tokens, trained by
//! SGD on hand-derived gradients.

mod array;
pub mod checkpoint;
mod cinematology;
mod config;
mod error;
pub mod gradcheck;
mod layers;
mod linalg;
mod model;
pub mod optim;
mod real;
pub mod train;

pub use array::{DenseArray, ParamId, ParamStore};
pub use checkpoint::{Checkpoint, RngState};
pub use cinematology::{CinematologyInput, ShotLabels};
pub use config::ModelConfig;
pub use error::NnError;
pub use gradcheck::{finite_diff_check, GradCheckOptions, GradCheckReport};
pub use model::{ForwardPass, SampleInput, VideoOrderModel};
pub use optim::{lr_schedule, Sgd, SgdConfig};
pub use real::Real;
pub use train::{Trainer, TrainingExample};
