//! Dataset construction for shot-order prediction.
//!
//! Scenes come from shot-boundary files or the synthetic generator; they are
//! cleaned, split by scene, cut into k-shot windows, shuffled and labelled,
//! then persisted as a JSONL manifest next to label and metadata files.

pub mod clean;
pub mod dataset;
mod error;
pub mod histogram;
pub mod labels;
pub mod manifest;
pub mod meta;
pub mod pgm;
pub mod scene;
pub mod seed;
pub mod sequence;
pub mod split;
pub mod synth;
pub mod tsn;

pub use clean::{clean_shots, CleanConfig};
pub use dataset::{build_dataset, write_synth_dataset, BuildConfig, ClipStore, SynthDatasetConfig};
pub use error::DataError;
pub use histogram::{genre_shot_histogram, GenreHistogram};
pub use labels::{LabelProvider, LabelProvision};
pub use manifest::{DatasetSummary, Manifest};
pub use meta::{GenreMode, GenreVocabulary, MetaRecord};
pub use pgm::Clip;
pub use scene::{ingest_shot_boundaries, SceneRecord, SceneSource, Shot};
pub use sequence::{make_sequences, shuffle_augment, SequenceSample, Split};
pub use split::split_scenes;
pub use synth::{synth_scene, GrammarModel, SynthFamily, SynthParams, SynthScene};
pub use tsn::{tsn_sample, SampleMode};
