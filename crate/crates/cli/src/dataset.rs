//! Manifest samples turned into model inputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::Rng;

use shotseq_data::dataset::{sample_labels, LABELS_FILE, META_FILE};
use shotseq_data::meta::read_meta;
use shotseq_data::{
    ClipStore, GenreMode, GenreVocabulary, LabelProvision, Manifest, SampleMode, SequenceSample, Split,
};
use shotseq_nn::{CinematologyInput, ModelConfig, SampleInput, ShotLabels, TrainingExample};

use crate::error::{CliError, Result};

/// Sibling file of the manifest if it exists.
fn sibling(manifest: &Path, name: &str) -> Option<PathBuf> {
    let p = manifest.parent().unwrap_or(Path::new(".")).join(name);
    p.exists().then_some(p)
}

/// Everything besides the manifest that builds an input.
#[derive(Debug)]
pub struct InputBuilder {
    pub labels: Option<LabelProvision>,
    genres: BTreeMap<String, Vec<f64>>,
    vocab: GenreVocabulary,
    store: ClipStore,
}

#[derive(Debug)]
pub struct LoadedDataset {
    pub manifest: Manifest,
    pub inputs: InputBuilder,
}

impl LoadedDataset {
    /// Opens a manifest. Label and metadata files default to `labels.csv`
    /// and `meta.jsonl` next to it.
    pub fn open(manifest_path: &Path, labels: Option<&Path>, meta: Option<&Path>, genre_mode: GenreMode) -> Result<Self> {
        let manifest = Manifest::read(manifest_path)?;
        let labels_path = labels.map(Path::to_path_buf).or_else(|| sibling(manifest_path, LABELS_FILE));
        let meta_path = meta.map(Path::to_path_buf).or_else(|| sibling(manifest_path, META_FILE));
        let labels = labels_path.as_deref().map(LabelProvision::read).transpose()?;
        let vocab = GenreVocabulary::default();
        let mut genres = BTreeMap::new();
        if let Some(p) = &meta_path {
            for rec in read_meta(p)? {
                genres.insert(rec.scene_id.clone(), vocab.vector(rec.genres(), genre_mode));
            }
        }
        let base = manifest_path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Ok(LoadedDataset {
            manifest,
            inputs: InputBuilder {
                labels,
                genres,
                vocab,
                store: ClipStore::new(base),
            },
        })
    }

    pub fn split(&self, split: Split) -> Vec<SequenceSample> {
        self.manifest.split(split).cloned().collect()
    }
}

impl InputBuilder {
    pub fn check(&self, config: &ModelConfig) -> Result<()> {
        if config.use_cinematology {
            if self.vocab.len() != config.num_genres {
                return Err(CliError::Usage(format!(
                    "model expects {} genres, vocabulary has {}",
                    config.num_genres,
                    self.vocab.len()
                )));
            }
            if let Some(l) = &self.labels {
                if l.cardinalities != config.category_cardinalities {
                    return Err(CliError::Usage(format!(
                        "label file cardinalities {:?} differ from the model's {:?}",
                        l.cardinalities, config.category_cardinalities
                    )));
                }
            }
        }
        Ok(())
    }

    fn cinematology(&self, sample: &SequenceSample, config: &ModelConfig) -> Result<Option<CinematologyInput>> {
        let Some(labels) = self.labels.as_ref().filter(|_| config.use_cinematology) else {
            return Ok(None);
        };
        let shots = sample_labels(sample, labels).ok_or_else(|| {
            CliError::Format(format!("label file has no entry for a shot of {}", sample.scene_id))
        })?;
        let genre = self
            .genres
            .get(&sample.scene_id)
            .cloned()
            .unwrap_or_else(|| self.vocab.vector(&[], GenreMode::MultiHot));
        let shots = shots.into_iter().map(|categories| ShotLabels { categories }).collect();
        Ok(Some(CinematologyInput::new(shots, genre)?))
    }

    /// Frames scaled to [-1, 1] and label tokens for one sample.
    pub fn example<R: Rng>(
        &mut self,
        sample: &SequenceSample,
        config: &ModelConfig,
        mode: SampleMode,
        rng: &mut R,
    ) -> Result<TrainingExample<f32>> {
        if sample.k() != config.k {
            return Err(CliError::Usage(format!("manifest k={} but model k={}", sample.k(), config.k)));
        }
        let (h, w, px) = self.store.sample_frames(sample, config.segments_per_shot, mode, rng)?;
        if (h, w, 1) != (config.frame_height, config.frame_width, config.channels) {
            return Err(CliError::Usage(format!(
                "clips are {h}x{w} grayscale, model expects {}x{}x{}",
                config.frame_height, config.frame_width, config.channels
            )));
        }
        let frames = px.into_iter().map(|p| p as f32 / 127.5 - 1.0).collect();
        Ok(TrainingExample {
            input: SampleInput {
                frames,
                cinematology: self.cinematology(sample, config)?,
            },
            label: sample.label().class_index(),
        })
    }
}
