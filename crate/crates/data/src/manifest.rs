//! Line-delimited JSON sequence manifests.
//!
//! The first line is a header carrying the schema version, the seed and a
//! snapshot of the build configuration; each following line is one sample.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use shotseq_core::{OrderingLabel, Permutation};

use crate::error::{read_to_string, write, DataError};
use crate::scene::Shot;
use crate::sequence::{SequenceSample, Split};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestHeader {
    pub schema_version: u32,
    pub kind: String,
    pub seed: u64,
    pub k: usize,
    /// Free-form build configuration, echoed for provenance.
    pub config: serde_json::Value,
}

impl ManifestHeader {
    pub fn new(seed: u64, k: usize, config: serde_json::Value) -> Self {
        ManifestHeader {
            schema_version: SCHEMA_VERSION,
            kind: "shotseq-manifest".into(),
            seed,
            k,
            config,
        }
    }
}

/// One persisted sample. `shots` are in temporal order; presented shot `i`
/// is `shots[presentation_order[i]]` and `label` is the rank of that order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub schema_version: u32,
    pub scene_id: String,
    pub split: Split,
    pub shots: Vec<Shot>,
    pub presentation_order: Vec<usize>,
    pub label: usize,
    pub k: usize,
}

impl From<&SequenceSample> for ManifestRecord {
    fn from(s: &SequenceSample) -> Self {
        ManifestRecord {
            schema_version: SCHEMA_VERSION,
            scene_id: s.scene_id.clone(),
            split: s.split,
            shots: s.shots.clone(),
            presentation_order: s.shuffle.mapping().to_vec(),
            label: s.label().class_index(),
            k: s.k(),
        }
    }
}

impl ManifestRecord {
    /// Rebuilds the sample, checking label and order agree.
    pub fn to_sample(&self) -> Result<SequenceSample, String> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(format!("unsupported schema_version {}", self.schema_version));
        }
        if self.shots.len() != self.k {
            return Err(format!("{} shots for k={}", self.shots.len(), self.k));
        }
        let shuffle = Permutation::new(self.presentation_order.clone()).map_err(|e| e.to_string())?;
        if shuffle.k() != self.k {
            return Err(format!("presentation_order has {} entries for k={}", shuffle.k(), self.k));
        }
        let label = OrderingLabel::new(self.label, self.k).map_err(|e| e.to_string())?;
        if shuffle.rank() != label {
            return Err(format!(
                "label {} does not match presentation_order {:?} (rank {})",
                self.label,
                self.presentation_order,
                shuffle.rank().class_index()
            ));
        }
        Ok(SequenceSample {
            scene_id: self.scene_id.clone(),
            shots: self.shots.clone(),
            shuffle,
            split: self.split,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub header: ManifestHeader,
    pub samples: Vec<SequenceSample>,
}

impl Manifest {
    /// Rejects splits that share a scene.
    pub fn validate(&self) -> Result<(), DataError> {
        let mut seen: BTreeMap<&str, Split> = BTreeMap::new();
        for s in &self.samples {
            if s.k() != self.header.k {
                return Err(DataError::Contract(format!("{}: k={} in a k={} manifest", s.scene_id, s.k(), self.header.k)));
            }
            if let Some(prev) = seen.insert(&s.scene_id, s.split) {
                if prev != s.split {
                    return Err(DataError::Contract(format!(
                        "scene {} appears in both {prev} and {}",
                        s.scene_id, s.split
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &SequenceSample> {
        self.samples.iter().filter(move |s| s.split == split)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for s in &self.samples {
            let line = serde_json::to_string(&ManifestRecord::from(s)).expect("record serializes");
            writeln!(out, "{line}").expect("write to String");
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, DataError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or_else(|| DataError::format(1, "empty manifest"))?;
        let header: ManifestHeader =
            serde_json::from_str(first).map_err(|e| DataError::format(1, format!("bad header: {e}")))?;
        if header.schema_version != SCHEMA_VERSION {
            return Err(DataError::format(
                1,
                format!("unsupported schema_version {}", header.schema_version),
            ));
        }
        let mut samples = Vec::new();
        for (idx, line) in lines {
            let record: ManifestRecord =
                serde_json::from_str(line).map_err(|e| DataError::format(idx + 1, e.to_string()))?;
            samples.push(record.to_sample().map_err(|m| DataError::format(idx + 1, m))?);
        }
        let manifest = Manifest { header, samples };
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn write(&self, path: &Path) -> Result<(), DataError> {
        write(path, self.to_jsonl())
    }

    pub fn read(path: &Path) -> Result<Self, DataError> {
        Self::from_jsonl(&read_to_string(path)?).map_err(|e| e.at(path))
    }
}

/// Scene and sequence counts per split.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub scenes: usize,
    pub sequences: usize,
    pub shots: usize,
    pub mean_shot_frames: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub seed: u64,
    pub k: usize,
    pub splits: BTreeMap<Split, SplitSummary>,
    pub scenes_unusable: usize,
    pub shots_dropped_short: usize,
    pub shots_dropped_black: usize,
    pub config: serde_json::Value,
}

impl DatasetSummary {
    pub fn from_manifest(manifest: &Manifest) -> Self {
        let mut splits = BTreeMap::new();
        for split in Split::ALL {
            let samples: Vec<&SequenceSample> = manifest.split(split).collect();
            let scenes: std::collections::BTreeSet<&str> = samples.iter().map(|s| s.scene_id.as_str()).collect();
            let shots: std::collections::BTreeSet<(&str, u64)> = samples
                .iter()
                .flat_map(|s| s.shots.iter().map(move |sh| (s.scene_id.as_str(), sh.start)))
                .collect();
            let frames: u64 = samples.iter().flat_map(|s| &s.shots).map(Shot::len).sum();
            let n = samples.len() * manifest.header.k;
            splits.insert(
                split,
                SplitSummary {
                    scenes: scenes.len(),
                    sequences: samples.len(),
                    shots: shots.len(),
                    mean_shot_frames: if n == 0 { 0 } else { frames / n as u64 },
                },
            );
        }
        DatasetSummary {
            seed: manifest.header.seed,
            k: manifest.header.k,
            splits,
            scenes_unusable: 0,
            shots_dropped_short: 0,
            shots_dropped_black: 0,
            config: manifest.header.config.clone(),
        }
    }
}
