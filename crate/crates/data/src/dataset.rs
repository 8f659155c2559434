//! End-to-end dataset construction and frame loading.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::clean::{clean_shots, CleanConfig};
use crate::error::{write, DataError};
use crate::labels::{LabelProvider, LabelProvision, ShotProbabilities};
use crate::manifest::{DatasetSummary, Manifest, ManifestHeader};
use crate::meta::{write_meta, GenreVocabulary};
use crate::pgm::Clip;
use crate::scene::{ingest_shot_boundaries, write_boundaries, SceneRecord};
use crate::sequence::{make_sequences, window_count, SequenceSample, Split};
use crate::split::{split_scenes, DEFAULT_RATIOS};
use crate::synth::{synth_scene, SynthFamily, SynthParams};
use crate::tsn::{tsn_sample, SampleMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildConfig {
    pub k: usize,
    pub ratios: [f64; 3],
    pub seed: u64,
    /// Samples per scene; one per stride-1 window when unset.
    pub sequences_per_scene: Option<usize>,
    pub clean: CleanConfig,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            k: 3,
            ratios: DEFAULT_RATIOS,
            seed: 0,
            sequences_per_scene: None,
            clean: CleanConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BuildOutput {
    pub manifest: Manifest,
    pub summary: DatasetSummary,
    /// Scenes skipped because cleaning left fewer than k shots.
    pub unusable: Vec<String>,
}

/// Cleans, splits and windows scenes. `frame_luma` maps scene ids to
/// per-shot frame luminance for the black-shot rule.
pub fn build_dataset(
    scenes: &[SceneRecord],
    config: &BuildConfig,
    frame_luma: Option<&BTreeMap<String, Vec<Vec<f64>>>>,
) -> Result<BuildOutput, DataError> {
    let mut usable = BTreeMap::new();
    let mut unusable = Vec::new();
    let (mut short, mut black) = (0, 0);
    for scene in scenes {
        scene.validate()?;
        let luma = frame_luma.and_then(|m| m.get(&scene.scene_id)).map(Vec::as_slice);
        match clean_shots(scene, &config.clean, config.k, luma) {
            Ok(c) => {
                short += c.dropped_short;
                black += c.dropped_black;
                if usable.insert(scene.scene_id.clone(), c.scene).is_some() {
                    return Err(DataError::Contract(format!("duplicate scene id {}", scene.scene_id)));
                }
            }
            Err(DataError::Unusable { scene_id, .. }) => unusable.push(scene_id),
            Err(e) => return Err(e),
        }
    }
    let ids: Vec<String> = usable.keys().cloned().collect();
    let assignment = split_scenes(&ids, config.ratios, config.seed)?;
    let mut samples = Vec::new();
    for (id, scene) in &usable {
        let count = config.sequences_per_scene.unwrap_or_else(|| window_count(scene, config.k));
        samples.extend(make_sequences(scene, config.k, count, config.seed, assignment[id])?);
    }
    let header = ManifestHeader::new(
        config.seed,
        config.k,
        serde_json::to_value(config).expect("config serializes"),
    );
    let manifest = Manifest { header, samples };
    let mut summary = DatasetSummary::from_manifest(&manifest);
    summary.scenes_unusable = unusable.len();
    summary.shots_dropped_short = short;
    summary.shots_dropped_black = black;
    Ok(BuildOutput {
        manifest,
        summary,
        unusable,
    })
}

/// Every `*.txt` boundary file in a directory, by file name.
pub fn ingest_boundary_dir(dir: &Path) -> Result<Vec<SceneRecord>, DataError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| DataError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(DataError::Config(format!("no .txt boundary files in {}", dir.display())));
    }
    paths.iter().map(|p| ingest_shot_boundaries(p)).collect()
}

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const LABELS_FILE: &str = "labels.csv";
pub const META_FILE: &str = "meta.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const BOUNDARY_DIR: &str = "boundaries";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthDatasetConfig {
    pub family: SynthFamily,
    pub scenes: usize,
    pub params: SynthParams,
    pub build: BuildConfig,
}

impl Default for SynthDatasetConfig {
    fn default() -> Self {
        SynthDatasetConfig {
            family: SynthFamily::Ramp,
            scenes: 100,
            params: SynthParams::default(),
            build: BuildConfig::default(),
        }
    }
}

/// Generates a synthetic dataset: clips, boundary files, labels, metadata,
/// manifest and summary under `dir`. The seed in `config.build` drives both
/// generation and sampling.
pub fn write_synth_dataset(
    dir: &Path,
    config: &SynthDatasetConfig,
    vocab: &GenreVocabulary,
) -> Result<BuildOutput, DataError> {
    if config.params.genres > vocab.len() {
        return Err(DataError::Config(format!(
            "{} synthetic genres but only {} names",
            config.params.genres,
            vocab.len()
        )));
    }
    let seed = config.build.seed;
    let cards = config.params.cardinalities;
    let mut labels = if config.family.grammar_labels() {
        LabelProvision::new(LabelProvider::GroundTruth, cards)
    } else {
        LabelProvision::uniform(cards)
    };
    let mut scenes = Vec::with_capacity(config.scenes);
    let mut meta = Vec::with_capacity(config.scenes);
    let mut luma = BTreeMap::new();
    for i in 0..config.scenes {
        let s = synth_scene(config.family, &config.params, seed, i)?;
        for (shot, clip) in s.scene.shots.iter().zip(&s.clips) {
            clip.write(&dir.join(shot.path.as_deref().expect("synthetic shots have clips")))?;
        }
        write_boundaries(&s.scene, &dir.join(BOUNDARY_DIR).join(format!("{}.txt", s.scene.scene_id)))?;
        if let Some(probs) = s.shot_probabilities(cards) {
            for (j, p) in probs.into_iter().enumerate() {
                labels.insert(&s.scene.scene_id, j, p)?;
            }
        }
        meta.push(s.meta(vocab));
        luma.insert(s.scene.scene_id.clone(), s.clips.iter().map(Clip::frame_means).collect());
        scenes.push(s.scene);
    }
    let mut out = build_dataset(&scenes, &config.build, Some(&luma))?;
    let snapshot = serde_json::to_value(config).expect("config serializes");
    out.manifest.header.config = snapshot.clone();
    out.summary.config = snapshot;
    labels.write(&dir.join(LABELS_FILE))?;
    write_meta(&meta, &dir.join(META_FILE))?;
    out.manifest.write(&dir.join(MANIFEST_FILE))?;
    write_summary(&out.summary, &dir.join(SUMMARY_FILE))?;
    Ok(out)
}

pub fn write_summary(summary: &DatasetSummary, path: &Path) -> Result<(), DataError> {
    let mut text = serde_json::to_string_pretty(summary).expect("summary serializes");
    text.push('\n');
    write(path, text)
}

/// Lazily loaded clips, keyed by resolved path.
#[derive(Debug, Default)]
pub struct ClipStore {
    base: PathBuf,
    cache: HashMap<PathBuf, Arc<Clip>>,
}

impl ClipStore {
    /// Relative shot paths resolve against `base`, normally the manifest's
    /// directory.
    pub fn new(base: impl Into<PathBuf>) -> Self {
        ClipStore {
            base: base.into(),
            cache: HashMap::new(),
        }
    }

    pub fn clip(&mut self, scene_id: &str, shot: &crate::scene::Shot) -> Result<Arc<Clip>, DataError> {
        let rel = shot.path.as_deref().ok_or_else(|| {
            DataError::Contract(format!("{scene_id}: shot {}..{} has no clip path", shot.start, shot.end))
        })?;
        let path = self.base.join(rel);
        if let Some(c) = self.cache.get(&path) {
            return Ok(c.clone());
        }
        let clip = Arc::new(Clip::read(&path)?);
        if clip.len() as u64 != shot.len() {
            return Err(DataError::Contract(format!(
                "{}: {} frames for a {}-frame shot",
                path.display(),
                clip.len(),
                shot.len()
            )));
        }
        self.cache.insert(path, clip.clone());
        Ok(clip)
    }

    /// Pixels of one sample laid out `k x segments x H x W`, shots in
    /// presentation order.
    pub fn sample_frames<R: Rng>(
        &mut self,
        sample: &SequenceSample,
        segments: usize,
        mode: SampleMode,
        rng: &mut R,
    ) -> Result<(usize, usize, Vec<u8>), DataError> {
        let mut out = Vec::new();
        let mut dims = None;
        for shot in sample.presented() {
            let clip = self.clip(&sample.scene_id, &shot)?;
            if *dims.get_or_insert((clip.height, clip.width)) != (clip.height, clip.width) {
                return Err(DataError::Contract(format!("{}: clips differ in size", sample.scene_id)));
            }
            for i in tsn_sample(clip.len(), segments, mode, rng)? {
                out.extend_from_slice(&clip.frames[i]);
            }
        }
        let (h, w) = dims.expect("k >= 2");
        Ok((h, w, out))
    }
}

/// Label vectors of the presented shots, if the provision covers them all.
pub fn sample_labels(sample: &SequenceSample, labels: &LabelProvision) -> Option<Vec<ShotProbabilities>> {
    sample
        .presented()
        .iter()
        .map(|s| labels.get(&sample.scene_id, s.index?))
        .collect()
}

/// Scene ids per split.
pub fn scenes_by_split(manifest: &Manifest) -> BTreeMap<Split, Vec<String>> {
    let mut out: BTreeMap<Split, Vec<String>> = BTreeMap::new();
    for s in &manifest.samples {
        let v = out.entry(s.split).or_default();
        if v.last() != Some(&s.scene_id) {
            v.push(s.scene_id.clone());
        }
    }
    out
}
