//! Synthetic scenes with a known ordering signal.
//!
//! * `ramp`: pixels encode scene time. Every frame has an integer base level
//!   rising by a fixed step per frame, a bright bar whose width grows with
//!   time, and zero-sum paired noise, so mean intensity strictly increases.
//! * `grammar`: pixels are i.i.d. noise. Shot sizes and angles walk one class
//!   per shot in a direction fixed by the genre; motion and type are drawn
//!   from genre-dependent categoricals. Order is recoverable only from
//!   (genre, labels).
//! * `mixed`: ramp pixels with grammar labels.

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use shotseq_core::{ShotCategory, CATEGORY_COUNT, DEFAULT_CARDINALITIES};

use crate::error::DataError;
use crate::labels::{one_hot, ShotProbabilities};
use crate::meta::{GenreVocabulary, MetaRecord};
use crate::pgm::Clip;
use crate::scene::{SceneRecord, SceneSource, Shot};
use crate::seed::item_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthFamily {
    Ramp,
    Grammar,
    Mixed,
}

impl SynthFamily {
    pub fn name(self) -> &'static str {
        match self {
            SynthFamily::Ramp => "ramp",
            SynthFamily::Grammar => "grammar",
            SynthFamily::Mixed => "mixed",
        }
    }

    pub fn ramp_pixels(self) -> bool {
        self != SynthFamily::Grammar
    }

    pub fn grammar_labels(self) -> bool {
        self != SynthFamily::Ramp
    }
}

impl fmt::Display for SynthFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SynthFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ramp" => Ok(SynthFamily::Ramp),
            "grammar" => Ok(SynthFamily::Grammar),
            "mixed" => Ok(SynthFamily::Mixed),
            _ => Err(format!("unknown family {s:?}, expected ramp, grammar or mixed")),
        }
    }
}

const RAMP_BASE: u32 = 30;
const RAMP_SPAN: u32 = 150;
const RAMP_BAR: u32 = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub shots_per_scene: usize,
    pub min_frames: usize,
    pub max_frames: usize,
    pub width: usize,
    pub height: usize,
    /// Amplitude of the paired pixel noise on ramp frames.
    pub ramp_noise: u32,
    pub cardinalities: [usize; CATEGORY_COUNT],
    pub genres: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            shots_per_scene: 3,
            min_frames: 12,
            max_frames: 24,
            width: 32,
            height: 32,
            ramp_noise: 10,
            cardinalities: DEFAULT_CARDINALITIES,
            genres: 10,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<(), DataError> {
        let fail = |m: String| Err(DataError::Config(m));
        if self.shots_per_scene < 2 {
            return fail("shots_per_scene must be at least 2".into());
        }
        if self.min_frames == 0 || self.min_frames > self.max_frames {
            return fail(format!("frame range {}..={} is empty", self.min_frames, self.max_frames));
        }
        if self.width == 0 || self.height == 0 || !(self.width * self.height).is_multiple_of(2) {
            return fail("frames need a positive, even pixel count".into());
        }
        if self.shots_per_scene * self.max_frames > RAMP_SPAN as usize + 1 {
            return fail(format!(
                "at most {} frames per scene keep the ramp strictly increasing",
                RAMP_SPAN + 1
            ));
        }
        if self.ramp_noise > RAMP_BASE.min(255 - RAMP_BASE - RAMP_SPAN - RAMP_BAR) {
            return fail(format!("ramp_noise {} would clip", self.ramp_noise));
        }
        if self.genres == 0 {
            return fail("genres must be positive".into());
        }
        for c in [ShotCategory::ShotSize, ShotCategory::ShotAngle] {
            if self.cardinalities[c.index()] < self.shots_per_scene {
                return fail(format!(
                    "{} needs at least {} classes for a monotone walk",
                    c.name(),
                    self.shots_per_scene
                ));
            }
        }
        if self.cardinalities.contains(&0) {
            return fail("cardinalities must be positive".into());
        }
        Ok(())
    }

    pub fn grammar(&self) -> GrammarModel {
        GrammarModel {
            cardinalities: self.cardinalities,
            shots: self.shots_per_scene,
            genres: self.genres,
        }
    }
}

/// The genre-conditioned label distributions of the grammar family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GrammarModel {
    pub cardinalities: [usize; CATEGORY_COUNT],
    pub shots: usize,
    pub genres: usize,
}

impl GrammarModel {
    /// Walk direction for size and angle, `None` for the i.i.d. categories.
    /// Size direction follows genre parity; angle direction splits the genre
    /// list in half.
    pub fn direction(&self, category: ShotCategory, genre: usize) -> Option<i64> {
        match category {
            ShotCategory::ShotSize => Some(if genre.is_multiple_of(2) { 1 } else { -1 }),
            ShotCategory::ShotAngle => Some(if genre < self.genres.div_ceil(2) { 1 } else { -1 }),
            _ => None,
        }
    }

    /// Classes a walk may start from.
    pub fn allowed_starts(&self, category: ShotCategory, genre: usize) -> Vec<usize> {
        let c = self.cardinalities[category.index()];
        match self.direction(category, genre) {
            Some(1) => (0..=c - self.shots).collect(),
            Some(_) => (self.shots - 1..c).collect(),
            None => Vec::new(),
        }
    }

    /// Start distribution for walks; class distribution otherwise.
    pub fn weights(&self, category: ShotCategory, genre: usize) -> Vec<f64> {
        let ci = category.index();
        let raw: Vec<f64> = match self.direction(category, genre) {
            Some(_) => (0..self.allowed_starts(category, genre).len())
                .map(|j| 1.0 + ((3 * genre + 2 * j + ci) % 4) as f64)
                .collect(),
            None => (0..self.cardinalities[ci])
                .map(|i| 1.0 + ((7 * genre + 3 * i + ci) % 5) as f64)
                .collect(),
        };
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    }

    /// Marginal class distribution of one shot drawn uniformly from a scene.
    pub fn expected_histogram(&self, category: ShotCategory, genre: usize) -> Vec<f64> {
        let c = self.cardinalities[category.index()];
        let w = self.weights(category, genre);
        match self.direction(category, genre) {
            None => w,
            Some(d) => {
                let mut out = vec![0.0; c];
                for (start, p) in self.allowed_starts(category, genre).into_iter().zip(w) {
                    for pos in 0..self.shots {
                        let class = (start as i64 + d * pos as i64) as usize;
                        out[class] += p / self.shots as f64;
                    }
                }
                out
            }
        }
    }

    /// Class indices for every shot of one scene, in temporal order.
    pub fn sample<R: Rng>(&self, genre: usize, rng: &mut R) -> Vec<[usize; CATEGORY_COUNT]> {
        let mut out = vec![[0; CATEGORY_COUNT]; self.shots];
        for cat in ShotCategory::ALL {
            let w = self.weights(cat, genre);
            let dist = WeightedIndex::new(&w).expect("positive weights");
            match self.direction(cat, genre) {
                Some(d) => {
                    let start = self.allowed_starts(cat, genre)[dist.sample(rng)] as i64;
                    for (pos, shot) in out.iter_mut().enumerate() {
                        shot[cat.index()] = (start + d * pos as i64) as usize;
                    }
                }
                None => {
                    for shot in out.iter_mut() {
                        shot[cat.index()] = dist.sample(rng);
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthScene {
    pub family: SynthFamily,
    pub scene: SceneRecord,
    /// One clip per shot, temporal order.
    pub clips: Vec<Clip>,
    /// Ground-truth classes per shot; absent for the ramp family.
    pub classes: Option<Vec<[usize; CATEGORY_COUNT]>>,
    pub genre: usize,
}

impl SynthScene {
    pub fn shot_probabilities(&self, cardinalities: [usize; CATEGORY_COUNT]) -> Option<Vec<ShotProbabilities>> {
        self.classes
            .as_ref()
            .map(|cs| cs.iter().map(|&c| one_hot(c, cardinalities)).collect())
    }

    pub fn meta(&self, vocab: &GenreVocabulary) -> MetaRecord {
        MetaRecord {
            scene_id: self.scene.scene_id.clone(),
            title: Some(format!("Synthetic {} scene", self.family)),
            genres: vocab.names().get(self.genre).map(|g| vec![g.clone()]),
            ..Default::default()
        }
    }
}

pub fn synth_scene_id(family: SynthFamily, index: usize) -> String {
    format!("synth-{family}-{index:05}")
}

/// Relative location of a synthetic shot clip inside a dataset directory.
pub fn clip_path(scene_id: &str, shot: usize) -> String {
    format!("frames/{scene_id}/shot{shot}.pgm")
}

/// Scene `index` of a family. Deterministic in `(family, params, seed, index)`.
pub fn synth_scene(family: SynthFamily, params: &SynthParams, seed: u64, index: usize) -> Result<SynthScene, DataError> {
    params.validate()?;
    let scene_id = synth_scene_id(family, index);
    let mut rng = item_rng(seed, &scene_id, 0);
    let genre = rng.random_range(0..params.genres);
    let grammar = params.grammar();
    let classes = grammar.sample(genre, &mut rng);
    let lengths: Vec<usize> = (0..params.shots_per_scene)
        .map(|_| rng.random_range(params.min_frames..=params.max_frames))
        .collect();
    let total: usize = lengths.iter().sum();

    let mut shots = Vec::with_capacity(lengths.len());
    let mut clips = Vec::with_capacity(lengths.len());
    let mut t = 0;
    for (j, &len) in lengths.iter().enumerate() {
        let frames = (t..t + len)
            .map(|ft| {
                if family.ramp_pixels() {
                    ramp_frame(params, ft, total, &mut rng)
                } else {
                    (0..params.width * params.height).map(|_| rng.random()).collect()
                }
            })
            .collect();
        clips.push(Clip::new(params.width, params.height, frames)?);
        shots.push(Shot {
            start: t as u64,
            end: (t + len) as u64,
            path: Some(clip_path(&scene_id, j)),
            index: Some(j),
        });
        t += len;
    }
    Ok(SynthScene {
        family,
        scene: SceneRecord {
            scene_id,
            shots,
            source: SceneSource::Synthetic,
        },
        clips,
        classes: family.grammar_labels().then_some(classes),
        genre,
    })
}

/// Base level plus time bar plus zero-sum noise; never clips.
fn ramp_frame<R: Rng>(params: &SynthParams, t: usize, total: usize, rng: &mut R) -> Vec<u8> {
    let last = (total - 1).max(1) as u32;
    let step = (RAMP_SPAN / last).max(1);
    let level = RAMP_BASE + t as u32 * step;
    let (w, h) = (params.width, params.height);
    let mut frame = Vec::with_capacity(w * h);
    for _ in 0..h {
        for c in 0..w {
            let bar = if (c as u32) * last < t as u32 * w as u32 { RAMP_BAR } else { 0 };
            frame.push((level + bar) as i32);
        }
    }
    let amp = params.ramp_noise as i32;
    for pair in frame.chunks_exact_mut(2) {
        let d = rng.random_range(-amp..=amp);
        pair[0] += d;
        pair[1] -= d;
    }
    frame.into_iter().map(|v| v as u8).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_means_strictly_increase() {
        let p = SynthParams::default();
        for i in 0..20 {
            let s = synth_scene(SynthFamily::Ramp, &p, 3, i).unwrap();
            let means: Vec<f64> = s.clips.iter().flat_map(Clip::frame_means).collect();
            assert_eq!(means.len() as u64, s.scene.shots.last().unwrap().end);
            assert!(means.windows(2).all(|w| w[0] < w[1]), "{means:?}");
            assert!(s.classes.is_none());
        }
    }

    #[test]
    fn grammar_walks_follow_genre() {
        let p = SynthParams::default();
        let g = p.grammar();
        for i in 0..50 {
            let s = synth_scene(SynthFamily::Grammar, &p, 1, i).unwrap();
            let classes = s.classes.unwrap();
            for cat in [ShotCategory::ShotSize, ShotCategory::ShotAngle] {
                let d = g.direction(cat, s.genre).unwrap();
                for w in classes.windows(2) {
                    assert_eq!(w[1][cat.index()] as i64 - w[0][cat.index()] as i64, d);
                }
            }
        }
    }

    #[test]
    fn expected_histograms_are_distributions() {
        let g = SynthParams::default().grammar();
        for genre in 0..g.genres {
            for cat in ShotCategory::ALL {
                let h = g.expected_histogram(cat, genre);
                assert_eq!(h.len(), g.cardinalities[cat.index()]);
                assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn deterministic() {
        let p = SynthParams::default();
        for f in [SynthFamily::Ramp, SynthFamily::Grammar, SynthFamily::Mixed] {
            assert_eq!(synth_scene(f, &p, 9, 4).unwrap(), synth_scene(f, &p, 9, 4).unwrap());
            assert_ne!(synth_scene(f, &p, 9, 4).unwrap().clips, synth_scene(f, &p, 10, 4).unwrap().clips);
        }
    }

    #[test]
    fn invalid_params() {
        let bad = [
            SynthParams { shots_per_scene: 1, ..Default::default() },
            SynthParams { shots_per_scene: 6, ..Default::default() },
            SynthParams { min_frames: 30, ..Default::default() },
            SynthParams { max_frames: 60, ..Default::default() },
            SynthParams { ramp_noise: 40, ..Default::default() },
            SynthParams { width: 3, height: 3, ..Default::default() },
        ];
        for p in bad {
            assert!(synth_scene(SynthFamily::Ramp, &p, 0, 0).is_err(), "{p:?}");
        }
    }
}
