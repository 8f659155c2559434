//! Shuffled k-shot windows and their ordering labels.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use shotseq_core::{factorial, OrderingLabel, Permutation};

use crate::error::DataError;
use crate::scene::{SceneRecord, Shot};
use crate::seed::item_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Split::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| DataError::Config(format!("unknown split {s:?}")))
    }
}

/// `k` temporally ordered shots and the shuffle they are presented in:
/// presented shot `i` is `shots[shuffle[i]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceSample {
    pub scene_id: String,
    pub shots: Vec<Shot>,
    pub shuffle: Permutation,
    pub split: Split,
}

impl SequenceSample {
    pub fn k(&self) -> usize {
        self.shots.len()
    }

    pub fn label(&self) -> OrderingLabel {
        self.shuffle.rank()
    }

    /// Shots in presentation order.
    pub fn presented(&self) -> Vec<Shot> {
        self.shuffle.apply(&self.shots).expect("shuffle matches k")
    }

    /// Undoes a presentation using only the label.
    pub fn restore<T: Clone>(label: OrderingLabel, presented: &[T]) -> Result<Vec<T>, DataError> {
        Ok(label.unrank().inverse().apply(presented)?)
    }
}

fn uniform_shuffle<R: Rng>(k: usize, rng: &mut R) -> Permutation {
    let index = rng.random_range(0..factorial(k));
    OrderingLabel::new(index, k).expect("index below k!").unrank()
}

/// Draws `count` samples from windows of `k` consecutive shots. Sample `i`
/// uses window `i mod W` and a uniform shuffle seeded from
/// `(seed, scene_id, i)`.
pub fn make_sequences(
    scene: &SceneRecord,
    k: usize,
    count: usize,
    seed: u64,
    split: Split,
) -> Result<Vec<SequenceSample>, DataError> {
    if k < 2 {
        return Err(DataError::Config(format!("k must be at least 2, got {k}")));
    }
    if scene.shots.len() < k {
        return Err(DataError::Unusable {
            scene_id: scene.scene_id.clone(),
            remaining: scene.shots.len(),
            needed: k,
        });
    }
    let windows = scene.shots.len() - k + 1;
    Ok((0..count)
        .map(|i| {
            let start = i % windows;
            let mut rng = item_rng(seed, &scene.scene_id, i as u64);
            SequenceSample {
                scene_id: scene.scene_id.clone(),
                shots: scene.shots[start..start + k].to_vec(),
                shuffle: uniform_shuffle(k, &mut rng),
                split,
            }
        })
        .collect())
}

/// Number of stride-1 windows in a scene.
pub fn window_count(scene: &SceneRecord, k: usize) -> usize {
    (scene.shots.len() + 1).saturating_sub(k)
}

/// A fresh uniform shuffle of the same shots. Training samples only.
pub fn shuffle_augment<R: Rng>(sample: &SequenceSample, rng: &mut R) -> Result<SequenceSample, DataError> {
    if sample.split != Split::Train {
        return Err(DataError::Contract(format!(
            "shuffle augmentation applied to a {} sample of {}",
            sample.split, sample.scene_id
        )));
    }
    Ok(SequenceSample {
        shuffle: uniform_shuffle(sample.k(), rng),
        ..sample.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::parse_boundaries;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scene() -> SceneRecord {
        parse_boundaries("0 10\n10 20\n20 30\n30 40\n40 50", "sc").unwrap()
    }

    #[test]
    fn windows_cycle() {
        let s = make_sequences(&scene(), 3, 7, 1, Split::Train).unwrap();
        let starts: Vec<u64> = s.iter().map(|x| x.shots[0].start).collect();
        assert_eq!(starts, [0, 10, 20, 0, 10, 20, 0]);
        assert_eq!(window_count(&scene(), 3), 3);
    }

    #[test]
    fn identity_shuffle_presents_in_order() {
        let sample = SequenceSample {
            scene_id: "x".into(),
            shots: scene().shots[..3].to_vec(),
            shuffle: Permutation::identity(3).unwrap(),
            split: Split::Train,
        };
        assert_eq!(sample.label().class_index(), 0);
        assert_eq!(sample.presented(), sample.shots);
    }

    #[test]
    fn restore_yields_temporal_order() {
        for sample in make_sequences(&scene(), 3, 50, 9, Split::Test).unwrap() {
            let restored = SequenceSample::restore(sample.label(), &sample.presented()).unwrap();
            assert_eq!(restored, sample.shots);
            assert!(restored.windows(2).all(|w| w[0].start < w[1].start));
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let a = make_sequences(&scene(), 3, 20, 5, Split::Train).unwrap();
        let b = make_sequences(&scene(), 3, 20, 5, Split::Train).unwrap();
        let c = make_sequences(&scene(), 3, 20, 6, Split::Train).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn too_few_shots() {
        assert!(matches!(
            make_sequences(&scene(), 6, 1, 0, Split::Train),
            Err(DataError::Unusable { .. })
        ));
    }

    #[test]
    fn augmentation_contract() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let train = make_sequences(&scene(), 3, 1, 0, Split::Train).unwrap().remove(0);
        let aug = shuffle_augment(&train, &mut rng).unwrap();
        assert_eq!(SequenceSample::restore(aug.label(), &aug.presented()).unwrap(), train.shots);
        let test = SequenceSample {
            split: Split::Test,
            ..train
        };
        assert!(matches!(shuffle_augment(&test, &mut rng), Err(DataError::Contract(_))));
    }
}
