//! Removal of mis-segmented and black transitional shots.

use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::scene::SceneRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleanConfig {
    /// Shorter shots are dropped. The default gives one frame per TSN segment.
    pub min_frames: u64,
    /// A shot is black when more than this fraction of its frames is dark.
    pub max_black_fraction: f64,
    /// Mean 8-bit luminance below which a frame counts as dark.
    pub black_luma: f64,
}

impl Default for CleanConfig {
    fn default() -> Self {
        CleanConfig {
            min_frames: 8,
            max_black_fraction: 0.5,
            black_luma: 16.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cleaned {
    pub scene: SceneRecord,
    pub dropped_short: usize,
    pub dropped_black: usize,
}

/// Drops short shots and, when per-frame mean luminance is supplied (one
/// vector per shot), mostly-black shots. Survivors keep their order.
pub fn clean_shots(
    scene: &SceneRecord,
    config: &CleanConfig,
    k: usize,
    frame_luma: Option<&[Vec<f64>]>,
) -> Result<Cleaned, DataError> {
    if let Some(l) = frame_luma {
        if l.len() != scene.shots.len() {
            return Err(DataError::Contract(format!(
                "{} luminance series for {} shots",
                l.len(),
                scene.shots.len()
            )));
        }
    }
    let mut kept = Vec::with_capacity(scene.shots.len());
    let (mut dropped_short, mut dropped_black) = (0, 0);
    for (i, shot) in scene.shots.iter().enumerate() {
        if shot.len() < config.min_frames {
            dropped_short += 1;
            continue;
        }
        if let Some(luma) = frame_luma.map(|l| &l[i]) {
            let dark = luma.iter().filter(|&&v| v < config.black_luma).count();
            if !luma.is_empty() && dark as f64 > config.max_black_fraction * luma.len() as f64 {
                dropped_black += 1;
                continue;
            }
        }
        kept.push(shot.clone());
    }
    if kept.len() < k {
        return Err(DataError::Unusable {
            scene_id: scene.scene_id.clone(),
            remaining: kept.len(),
            needed: k,
        });
    }
    Ok(Cleaned {
        scene: SceneRecord {
            shots: kept,
            ..scene.clone()
        },
        dropped_short,
        dropped_black,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::parse_boundaries;

    #[test]
    fn short_shot_dropped() {
        let scene = parse_boundaries("0 3\n3 40\n40 80\n80 100", "s").unwrap();
        let out = clean_shots(&scene, &CleanConfig::default(), 3, None).unwrap();
        assert_eq!(out.scene.shots.len(), 3);
        assert_eq!(out.scene.shots[0].start, 3);
        assert_eq!(out.dropped_short, 1);
    }

    #[test]
    fn valid_scene_unchanged() {
        let scene = parse_boundaries("0 8\n8 40\n40 80", "s").unwrap();
        let out = clean_shots(&scene, &CleanConfig::default(), 3, None).unwrap();
        assert_eq!(out.scene, scene);
    }

    #[test]
    fn unusable_below_k() {
        let scene = parse_boundaries("0 3\n3 40\n40 80", "s").unwrap();
        assert!(matches!(
            clean_shots(&scene, &CleanConfig::default(), 3, None),
            Err(DataError::Unusable { remaining: 2, needed: 3, .. })
        ));
    }

    #[test]
    fn black_shots_need_pixels() {
        let scene = parse_boundaries("0 10\n10 20\n20 30\n30 40", "s").unwrap();
        let mut luma = vec![vec![100.0; 10]; 4];
        luma[1] = vec![2.0; 10];
        luma[2][..5].fill(3.0);
        let out = clean_shots(&scene, &CleanConfig::default(), 3, Some(&luma)).unwrap();
        assert_eq!(out.dropped_black, 1);
        assert_eq!(out.scene.shots.iter().map(|s| s.start).collect::<Vec<_>>(), [0, 20, 30]);
        let out = clean_shots(&scene, &CleanConfig::default(), 3, None).unwrap();
        assert_eq!(out.scene, scene);
    }
}
