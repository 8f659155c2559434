//! Per-shot category label vectors plus the scene's genre vector.

use serde::{Deserialize, Serialize};

use shotseq_core::CATEGORY_COUNT;

use crate::config::ModelConfig;
use crate::error::NnError;

const SUM_TOLERANCE: f64 = 1e-6;

/// Probability vectors for the four categories of one shot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotLabels {
    pub categories: [Vec<f64>; CATEGORY_COUNT],
}

impl ShotLabels {
    /// One-hot vectors for the given class indices.
    pub fn one_hot(
        classes: [usize; CATEGORY_COUNT],
        cardinalities: [usize; CATEGORY_COUNT],
    ) -> Self {
        ShotLabels {
            categories: std::array::from_fn(|c| {
                let mut v = vec![0.0; cardinalities[c]];
                v[classes[c]] = 1.0;
                v
            }),
        }
    }

    pub fn uniform(cardinalities: [usize; CATEGORY_COUNT]) -> Self {
        ShotLabels {
            categories: std::array::from_fn(|c| {
                vec![1.0 / cardinalities[c] as f64; cardinalities[c]]
            }),
        }
    }
}

/// Shots are stored in presentation (shuffled) order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CinematologyInput {
    shots: Vec<ShotLabels>,
    genre: Vec<f64>,
}

fn check_distribution(v: &[f64], what: &str) -> Result<(), NnError> {
    if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(NnError::Cinematology(format!(
            "{what} has a negative or non-finite entry"
        )));
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(NnError::Cinematology(format!(
            "{what} sums to {sum}, expected 1"
        )));
    }
    Ok(())
}

impl CinematologyInput {
    pub fn new(shots: Vec<ShotLabels>, genre: Vec<f64>) -> Result<Self, NnError> {
        for (s, shot) in shots.iter().enumerate() {
            for (c, v) in shot.categories.iter().enumerate() {
                check_distribution(v, &format!("shot {s} category {c}"))?;
            }
        }
        check_distribution(&genre, "genre vector")?;
        Ok(CinematologyInput { shots, genre })
    }

    /// All-zero vectors: no label or genre information at all.
    pub fn blank(config: &ModelConfig) -> Self {
        CinematologyInput {
            shots: (0..config.k)
                .map(|_| ShotLabels {
                    categories: std::array::from_fn(|c| {
                        vec![0.0; config.category_cardinalities[c]]
                    }),
                })
                .collect(),
            genre: vec![0.0; config.num_genres],
        }
    }

    pub fn shots(&self) -> &[ShotLabels] {
        &self.shots
    }

    pub fn genre(&self) -> &[f64] {
        &self.genre
    }

    pub fn check_against(&self, config: &ModelConfig) -> Result<(), NnError> {
        if self.shots.len() != config.k {
            return Err(NnError::Cinematology(format!(
                "{} shots, model expects k={}",
                self.shots.len(),
                config.k
            )));
        }
        for (s, shot) in self.shots.iter().enumerate() {
            for (c, v) in shot.categories.iter().enumerate() {
                if v.len() != config.category_cardinalities[c] {
                    return Err(NnError::Cinematology(format!(
                        "shot {s} category {c} has {} classes, model expects {}",
                        v.len(),
                        config.category_cardinalities[c]
                    )));
                }
            }
        }
        if self.genre.len() != config.num_genres {
            return Err(NnError::Cinematology(format!(
                "genre vector has {} entries, model expects {}",
                self.genre.len(),
                config.num_genres
            )));
        }
        Ok(())
    }

    /// Category `c` vectors of every shot in presentation order, followed by
    /// the genre vector.
    pub fn concatenated(&self, category: usize) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .shots
            .iter()
            .flat_map(|s| s.categories[category].iter().copied())
            .collect();
        out.extend_from_slice(&self.genre);
        out
    }
}
