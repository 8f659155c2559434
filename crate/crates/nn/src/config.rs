use serde::{Deserialize, Serialize};

use shotseq_core::{factorial, CATEGORY_COUNT, DEFAULT_CARDINALITIES};

use crate::error::NnError;

/// Architecture and input geometry. The defaults are the desk-scale model:
/// 32x32 grayscale frames, 8x8 patches, width 64, 2 layers of 4 heads.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Shots per sequence.
    pub k: usize,
    pub segments_per_shot: usize,
    pub frame_height: usize,
    pub frame_width: usize,
    pub channels: usize,
    pub patch_size: usize,
    pub embed_dim: usize,
    pub num_heads: usize,
    pub num_layers: usize,
    pub mlp_ratio: usize,
    /// Shot size, angle, motion and type class counts.
    pub category_cardinalities: [usize; CATEGORY_COUNT],
    pub num_genres: usize,
    pub use_cinematology: bool,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            k: 3,
            segments_per_shot: 8,
            frame_height: 32,
            frame_width: 32,
            channels: 1,
            patch_size: 8,
            embed_dim: 64,
            num_heads: 4,
            num_layers: 2,
            mlp_ratio: 2,
            category_cardinalities: DEFAULT_CARDINALITIES,
            num_genres: 10,
            use_cinematology: true,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        let fail = |msg: String| Err(NnError::Config(msg));
        if !(2..=6).contains(&self.k) {
            return fail(format!("k must be in 2..=6, got {}", self.k));
        }
        for (name, v) in [
            ("segments_per_shot", self.segments_per_shot),
            ("frame_height", self.frame_height),
            ("frame_width", self.frame_width),
            ("channels", self.channels),
            ("patch_size", self.patch_size),
            ("embed_dim", self.embed_dim),
            ("num_heads", self.num_heads),
            ("num_layers", self.num_layers),
            ("mlp_ratio", self.mlp_ratio),
            ("num_genres", self.num_genres),
        ] {
            if v == 0 {
                return fail(format!("{name} must be positive"));
            }
        }
        if !self.frame_height.is_multiple_of(self.patch_size) || !self.frame_width.is_multiple_of(self.patch_size) {
            return fail(format!(
                "patch_size {} must divide the {}x{} frame",
                self.patch_size, self.frame_height, self.frame_width
            ));
        }
        if !self.embed_dim.is_multiple_of(self.num_heads) {
            return fail(format!(
                "embed_dim {} is not divisible by num_heads {}",
                self.embed_dim, self.num_heads
            ));
        }
        if self.category_cardinalities.contains(&0) {
            return fail("category cardinalities must all be >= 1".into());
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        factorial(self.k)
    }

    pub fn patches_per_frame(&self) -> usize {
        (self.frame_height / self.patch_size) * (self.frame_width / self.patch_size)
    }

    pub fn patch_dim(&self) -> usize {
        self.patch_size * self.patch_size * self.channels
    }

    pub fn frame_len(&self) -> usize {
        self.frame_height * self.frame_width * self.channels
    }

    /// Scalars in one `k x segments x H x W x C` frame stack.
    pub fn input_len(&self) -> usize {
        self.k * self.segments_per_shot * self.frame_len()
    }

    pub fn visual_tokens(&self) -> usize {
        self.k * self.segments_per_shot * self.patches_per_frame()
    }

    /// Class token plus visual tokens plus, when enabled, one token per category.
    pub fn sequence_len(&self) -> usize {
        1 + self.visual_tokens()
            + if self.use_cinematology {
                CATEGORY_COUNT
            } else {
                0
            }
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.num_heads
    }

    /// Width of the concatenated input to one category's projection.
    pub fn cinematology_width(&self, category: usize) -> usize {
        self.k * self.category_cardinalities[category] + self.num_genres
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_geometry() {
        let c = ModelConfig::default();
        c.validate().unwrap();
        assert_eq!(c.patches_per_frame(), 16);
        assert_eq!(1 + c.visual_tokens(), 385);
        assert_eq!(c.sequence_len(), 389);
        assert_eq!(c.num_classes(), 6);
        assert_eq!(c.cinematology_width(0), 3 * 5 + 10);
    }

    #[test]
    fn rejects_bad_geometry() {
        let mut c = ModelConfig {
            patch_size: 7,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        c.patch_size = 8;
        c.num_heads = 5;
        assert!(c.validate().is_err());
        c.num_heads = 4;
        c.category_cardinalities[2] = 0;
        assert!(c.validate().is_err());
    }
}
