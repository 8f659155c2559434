//! Run configuration: a TOML file, then command-line overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};

use shotseq_core::LossConfig;
use shotseq_data::split::DEFAULT_RATIOS;
use shotseq_data::GenreMode;
use shotseq_nn::{ModelConfig, SgdConfig};

use crate::error::{io_err, CliError, Result};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SHOTSEQ_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Drives parameter init, batch order, augmentation and frame sampling.
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Fresh uniform shuffles of training samples every epoch.
    pub augment: bool,
    /// `k` for the top-k accuracy in reports.
    pub top_k: usize,
    pub genre_mode: GenreMode,
    pub offset_trainable: bool,
    pub ratios: [f64; 3],
    pub model: ModelConfig,
    pub loss: LossConfig,
    pub sgd: SgdConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            epochs: 30,
            batch_size: 16,
            augment: true,
            top_k: 3,
            genre_mode: GenreMode::MultiHot,
            offset_trainable: true,
            ratios: DEFAULT_RATIOS,
            model: ModelConfig::default(),
            loss: LossConfig::default(),
            sgd: SgdConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::from_toml(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    /// The model is seeded from the run seed so one number reproduces a run.
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            seed: self.seed,
            ..self.model.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(CliError::Usage("batch_size must be positive".into()));
        }
        let classes = shotseq_core::factorial(self.model.k);
        if self.top_k == 0 || self.top_k > classes {
            return Err(CliError::Usage(format!("top_k must lie in 1..={classes}")));
        }
        for (name, v) in [
            ("sgd.lr", self.sgd.lr),
            ("sgd.momentum", self.sgd.momentum),
            ("sgd.weight_decay", self.sgd.weight_decay),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(CliError::Usage(format!("{name} must be finite and >= 0")));
            }
        }
        self.model_config().validate()?;
        self.loss.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_overrides_defaults() {
        let c = RunConfig::from_toml(
            r#"
            seed = 7
            epochs = 2
            [model]
            embed_dim = 32
            num_heads = 2
            [loss]
            mode = "soft"
            alpha = 0.5
            [sgd]
            lr = 0.1
            "#,
        )
        .unwrap();
        assert_eq!((c.seed, c.epochs, c.batch_size), (7, 2, 16));
        assert_eq!(c.model.embed_dim, 32);
        assert_eq!(c.model.num_layers, 2);
        assert_eq!(c.loss.alpha, 0.5);
        assert_eq!(c.sgd.momentum, 0.5);
        assert_eq!(c.model_config().seed, 7);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(RunConfig::from_toml("epoch = 3").is_err());
        let c = RunConfig {
            batch_size: 0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = RunConfig {
            top_k: 7,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}
