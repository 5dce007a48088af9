//! The TOML document driving `slr train`.
//!
//! ```toml
//! seed = 7
//!
//! [paths]
//! manifest = "data/split.csv"
//! encoded_dir = "enc"
//! output_dir = "run"
//!
//! [model]
//! d_model = 64
//! ```
//!
//! Relative paths are taken from the directory holding the config file;
//! the echoed config written next to the checkpoint carries absolute paths.
//! `seed` drives both the split (when the manifest has none) and training.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use slr_core::model::ModelConfig;
use slr_core::training::TrainConfig;
use slr_core::{EncodingConfig, SplitSpec};

use crate::error::CliError;
use crate::fsio::resolve;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub manifest: PathBuf,
    /// Directory written by `slr encode`. When absent, clips are encoded on
    /// the fly with the `[encoding]` section.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encoded_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub paths: Paths,
    #[serde(default)]
    pub encoding: EncodingConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub split: SplitSpec,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("run config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let mut cfg = Self::parse(&crate::fsio::read_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        // absolute, so the echoed config stays valid wherever it is read from
        let fix = |p: &Path| std::path::absolute(resolve(base, p)).map_err(CliError::io(p));
        cfg.paths.manifest = fix(&cfg.paths.manifest)?;
        cfg.paths.output_dir = fix(&cfg.paths.output_dir)?;
        cfg.paths.encoded_dir = cfg.paths.encoded_dir.as_deref().map(fix).transpose()?;
        Ok(cfg)
    }

    /// Fills in values derived at run time so the echo is complete.
    pub fn materialize(&mut self, n_classes: usize) {
        self.model.n_classes = n_classes;
        self.train.seed = self.seed;
        self.train.lr_patience = Some(self.train.effective_lr_patience());
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = RunConfig::parse("[paths]\nmanifest = \"m.csv\"\noutput_dir = \"out\"\n").unwrap();
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.train, TrainConfig::default());
        assert_eq!(cfg.encoding, EncodingConfig::default());
        assert!(cfg.paths.encoded_dir.is_none());
    }

    #[test]
    fn unknown_keys_rejected() {
        let base = "[paths]\nmanifest = \"m.csv\"\noutput_dir = \"out\"\n";
        assert!(RunConfig::parse(&format!("bogus = 1\n{base}")).is_err());
        assert!(RunConfig::parse(&format!("{base}[model]\nwidth = 3\n")).is_err());
        assert!(RunConfig::parse(&format!("{base}[train]\nlearning_rte = 0.1\n")).is_err());
    }

    #[test]
    fn echo_round_trips() {
        let mut cfg = RunConfig::parse(
            "seed = 4\n[paths]\nmanifest = \"m.csv\"\nencoded_dir = \"e\"\noutput_dir = \"out\"\n[encoding]\nmode = \"rqe-sf\"\n",
        )
        .unwrap();
        cfg.materialize(5);
        let echo = cfg.to_toml();
        assert!(echo.contains("lr_patience = 7"));
        assert_eq!(RunConfig::parse(&echo).unwrap(), cfg);
    }
}
