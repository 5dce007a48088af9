use serde::{Deserialize, Serialize};

use crate::landmark::FEATURE_DIM;

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub dropout: f64,
    pub n_classes: usize,
    pub max_frames: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::small(2)
    }
}

impl ModelConfig {
    /// Three layers, eight heads, width 224.
    pub fn small(n_classes: usize) -> Self {
        ModelConfig {
            input_dim: FEATURE_DIM,
            d_model: 224,
            n_layers: 3,
            n_heads: 8,
            d_ff: 4 * 224,
            dropout: 0.1,
            n_classes,
            max_frames: 247,
        }
    }

    /// Four layers, for large vocabularies.
    pub fn large(n_classes: usize) -> Self {
        ModelConfig {
            n_layers: 4,
            ..ModelConfig::small(n_classes)
        }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidConfig(m));
        if self.input_dim == 0 || self.d_model == 0 || self.n_layers == 0 || self.d_ff == 0 {
            return bad("dimensions and layer count must be positive".into());
        }
        if self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return bad(format!("d_model {} is not divisible by {} heads", self.d_model, self.n_heads));
        }
        if !self.d_model.is_multiple_of(2) {
            return bad(format!("d_model {} must be even for sinusoidal encoding", self.d_model));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.n_classes == 0 || self.max_frames == 0 {
            return bad("n_classes and max_frames must be positive".into());
        }
        Ok(())
    }
}
