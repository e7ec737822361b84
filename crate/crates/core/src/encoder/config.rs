use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Encoder hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub num_layers: usize,
    pub num_heads: usize,
    pub model_dim: usize,
    pub ffn_dim: usize,
    /// Applied only in training mode.
    pub dropout_rate: f64,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            num_layers: 8,
            num_heads: 8,
            model_dim: 256,
            ffn_dim: 1024,
            dropout_rate: 0.1,
            seed: 0,
        }
    }
}

impl EncoderConfig {
    pub fn head_dim(&self) -> usize {
        self.model_dim / self.num_heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_heads == 0 || self.model_dim == 0 || self.ffn_dim == 0 {
            return Err(Error::Validation(format!(
                "encoder dimensions must be positive: heads={} model_dim={} ffn_dim={}",
                self.num_heads, self.model_dim, self.ffn_dim
            )));
        }
        if self.model_dim % self.num_heads != 0 {
            return Err(Error::Validation(format!(
                "model_dim {} is not divisible by num_heads {}",
                self.model_dim, self.num_heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Validation(format!(
                "dropout_rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}
