use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::vocab::VOCAB_SIZE;

/// Shape of the decoder-only transformer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformerConfig {
    pub n_layers: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub context_len: usize,
    pub vocab_size: usize,
    pub seed: u64,
}

impl Default for TransformerConfig {
    /// Four pre-norm layers of width 128 with four heads and a 128-token window.
    fn default() -> Self {
        TransformerConfig {
            n_layers: 4,
            d_model: 128,
            n_heads: 4,
            context_len: 128,
            vocab_size: VOCAB_SIZE,
            seed: 0,
        }
    }
}

impl TransformerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0 || self.d_model == 0 || self.n_heads == 0 {
            return Err(Error::Config("n_layers, d_model and n_heads must be positive".into()));
        }
        if self.d_model % self.n_heads != 0 {
            return Err(Error::Config(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.context_len < 2 {
            return Err(Error::Config("context_len must be at least 2".into()));
        }
        if self.vocab_size != VOCAB_SIZE {
            return Err(Error::Config(format!(
                "vocab_size must be {VOCAB_SIZE} for the byte vocabulary"
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        TransformerConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_indivisible_heads_and_short_context() {
        let mut c = TransformerConfig {
            n_heads: 3,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        c.n_heads = 4;
        c.context_len = 1;
        assert!(c.validate().is_err());
    }
}
