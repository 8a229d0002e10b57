use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Missing fields in a serialized config take their default values.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub vocab_size: usize,
    /// Number of transformer blocks, and of exits (M).
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub num_heads: usize,
    pub ffn_dim: usize,
    pub num_classes: usize,
    pub max_seq_len: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            vocab_size: 128,
            num_layers: 6,
            hidden_dim: 32,
            num_heads: 2,
            ffn_dim: 64,
            num_classes: 4,
            max_seq_len: 32,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_layers < 2 {
            return Err(Error::config("a multi-exit model needs at least 2 layers"));
        }
        if self.num_classes < 2 {
            return Err(Error::config("at least 2 classes are required"));
        }
        if self.num_heads == 0 || self.hidden_dim == 0 || !self.hidden_dim.is_multiple_of(self.num_heads) {
            return Err(Error::config(format!(
                "hidden_dim {} not divisible by num_heads {}",
                self.hidden_dim, self.num_heads
            )));
        }
        if self.vocab_size < 2 || self.ffn_dim == 0 || self.max_seq_len == 0 {
            return Err(Error::config("vocab_size, ffn_dim and max_seq_len must be positive"));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_dim / self.num_heads
    }
}

/// How exits are weighted in the joint loss.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightScheme {
    /// Exit `m` weighs `m`, its cost in blocks.
    #[default]
    LinearCost,
    Uniform,
}

impl WeightScheme {
    /// Weights of exits `1..=m`.
    pub fn weights<T: Scalar>(self, m: usize) -> Vec<T> {
        (1..=m)
            .map(|layer| match self {
                WeightScheme::LinearCost => T::of_usize(layer),
                WeightScheme::Uniform => T::one(),
            })
            .collect()
    }
}

/// Momentum SGD settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub weight_scheme: WeightScheme,
    pub momentum: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 16,
            learning_rate: 0.02,
            epochs: 12,
            weight_scheme: WeightScheme::LinearCost,
            momentum: 0.9,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate.is_nan() || self.learning_rate < 0.0 {
            return Err(Error::config("learning_rate must be non-negative"));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::config("epochs and batch_size must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("momentum must lie in [0, 1)"));
        }
        Ok(())
    }
}
