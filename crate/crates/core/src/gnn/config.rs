//! Model architecture and defense hyperparameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    Gcn,
    Sage,
}

/// Shape of the model plus the two defense knobs that live with it: the
/// clean-node fraction `beta` and the smooth-loss weight `lambda`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelConfig {
    pub arch: Arch,
    pub feature_dim: usize,
    /// Output width of each message-passing layer; length = layer count K.
    pub hidden_dims: Vec<usize>,
    pub num_classes: usize,
    /// Fraction of nodes treated as clean per layer, rounded up.
    pub beta: f64,
    /// Smooth-loss weight.
    pub lambda: f64,
}

impl ModelConfig {
    /// 2-layer GCN, hidden 128, beta 0.9, lambda 5 — the reference setup.
    pub fn gcn_default(feature_dim: usize, num_classes: usize) -> Self {
        ModelConfig {
            arch: Arch::Gcn,
            feature_dim,
            hidden_dims: vec![128, 128],
            num_classes,
            beta: 0.9,
            lambda: 5.0,
        }
    }

    pub fn layers(&self) -> usize {
        self.hidden_dims.len()
    }

    /// Input width of layer `k`.
    pub fn in_dim(&self, k: usize) -> usize {
        if k == 0 {
            self.feature_dim
        } else {
            self.hidden_dims[k - 1]
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_dims.is_empty() {
            return Err(Error::invalid("model_config", "need at least one layer"));
        }
        if self.feature_dim == 0 || self.num_classes < 2 {
            return Err(Error::invalid(
                "model_config",
                "feature_dim must be positive and num_classes >= 2",
            ));
        }
        if !(0.0 < self.beta && self.beta <= 1.0) {
            return Err(Error::invalid("model_config", "beta must be in (0, 1]"));
        }
        if self.lambda < 0.0 {
            return Err(Error::invalid("model_config", "lambda must be >= 0"));
        }
        if self.hidden_dims.iter().any(|&d| d == 0) {
            return Err(Error::invalid("model_config", "zero-width layer"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        let c = ModelConfig::gcn_default(8, 2);
        c.validate().unwrap();
        assert_eq!(c.layers(), 2);
        assert_eq!(c.in_dim(0), 8);
        assert_eq!(c.in_dim(1), 128);
    }

    #[test]
    fn bad_beta_rejected() {
        let mut c = ModelConfig::gcn_default(8, 2);
        c.beta = 0.0;
        assert!(c.validate().is_err());
        c.beta = 1.5;
        assert!(c.validate().is_err());
    }
}
