//! Model parameters: construction, initialization, and JSON checkpoints.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{Arch, ModelConfig};
use crate::error::{Error, Result};
use crate::rng::{rng, Stream};
use crate::tensor::Param;

/// A GNN: per-layer weights and biases, per-layer projection heads, and the
/// classifier. All parameters are trainable.
#[derive(Clone, Debug)]
pub struct GnnModel {
    pub config: ModelConfig,
    pub params: Vec<Param>,
}

/// Flat checkpoint format: shape headers plus float arrays, no binary.
#[derive(Serialize, Deserialize)]
struct Checkpoint {
    config: ModelConfig,
    params: Vec<Param>,
}

fn glorot(name: &str, rows: usize, cols: usize, r: &mut rand_chacha::ChaCha8Rng) -> Param {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let values: Vec<f64> = (0..rows * cols).map(|_| r.gen_range(-limit..limit)).collect();
    Param::new(name, vec![rows, cols], values)
}

impl GnnModel {
    /// Glorot-uniform weights, zero biases, deterministic under the seed.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut r = rng(seed, Stream::Init);
        let mut params = Vec::new();
        for k in 0..config.layers() {
            let din = config.in_dim(k);
            let dout = config.hidden_dims[k];
            match config.arch {
                Arch::Gcn => {
                    params.push(glorot(&format!("w{k}"), din, dout, &mut r));
                }
                Arch::Sage => {
                    params.push(glorot(&format!("w_self{k}"), din, dout, &mut r));
                    params.push(glorot(&format!("w_neigh{k}"), din, dout, &mut r));
                }
            }
            params.push(Param::zeros(format!("b{k}"), vec![dout]));
            // projection head: linear, no bias, d_in -> d_out of the layer
            params.push(glorot(&format!("head{k}"), din, dout, &mut r));
        }
        let last = *config.hidden_dims.last().unwrap();
        params.push(glorot("wc", last, config.num_classes, &mut r));
        params.push(Param::zeros("bc", vec![config.num_classes]));
        Ok(GnnModel { config, params })
    }

    pub fn index_of(&self, name: &str) -> usize {
        self.params
            .iter()
            .position(|p| p.name == name)
            .unwrap_or_else(|| panic!("no parameter named {name}"))
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.zero_grad();
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let ck = Checkpoint {
            config: self.config.clone(),
            params: self.params.clone(),
        };
        let text = serde_json::to_string_pretty(&ck)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let ck: Checkpoint = serde_json::from_str(&text)?;
        let mut params = ck.params;
        for p in &mut params {
            if p.values.len() != p.shape.iter().product::<usize>() {
                return Err(Error::invalid("checkpoint", "shape/value mismatch"));
            }
            p.grad = vec![0.0; p.values.len()];
        }
        Ok(GnnModel {
            config: ck.config,
            params,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_seed_deterministic_and_complete() {
        let cfg = ModelConfig {
            arch: Arch::Gcn,
            feature_dim: 5,
            hidden_dims: vec![8, 8],
            num_classes: 3,
            beta: 0.9,
            lambda: 5.0,
        };
        let a = GnnModel::init(cfg.clone(), 4).unwrap();
        let b = GnnModel::init(cfg, 4).unwrap();
        assert_eq!(a.params.len(), b.params.len());
        for (x, y) in a.params.iter().zip(&b.params) {
            assert_eq!(x.values, y.values);
        }
        // w0, b0, head0, w1, b1, head1, wc, bc
        assert_eq!(a.params.len(), 8);
        assert_eq!(a.params[a.index_of("w0")].shape, vec![5, 8]);
        assert_eq!(a.params[a.index_of("head1")].shape, vec![8, 8]);
        assert_eq!(a.params[a.index_of("wc")].shape, vec![8, 3]);
    }

    #[test]
    fn checkpoint_roundtrip_is_exact() {
        let cfg = ModelConfig {
            arch: Arch::Sage,
            feature_dim: 4,
            hidden_dims: vec![6],
            num_classes: 2,
            beta: 0.8,
            lambda: 1.0,
        };
        let model = GnnModel::init(cfg, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        model.save(&path).unwrap();
        let loaded = GnnModel::load(&path).unwrap();
        for (a, b) in model.params.iter().zip(&loaded.params) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.values, b.values);
            assert_eq!(b.grad.len(), b.values.len());
        }
    }
}
