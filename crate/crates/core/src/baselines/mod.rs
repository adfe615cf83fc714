//! Comparison defenses sharing the evaluation harness with the masked
//! defense: vanilla training, edge dropout, finetuning on the isolated
//! clean subset, loss-isolation unlearning, and similarity-based edge
//! pruning.

mod abl;
mod prune;
mod vanilla;

pub use abl::{abl_defense, unlearn_whole_graphs, AblOutcome};
pub use prune::{prune_graph, similarity_prune};
pub use vanilla::{edge_dropout_train, finetune_defense, train_vanilla, train_vanilla_node};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Knobs of the baseline methods.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BaselineConfig {
    /// Edge-dropout probability.
    pub dropout_p: f64,
    /// Finetune epochs on the isolated clean subset.
    pub finetune_epochs: usize,
    /// Loss gate of the sign-based warm-up.
    pub abl_gamma: f64,
    /// Fraction of the train split unlearned.
    pub abl_isolation_rate: f64,
    pub abl_unlearn_epochs: usize,
    /// Similarity floor for edge pruning.
    pub prune_tau: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            dropout_p: 0.2,
            finetune_epochs: 20,
            abl_gamma: 0.5,
            abl_isolation_rate: 0.10,
            abl_unlearn_epochs: 2,
            prune_tau: 0.01,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.dropout_p) {
            return Err(Error::invalid("baseline_config", "dropout_p outside [0,1]"));
        }
        if !(0.0..=1.0).contains(&self.prune_tau) {
            return Err(Error::invalid("baseline_config", "prune_tau outside [0,1]"));
        }
        if self.abl_gamma <= 0.0 {
            return Err(Error::invalid("baseline_config", "abl_gamma must be > 0"));
        }
        Ok(())
    }
}
