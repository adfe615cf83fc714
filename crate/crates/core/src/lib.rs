//! A self-contained laboratory for graph backdoor attacks and masked-unlearning
//! defenses.
//!
//! The crate is organized around the stages of a poisoning experiment:
//!
//! - [`tensor`] — dense f64 tensors with reverse-mode autodiff and Adam,
//!   sized for training small GNNs on the CPU.
//! - [`data`] — graph/node dataset types, TUDataset-format ingestion,
//!   splitting, and synthetic corpus generators.
//! - [`attack`] — subgraph trigger generation and injection with
//!   ground-truth poison ledgers.
//! - [`gnn`] — GCN and GraphSAGE layers with mask-weighted aggregation,
//!   projection heads, and readout.
//! - [`isolation`] — homophily- and loss-based splitting of a poisoned
//!   training set into suspect and clean subsets.
//! - [`defense`] — masked training with adversarial unlearning and the
//!   matching inference path.
//! - [`baselines`] — vanilla training, edge dropout, finetuning,
//!   loss-isolation unlearning, and similarity-based edge pruning.
//! - [`experiment`] — configuration-driven orchestration, metrics, and
//!   diagnostics persisted as JSON/CSV artifacts.
//!
//! All randomized entry points take an explicit seed and are deterministic
//! under it.

pub mod attack;
pub mod baselines;
pub mod data;
pub mod defense;
pub mod error;
pub mod experiment;
pub mod gnn;
pub mod isolation;
pub mod rng;
pub mod tensor;

pub use error::Error;
