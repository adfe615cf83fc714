//! Experiment configuration: JSON schema, defaults, and validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attack::FeatureMode;
use crate::baselines::BaselineConfig;
use crate::data::{
    generate_graph_corpus, generate_synthetic_node_graph, parse_node_dataset, parse_tu_dataset,
    GraphCorpusSpec, GraphDataset, NodeDataset,
};
use crate::defense::TrainSchedule;
use crate::error::{Error, Result};
use crate::gnn::Arch;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Graph,
    Node,
}

/// Where the data comes from.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetConfig {
    /// TUDataset-format text files in `dir`.
    Tu { dir: PathBuf, name: String },
    /// Built-in molecule-style corpus generator.
    SyntheticGraphs {
        /// `aids_like` or `proteins_like`.
        preset: String,
        #[serde(default)]
        num_graphs: Option<usize>,
        #[serde(default = "default_generation_seed")]
        generation_seed: u64,
    },
    /// Edge list + feature CSV + label CSV.
    NodeFiles {
        edges: PathBuf,
        features: PathBuf,
        labels: PathBuf,
    },
    /// Stochastic block model for the node task.
    SyntheticSbm {
        n: usize,
        num_classes: usize,
        intra_p: f64,
        inter_p: f64,
        feature_dim: usize,
        noise: f64,
        #[serde(default = "default_generation_seed")]
        generation_seed: u64,
    },
}

fn default_generation_seed() -> u64 {
    0xDA7A
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackConfig {
    pub trigger_size: usize,
    pub edge_density: f64,
    pub feature_mode: FeatureMode,
    pub attach_count: usize,
    pub target_label: usize,
    /// Graph task: fraction of train graphs poisoned.
    pub injection_rate: f64,
    /// Node task: number of train nodes poisoned.
    pub victim_count: usize,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            trigger_size: 4,
            edge_density: 0.8,
            feature_mode: FeatureMode::Random,
            attach_count: 1,
            target_label: 0,
            injection_rate: 0.10,
            victim_count: 40,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefenseMethod {
    Vanilla,
    Made,
    EdgeDropout,
    Finetune,
    Abl,
    Jaccard,
}

impl DefenseMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            DefenseMethod::Vanilla => "vanilla",
            DefenseMethod::Made => "made",
            DefenseMethod::EdgeDropout => "edge_dropout",
            DefenseMethod::Finetune => "finetune",
            DefenseMethod::Abl => "abl",
            DefenseMethod::Jaccard => "jaccard",
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct IsolationConfig {
    /// Suspect-set fraction.
    pub alpha1: f64,
    /// Clean-set fraction.
    pub alpha2: f64,
}

impl Default for IsolationConfig {
    fn default() -> Self {
        IsolationConfig {
            alpha1: 0.10,
            alpha2: 0.50,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSpec {
    pub arch: Arch,
    pub hidden_dims: Vec<usize>,
    pub beta: f64,
    pub lambda: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            arch: Arch::Gcn,
            hidden_dims: vec![128, 128],
            beta: 0.9,
            lambda: 5.0,
        }
    }
}

/// The whole experiment definition; JSON on disk.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: Task,
    pub dataset: DatasetConfig,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub val_fraction: f64,
    #[serde(default)]
    pub attack: AttackConfig,
    pub defense: DefenseMethod,
    #[serde(default)]
    pub baseline: BaselineConfig,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub schedule: TrainSchedule,
    #[serde(default)]
    pub isolation: IsolationConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
}

fn default_train_fraction() -> f64 {
    0.8
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2, 3, 4]
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|_| Error::MissingFile(path.as_ref().display().to_string()))?;
        let cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must be nonempty".into()));
        }
        if !(0.0 < self.train_fraction && self.train_fraction < 1.0) {
            return Err(Error::Config("train_fraction outside (0, 1)".into()));
        }
        self.baseline.validate().map_err(|e| Error::Config(e.to_string()))?;
        let exists = |p: &Path, what: &str| -> Result<()> {
            if p.exists() {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} path does not exist: {}", p.display())))
            }
        };
        match &self.dataset {
            DatasetConfig::Tu { dir, .. } => exists(dir, "dataset dir")?,
            DatasetConfig::NodeFiles {
                edges,
                features,
                labels,
            } => {
                exists(edges, "edge list")?;
                exists(features, "feature csv")?;
                exists(labels, "label csv")?;
            }
            DatasetConfig::SyntheticGraphs { preset, .. } => {
                if preset != "aids_like" && preset != "proteins_like" {
                    return Err(Error::Config(format!("unknown preset '{preset}'")));
                }
            }
            DatasetConfig::SyntheticSbm { .. } => {}
        }
        match self.task {
            Task::Graph => match &self.dataset {
                DatasetConfig::Tu { .. } | DatasetConfig::SyntheticGraphs { .. } => {}
                _ => return Err(Error::Config("graph task needs a graph dataset".into())),
            },
            Task::Node => {
                match &self.dataset {
                    DatasetConfig::NodeFiles { .. } | DatasetConfig::SyntheticSbm { .. } => {}
                    _ => return Err(Error::Config("node task needs a node dataset".into())),
                }
                if !matches!(self.defense, DefenseMethod::Vanilla | DefenseMethod::Made) {
                    return Err(Error::Config(
                        "node task supports only the vanilla and made defenses".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Loads or generates the graph corpus (splits unassigned).
    pub fn build_graph_dataset(&self) -> Result<GraphDataset> {
        match &self.dataset {
            DatasetConfig::Tu { dir, name } => parse_tu_dataset(dir, name),
            DatasetConfig::SyntheticGraphs {
                preset,
                num_graphs,
                generation_seed,
            } => {
                let mut spec = if preset == "aids_like" {
                    GraphCorpusSpec::aids_like()
                } else {
                    GraphCorpusSpec::proteins_like()
                };
                if let Some(n) = num_graphs {
                    spec.num_graphs = *n;
                }
                generate_graph_corpus(&spec, *generation_seed)
            }
            _ => Err(Error::Config("not a graph dataset".into())),
        }
    }

    /// Loads or generates the node dataset (splits unassigned).
    pub fn build_node_dataset(&self) -> Result<NodeDataset> {
        match &self.dataset {
            DatasetConfig::NodeFiles {
                edges,
                features,
                labels,
            } => parse_node_dataset(edges, features, labels),
            DatasetConfig::SyntheticSbm {
                n,
                num_classes,
                intra_p,
                inter_p,
                feature_dim,
                noise,
                generation_seed,
            } => generate_synthetic_node_graph(
                *n,
                *num_classes,
                *intra_p,
                *inter_p,
                *feature_dim,
                *noise,
                *generation_seed,
            ),
            _ => Err(Error::Config("not a node dataset".into())),
        }
    }
}
