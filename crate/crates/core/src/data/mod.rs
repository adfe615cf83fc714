//! Graph and dataset representations plus ingestion and generation.

mod graph;
mod node_files;
mod split;
mod synth;
mod tu;

pub use graph::{FeatureProvenance, Graph, GraphDataset, NodeDataset};
pub use node_files::parse_node_dataset;
pub use split::{split_dataset, split_node_dataset, SplitReport};
pub use synth::{
    generate_graph_corpus, generate_synthetic_node_graph, GraphCorpusSpec,
};
pub use tu::{parse_tu_dataset, serialize_tu_dataset};
