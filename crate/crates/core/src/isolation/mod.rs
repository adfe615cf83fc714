//! Data isolation: homophily scoring, deviant-range selection, warm-up
//! training, and loss-ranked subset formation, plus isolation quality
//! metrics against a ground-truth ledger.

mod homophily;
mod subsets;
mod warmup;

pub use homophily::{deviant_range_select, graph_homophily, node_homophily, HomophilyStats};
pub use subsets::{
    form_subsets, isolation_precision_recall, precision_recall_of, IsolationResult,
    PrecisionRecall,
};
pub use warmup::{warmup_train_graph, warmup_train_node, NodeWarmup};
