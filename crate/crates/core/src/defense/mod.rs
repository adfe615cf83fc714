//! The masked-unlearning defense: natural scores, clean-node selection,
//! edge masks, the adversarial/natural/smooth losses, training, and
//! inference.

mod infer;
mod losses;
pub mod masks;
mod train;

pub use infer::{infer_made, infer_made_node, node_task_masks};
pub use losses::{loss_adv_value, loss_clean_value};
pub use masks::{compute_edge_masks, natural_scores, select_clean_nodes};
pub use train::{
    isolate_graph_dataset, train_made_graph, train_made_node, EpochLog, IsolationRun, LossWeights,
    MadeGraphOutcome, MadeNodeOutcome, TrainSchedule,
};
