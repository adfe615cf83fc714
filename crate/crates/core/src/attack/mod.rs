//! Trigger generation, injection into graph/node datasets, and the
//! ground-truth poison ledger used only by evaluation.

mod inject;
mod trigger;

pub use inject::{
    apply_node_trigger_for_eval, apply_trigger_for_eval, attach_trigger, inject_graph_trigger,
    inject_node_trigger, poison_graph_dataset, PoisonRecord,
};
pub use trigger::{make_trigger, DatasetStats, FeatureMode, TriggerSpec};
