//! Trigger injection into training samples and evaluation copies.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::trigger::TriggerSpec;
use crate::data::{Graph, GraphDataset, NodeDataset};
use crate::error::{Error, Result};
use crate::rng::{rng_indexed, shuffle, Stream};

/// Ground truth about which samples were poisoned. Consumed only by
/// evaluation; defenses never see it.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct PoisonRecord {
    /// Sample ids (graph ids, or victim node ids for the node task),
    /// ascending.
    pub poisoned_ids: Vec<usize>,
    /// For each poisoned id: the node indices the injection appended.
    pub injected_nodes: Vec<(usize, Vec<usize>)>,
    /// Labels before flipping, parallel to `poisoned_ids`.
    pub original_labels: Vec<usize>,
    /// Fraction of the training set that was poisoned.
    pub injection_rate: f64,
}

impl PoisonRecord {
    pub fn is_poisoned(&self, id: usize) -> bool {
        self.poisoned_ids.binary_search(&id).is_ok()
    }

    pub fn injected_of(&self, id: usize) -> Option<&[usize]> {
        self.injected_nodes
            .iter()
            .find(|(i, _)| *i == id)
            .map(|(_, v)| v.as_slice())
    }
}

/// Appends the trigger subgraph to `graph` and wires `attach_count` distinct
/// host nodes to uniformly chosen trigger nodes. Labels are untouched.
/// Returns the indices of the appended nodes.
pub fn attach_trigger(graph: &Graph, spec: &TriggerSpec, r: &mut ChaCha8Rng) -> (Graph, Vec<usize>) {
    let n = graph.n;
    let t = spec.trigger_size;
    let mut out = Graph::new(graph.id, n + t, graph.feature_dim, graph.label);
    out.edges = graph.edges.clone();
    out.features[..graph.features.len()].copy_from_slice(&graph.features);
    for i in 0..t {
        out.set_feature_row(n + i, spec.feature_row(i));
    }
    for &(i, j) in &spec.trigger_edges {
        out.add_edge(n + i, n + j).expect("trigger edge in range");
    }
    // attach_count is clipped to the host size; every host node is distinct.
    let attach = spec.attach_count.min(n);
    let mut hosts: Vec<usize> = (0..n).collect();
    shuffle(&mut hosts, r);
    for &host in hosts.iter().take(attach) {
        let trigger_node = n + r.gen_range(0..t);
        let _ = out.add_edge(host, trigger_node).expect("attach edge in range");
    }
    out.sort_edges();
    let injected: Vec<usize> = (n..n + t).collect();
    (out, injected)
}

/// Poisons a single graph: trigger attached and label flipped to the target.
pub fn inject_graph_trigger(
    graph: &Graph,
    spec: &TriggerSpec,
    r: &mut ChaCha8Rng,
) -> (Graph, Vec<usize>) {
    let (mut g, injected) = attach_trigger(graph, spec, r);
    g.label = spec.target_label;
    (g, injected)
}

/// Poisons `round(rate * |train|)` training graphs chosen uniformly among
/// those not already labeled with the target. The test split is untouched.
pub fn poison_graph_dataset(
    ds: &GraphDataset,
    spec: &TriggerSpec,
    injection_rate: f64,
    seed: u64,
) -> Result<(GraphDataset, PoisonRecord)> {
    if !(0.0 < injection_rate && injection_rate < 1.0) {
        return Err(Error::invalid(
            "poison_graph_dataset",
            format!("injection rate {injection_rate} outside (0, 1)"),
        ));
    }
    let want = (injection_rate * ds.train_idx.len() as f64).round() as usize;
    let mut candidates: Vec<usize> = ds
        .train_idx
        .iter()
        .copied()
        .filter(|&i| ds.graphs[i].label != spec.target_label)
        .collect();
    if candidates.len() < want {
        return Err(Error::invalid(
            "poison_graph_dataset",
            format!(
                "need {want} non-target train graphs, have {}",
                candidates.len()
            ),
        ));
    }
    let mut select_rng = rng_indexed(seed, Stream::PoisonSelect, 0);
    shuffle(&mut candidates, &mut select_rng);
    let mut chosen: Vec<usize> = candidates[..want].to_vec();
    chosen.sort_unstable();

    let mut poisoned = ds.clone();
    let mut record = PoisonRecord {
        injection_rate,
        ..Default::default()
    };
    for &idx in &chosen {
        let mut attach_rng = rng_indexed(seed, Stream::Attach, idx as u64);
        let original = poisoned.graphs[idx].label;
        let (g, injected) = inject_graph_trigger(&poisoned.graphs[idx], spec, &mut attach_rng);
        poisoned.graphs[idx] = g;
        record.poisoned_ids.push(idx);
        record.injected_nodes.push((idx, injected));
        record.original_labels.push(original);
    }
    Ok((poisoned, record))
}

/// Attaches an independent trigger copy to a clean evaluation sample without
/// flipping its label; metrics compare the prediction to the target label.
pub fn apply_trigger_for_eval(
    graph: &Graph,
    spec: &TriggerSpec,
    seed: u64,
    copy_index: u64,
) -> (Graph, Vec<usize>) {
    let mut r = rng_indexed(seed, Stream::Eval, copy_index);
    attach_trigger(graph, spec, &mut r)
}

/// Poisons `victim_count` training nodes: each victim gets a private trigger
/// copy wired to it and its label flipped to the target. Appended trigger
/// nodes are labeled with the target and belong to no split.
pub fn inject_node_trigger(
    ds: &NodeDataset,
    spec: &TriggerSpec,
    victim_count: usize,
    seed: u64,
) -> Result<(NodeDataset, PoisonRecord)> {
    let mut candidates: Vec<usize> = ds
        .train_idx
        .iter()
        .copied()
        .filter(|&v| ds.labels[v] != spec.target_label)
        .collect();
    if candidates.len() < victim_count {
        return Err(Error::invalid(
            "inject_node_trigger",
            format!("need {victim_count} non-target train nodes, have {}", candidates.len()),
        ));
    }
    let mut select_rng = rng_indexed(seed, Stream::PoisonSelect, 1);
    shuffle(&mut candidates, &mut select_rng);
    let mut victims: Vec<usize> = candidates[..victim_count].to_vec();
    victims.sort_unstable();

    let mut out = ds.clone();
    let mut record = PoisonRecord {
        injection_rate: if ds.train_idx.is_empty() {
            0.0
        } else {
            victim_count as f64 / ds.train_idx.len() as f64
        },
        ..Default::default()
    };
    for &victim in &victims {
        let mut r = rng_indexed(seed, Stream::Attach, victim as u64);
        let injected = attach_node_trigger(&mut out, victim, spec, &mut r);
        let original = out.labels[victim];
        out.labels[victim] = spec.target_label;
        record.poisoned_ids.push(victim);
        record.injected_nodes.push((victim, injected));
        record.original_labels.push(original);
    }
    out.validate()?;
    Ok((out, record))
}

/// Trigger copy for one evaluation node; the node's label is untouched.
pub fn apply_node_trigger_for_eval(
    ds: &NodeDataset,
    node: usize,
    spec: &TriggerSpec,
    seed: u64,
) -> (NodeDataset, Vec<usize>) {
    let mut out = ds.clone();
    let mut r = rng_indexed(seed, Stream::Eval, node as u64);
    let injected = attach_node_trigger(&mut out, node, spec, &mut r);
    (out, injected)
}

/// Appends one private trigger copy and wires it to `victim` with
/// `attach_count` edges to distinct trigger nodes.
fn attach_node_trigger(
    ds: &mut NodeDataset,
    victim: usize,
    spec: &TriggerSpec,
    r: &mut ChaCha8Rng,
) -> Vec<usize> {
    let base = ds.graph.n;
    let t = spec.trigger_size;
    let d = ds.graph.feature_dim;
    ds.graph.n += t;
    ds.graph.features.extend(vec![0.0; t * d]);
    for i in 0..t {
        ds.graph.set_feature_row(base + i, spec.feature_row(i));
        ds.labels.push(spec.target_label);
    }
    for &(i, j) in &spec.trigger_edges {
        ds.graph.add_edge(base + i, base + j).expect("trigger edge");
    }
    let mut targets: Vec<usize> = (0..t).collect();
    shuffle(&mut targets, r);
    for &tn in targets.iter().take(spec.attach_count.min(t)) {
        let _ = ds.graph.add_edge(victim, base + tn).expect("attach edge");
    }
    ds.graph.sort_edges();
    (base..base + t).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::trigger::{make_trigger, DatasetStats, FeatureMode};
    use crate::data::{generate_graph_corpus, split_dataset, GraphCorpusSpec};
    use crate::rng::rng;

    fn toy_spec() -> TriggerSpec {
        TriggerSpec {
            trigger_size: 2,
            trigger_edges: vec![(0, 1)],
            trigger_features: vec![0.9, 0.1, 0.8, 0.2],
            feature_dim: 2,
            attach_count: 1,
            target_label: 0,
            seed: 0,
        }
    }

    fn triangle() -> Graph {
        let mut g = Graph::new(7, 3, 2, 1);
        g.add_edge(0, 1).unwrap();
        g.add_edge(1, 2).unwrap();
        g.add_edge(0, 2).unwrap();
        g
    }

    #[test]
    fn edge_count_arithmetic() {
        let g = triangle();
        let (p, injected) = inject_graph_trigger(&g, &toy_spec(), &mut rng(1, Stream::Attach));
        assert_eq!(p.n, 5);
        // 3 host edges + 1 trigger edge + 1 attach edge
        assert_eq!(p.edges.len(), 5);
        assert_eq!(injected, vec![3, 4]);
        assert_eq!(p.label, 0, "label always becomes the target");
    }

    #[test]
    fn stripping_injected_nodes_recovers_the_original() {
        let g = triangle();
        let (p, injected) = inject_graph_trigger(&g, &toy_spec(), &mut rng(2, Stream::Attach));
        // Remove injected nodes and incident edges.
        let keep = |v: usize| !injected.contains(&v);
        let mut stripped = Graph::new(g.id, g.n, g.feature_dim, 1);
        stripped.features = p.features[..g.n * g.feature_dim].to_vec();
        for &(i, j) in &p.edges {
            if keep(i) && keep(j) {
                stripped.add_edge(i, j).unwrap();
            }
        }
        stripped.sort_edges();
        let mut orig = g.clone();
        orig.sort_edges();
        assert_eq!(stripped, orig);
    }

    #[test]
    fn poison_count_and_ledger_exactness() {
        let spec = GraphCorpusSpec {
            num_graphs: 100,
            ..GraphCorpusSpec::aids_like()
        };
        let mut ds = generate_graph_corpus(&spec, 3).unwrap();
        split_dataset(&mut ds, 0.8, 3).unwrap();
        let stats = DatasetStats::from_graph_dataset(&ds).unwrap();
        let trig = make_trigger(&stats, 3, 0.8, FeatureMode::Random, 1, 0, 5).unwrap();
        let (poisoned, record) = poison_graph_dataset(&ds, &trig, 0.10, 5).unwrap();

        assert_eq!(record.poisoned_ids.len(), 8); // round(0.1 * 80)
        for (k, &id) in record.poisoned_ids.iter().enumerate() {
            assert_eq!(poisoned.graphs[id].label, trig.target_label);
            assert_ne!(record.original_labels[k], trig.target_label);
            assert!(ds.train_idx.contains(&id));
            assert!(!ds.test_idx.contains(&id));
        }
        // test split untouched
        for &i in &ds.test_idx {
            assert_eq!(poisoned.graphs[i], ds.graphs[i]);
        }
    }

    #[test]
    fn poison_selection_is_deterministic() {
        let spec = GraphCorpusSpec {
            num_graphs: 60,
            ..GraphCorpusSpec::aids_like()
        };
        let mut ds = generate_graph_corpus(&spec, 4).unwrap();
        split_dataset(&mut ds, 0.8, 4).unwrap();
        let stats = DatasetStats::from_graph_dataset(&ds).unwrap();
        let trig = make_trigger(&stats, 3, 0.8, FeatureMode::Random, 1, 0, 5).unwrap();
        let (_, r1) = poison_graph_dataset(&ds, &trig, 0.1, 7).unwrap();
        let (_, r2) = poison_graph_dataset(&ds, &trig, 0.1, 7).unwrap();
        assert_eq!(r1.poisoned_ids, r2.poisoned_ids);
    }

    #[test]
    fn insufficient_candidates_is_an_error() {
        let spec = GraphCorpusSpec {
            num_graphs: 10,
            ..GraphCorpusSpec::aids_like()
        };
        let mut ds = generate_graph_corpus(&spec, 5).unwrap();
        split_dataset(&mut ds, 0.8, 5).unwrap();
        // Target label 1 with rate .9 cannot find enough non-target graphs.
        let stats = DatasetStats::from_graph_dataset(&ds).unwrap();
        let mut trig = make_trigger(&stats, 2, 1.0, FeatureMode::Random, 1, 0, 5).unwrap();
        trig.target_label = 1;
        assert!(poison_graph_dataset(&ds, &trig, 0.9, 5).is_err());
    }

    #[test]
    fn eval_copies_grow_by_trigger_size_and_vary() {
        let g = triangle();
        let spec = toy_spec();
        let (a, _) = apply_trigger_for_eval(&g, &spec, 11, 0);
        let (b, _) = apply_trigger_for_eval(&g, &spec, 11, 1);
        assert_eq!(a.n, g.n + 2);
        assert_eq!(b.n, g.n + 2);
        assert_eq!(a.label, g.label, "eval copies keep the true label");
        // Independent applications may pick different host nodes; at minimum
        // the RNG streams differ.
        let (a2, _) = apply_trigger_for_eval(&g, &spec, 11, 0);
        assert_eq!(a, a2, "same copy index is reproducible");
    }

    #[test]
    fn node_injection_grows_graph_and_flips_victims() {
        use crate::data::{generate_synthetic_node_graph, split_node_dataset};
        let mut ds = generate_synthetic_node_graph(40, 2, 0.3, 0.02, 4, 0.05, 2).unwrap();
        split_node_dataset(&mut ds, 0.5, 0.0, 2).unwrap();
        let spec = TriggerSpec {
            trigger_size: 3,
            trigger_edges: vec![(0, 1), (1, 2)],
            trigger_features: vec![0.5; 12],
            feature_dim: 4,
            attach_count: 1,
            target_label: 0,
            seed: 0,
        };
        let (poisoned, record) = inject_node_trigger(&ds, &spec, 1, 9).unwrap();
        assert_eq!(poisoned.graph.n, 43);
        let victim = record.poisoned_ids[0];
        assert_eq!(poisoned.labels[victim], 0);
        assert_eq!(
            poisoned.graph.degree(victim),
            ds.graph.degree(victim) + spec.attach_count
        );

        let (unchanged, rec0) = inject_node_trigger(&ds, &spec, 0, 9).unwrap();
        assert_eq!(unchanged.graph, ds.graph);
        assert!(rec0.poisoned_ids.is_empty());
    }
}
