//! Masked message passing and full model forward passes.
//!
//! Masks are multiplicative edge weights in `[0, 1]`. The unmasked path is
//! literally the all-ones mask path, so their equivalence is definitional.
//! In adaptive mode each layer computes its masks from the current
//! embeddings via the projection head, on the tape, so the heads receive
//! gradients through the masks they produce.

use std::rc::Rc;

use super::config::Arch;
use super::model::GnnModel;
use super::{LayerMasks, MaskSet};
use crate::data::Graph;
use crate::defense::masks::{natural_scores_from_edge_values, select_clean_nodes};
use crate::error::{Error, Result};
use crate::tensor::{Tape, TensorId};

/// How a forward pass weights edges.
#[derive(Clone, Copy)]
pub enum MaskMode<'a> {
    /// Behaves as all-ones masks with unit self-loops.
    Unmasked,
    /// Pre-computed masks, one `LayerMasks` per layer.
    Fixed(&'a MaskSet),
    /// Per-layer masks computed from projected embeddings during the pass.
    Adaptive,
}

/// Registers every model parameter on the tape, in `model.params` order.
pub fn register_params(tape: &mut Tape, model: &GnnModel) -> Vec<TensorId> {
    model
        .params
        .iter()
        .enumerate()
        .map(|(i, p)| tape.param(i, p))
        .collect()
}

/// One GCN layer: mask-weighted adjacency with self-loops, symmetric
/// degree normalization recomputed from the masked weights, then a linear
/// map (+bias) and optional ReLU.
#[allow(clippy::too_many_arguments)]
pub fn gcn_layer(
    tape: &mut Tape,
    h: TensorId,
    edge_masks: TensorId,
    self_masks: TensorId,
    edges: Rc<Vec<(usize, usize)>>,
    n: usize,
    w: TensorId,
    b: TensorId,
    apply_relu: bool,
) -> Result<TensorId> {
    let adj = tape.scatter_sym(edge_masks, self_masks, edges, n);
    let deg = tape.row_sum(adj);
    let r = tape.rsqrt_max_eps(deg);
    let norm = tape.mul_row_col(adj, r);
    let agg = tape.matmul(norm, h)?;
    let z = tape.matmul(agg, w)?;
    let z = tape.add_row(z, b)?;
    Ok(if apply_relu { tape.relu(z) } else { z })
}

/// One GraphSAGE-mean layer: mask-weighted neighbor mean combined with the
/// self-mask-scaled own features.
#[allow(clippy::too_many_arguments)]
pub fn sage_layer(
    tape: &mut Tape,
    h: TensorId,
    edge_masks: TensorId,
    self_masks: TensorId,
    edges: Rc<Vec<(usize, usize)>>,
    n: usize,
    w_self: TensorId,
    w_neigh: TensorId,
    b: TensorId,
    apply_relu: bool,
) -> Result<TensorId> {
    let zeros = tape.input(vec![0.0; n], vec![n]);
    let off_diag = tape.scatter_sym(edge_masks, zeros, edges, n);
    let mass = tape.row_sum(off_diag);
    let inv_mass = tape.recip_max_eps(mass);
    let neigh_sum = tape.matmul(off_diag, h)?;
    let neigh = tape.scale_rows(neigh_sum, inv_mass);
    let own = tape.scale_rows(h, self_masks);
    let a = tape.matmul(own, w_self)?;
    let bterm = tape.matmul(neigh, w_neigh)?;
    let z = tape.add(a, bterm)?;
    let z = tape.add_row(z, b)?;
    Ok(if apply_relu { tape.relu(z) } else { z })
}

/// Mean-pooling readout over all nodes -> `[1, d]` graph embedding.
pub fn readout(tape: &mut Tape, h: TensorId) -> Result<TensorId> {
    tape.mean_rows(h)
}

/// Masks for one layer in adaptive mode. Projects the current embeddings,
/// scores nodes by mean neighbor similarity of the projections, pins the
/// top-beta scoring nodes as clean (mask 1 on clean-pair edges and their
/// self-loops), and soft-masks everything else by clamped similarity.
fn adaptive_layer_masks(
    tape: &mut Tape,
    h: TensorId,
    head: TensorId,
    edges: &Rc<Vec<(usize, usize)>>,
    n: usize,
    beta: f64,
) -> Result<(TensorId, TensorId, LayerMasks)> {
    let p = tape.matmul(h, head)?;
    let cos = tape.edge_cosine(p, edges.clone());
    let scores = natural_scores_from_edge_values(tape.values(cos), edges, n);
    let v_clean = select_clean_nodes(&scores, beta);
    let mut is_clean = vec![false; n];
    for &v in &v_clean {
        is_clean[v] = true;
    }

    let clean_pair: Vec<f64> = edges
        .iter()
        .map(|&(i, j)| if is_clean[i] && is_clean[j] { 1.0 } else { 0.0 })
        .collect();
    let keep: Vec<f64> = clean_pair.iter().map(|&f| 1.0 - f).collect();
    let e = edges.len();
    let flags = tape.input(clean_pair, vec![e]);
    let inv_flags = tape.input(keep, vec![e]);
    let clamped = tape.clamp01(cos);
    let soft = tape.mul(clamped, inv_flags)?;
    let edge_masks = tape.add(soft, flags)?;

    let pinned: Rc<Vec<Option<f64>>> = Rc::new(
        (0..n)
            .map(|i| if is_clean[i] { Some(1.0) } else { None })
            .collect(),
    );
    let self_masks = tape.incident_mean(edge_masks, edges.clone(), n, pinned);

    let info = LayerMasks {
        edge_masks: tape.values(edge_masks).to_vec(),
        self_masks: tape.values(self_masks).to_vec(),
        scores,
        v_clean,
    };
    Ok((edge_masks, self_masks, info))
}

fn layer_mask_tensors(
    tape: &mut Tape,
    mode: &MaskMode,
    k: usize,
    h: TensorId,
    head: TensorId,
    edges: &Rc<Vec<(usize, usize)>>,
    n: usize,
    beta: f64,
) -> Result<(TensorId, TensorId, Option<LayerMasks>)> {
    match mode {
        MaskMode::Unmasked => {
            let e = tape.input(vec![1.0; edges.len()], vec![edges.len()]);
            let s = tape.input(vec![1.0; n], vec![n]);
            Ok((e, s, None))
        }
        MaskMode::Fixed(ms) => {
            let lm = ms.layers.get(k).ok_or_else(|| {
                Error::invalid("model_forward", format!("no masks for layer {k}"))
            })?;
            if lm.edge_masks.len() != edges.len() || lm.self_masks.len() != n {
                return Err(Error::invalid(
                    "model_forward",
                    format!("layer {k} masks do not cover the graph"),
                ));
            }
            let e = tape.input(lm.edge_masks.clone(), vec![edges.len()]);
            let s = tape.input(lm.self_masks.clone(), vec![n]);
            Ok((e, s, None))
        }
        MaskMode::Adaptive => {
            let (e, s, info) = adaptive_layer_masks(tape, h, head, edges, n, beta)?;
            Ok((e, s, Some(info)))
        }
    }
}

fn run_layers(
    tape: &mut Tape,
    model: &GnnModel,
    param_ids: &[TensorId],
    x: TensorId,
    edges: Rc<Vec<(usize, usize)>>,
    n: usize,
    mode: &MaskMode,
) -> Result<(TensorId, Option<MaskSet>)> {
    let cfg = &model.config;
    let mut h = x;
    let mut collected: Vec<LayerMasks> = Vec::new();
    for k in 0..cfg.layers() {
        let head = param_ids[model.index_of(&format!("head{k}"))];
        let (em, sm, info) =
            layer_mask_tensors(tape, mode, k, h, head, &edges, n, cfg.beta)?;
        if let Some(info) = info {
            collected.push(info);
        }
        let b = param_ids[model.index_of(&format!("b{k}"))];
        let last = k + 1 == cfg.layers();
        h = match cfg.arch {
            Arch::Gcn => {
                let w = param_ids[model.index_of(&format!("w{k}"))];
                gcn_layer(tape, h, em, sm, edges.clone(), n, w, b, !last)?
            }
            Arch::Sage => {
                let ws = param_ids[model.index_of(&format!("w_self{k}"))];
                let wn = param_ids[model.index_of(&format!("w_neigh{k}"))];
                sage_layer(tape, h, em, sm, edges.clone(), n, ws, wn, b, !last)?
            }
        };
    }
    let masks = matches!(mode, MaskMode::Adaptive).then_some(MaskSet { layers: collected });
    Ok((h, masks))
}

/// Graph-classification forward: K masked layers, mean readout, classifier.
/// Returns `[1, C]` logits. `readout_nodes` restricts the mean to a node
/// subset (used to compare against trigger-stripped graphs).
pub fn forward_graph_on_tape(
    tape: &mut Tape,
    model: &GnnModel,
    param_ids: &[TensorId],
    graph: &Graph,
    mode: MaskMode,
    readout_nodes: Option<&[usize]>,
) -> Result<(TensorId, Option<MaskSet>)> {
    validate_graph(model, graph)?;
    let x = tape.input(graph.features.clone(), vec![graph.n, graph.feature_dim]);
    forward_graph_with_features(tape, model, param_ids, graph, x, mode, readout_nodes)
}

/// As [`forward_graph_on_tape`] but over a caller-supplied feature tensor,
/// e.g. a gradient-tracked leaf for input-gradient diagnostics.
pub fn forward_graph_with_features(
    tape: &mut Tape,
    model: &GnnModel,
    param_ids: &[TensorId],
    graph: &Graph,
    x: TensorId,
    mode: MaskMode,
    readout_nodes: Option<&[usize]>,
) -> Result<(TensorId, Option<MaskSet>)> {
    validate_graph(model, graph)?;
    let n = graph.n;
    let edges = Rc::new(graph.edges.clone());
    let (h, masks) = run_layers(tape, model, param_ids, x, edges, n, &mode)?;

    let pooled = match readout_nodes {
        None => readout(tape, h)?,
        Some(nodes) => {
            if nodes.is_empty() {
                return Err(Error::invalid("model_forward", "empty readout subset"));
            }
            let mut sel = vec![0.0; n];
            for &v in nodes {
                sel[v] = 1.0 / nodes.len() as f64;
            }
            let sel = tape.input(sel, vec![1, n]);
            tape.matmul(sel, h)?
        }
    };
    let wc = param_ids[model.index_of("wc")];
    let bc = param_ids[model.index_of("bc")];
    let z = tape.matmul(pooled, wc)?;
    let logits = tape.add_row(z, bc)?;
    Ok((logits, masks))
}

fn validate_graph(model: &GnnModel, graph: &Graph) -> Result<()> {
    if graph.n == 0 {
        return Err(Error::invalid("model_forward", "empty graph"));
    }
    if graph.feature_dim != model.config.feature_dim {
        return Err(Error::ShapeMismatch {
            op: "model_forward",
            lhs: vec![graph.feature_dim],
            rhs: vec![model.config.feature_dim],
        });
    }
    Ok(())
}

/// Node-classification forward: K masked layers then a per-node classifier.
/// Returns `[n, C]` logits.
pub fn forward_node_on_tape(
    tape: &mut Tape,
    model: &GnnModel,
    param_ids: &[TensorId],
    graph: &Graph,
    mode: MaskMode,
) -> Result<(TensorId, Option<MaskSet>)> {
    validate_graph(model, graph)?;
    let n = graph.n;
    let x = tape.input(graph.features.clone(), vec![n, graph.feature_dim]);
    let edges = Rc::new(graph.edges.clone());
    let (h, masks) = run_layers(tape, model, param_ids, x, edges, n, &mode)?;
    let wc = param_ids[model.index_of("wc")];
    let bc = param_ids[model.index_of("bc")];
    let z = tape.matmul(h, wc)?;
    let logits = tape.add_row(z, bc)?;
    Ok((logits, masks))
}

/// Pure convenience wrapper: graph logits as plain values.
pub fn graph_logits(
    model: &GnnModel,
    graph: &Graph,
    mode: MaskMode,
) -> Result<(Vec<f64>, Option<MaskSet>)> {
    let mut tape = Tape::new();
    let ids = register_params(&mut tape, model);
    let (logits, masks) = forward_graph_on_tape(&mut tape, model, &ids, graph, mode, None)?;
    Ok((tape.values(logits).to_vec(), masks))
}

/// Pure convenience wrapper: per-node logits as plain values (`n x C`).
pub fn node_logits(
    model: &GnnModel,
    graph: &Graph,
    mode: MaskMode,
) -> Result<(Vec<f64>, Option<MaskSet>)> {
    let mut tape = Tape::new();
    let ids = register_params(&mut tape, model);
    let (logits, masks) = forward_node_on_tape(&mut tape, model, &ids, graph, mode)?;
    Ok((tape.values(logits).to_vec(), masks))
}

pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::config::ModelConfig;
    use crate::gnn::MaskSet;

    fn tiny_model(arch: Arch, d: usize, hidden: usize, classes: usize, seed: u64) -> GnnModel {
        GnnModel::init(
            ModelConfig {
                arch,
                feature_dim: d,
                hidden_dims: vec![hidden, hidden],
                num_classes: classes,
                beta: 0.9,
                lambda: 5.0,
            },
            seed,
        )
        .unwrap()
    }

    fn lcg_graph(id: usize, n: usize, d: usize, edges: &[(usize, usize)], seed: u64) -> Graph {
        let mut g = Graph::new(id, n, d, 0);
        let mut state = seed;
        for i in 0..n * d {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            g.features[i] = ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0;
        }
        for &(a, b) in edges {
            g.add_edge(a, b).unwrap();
        }
        g.sort_edges();
        g
    }

    /// Independent per-node aggregation oracle for a GCN layer with ReLU.
    fn gcn_oracle(g: &Graph, edge_m: &[f64], self_m: &[f64], w: &[f64], dout: usize) -> Vec<f64> {
        let (n, d) = (g.n, g.feature_dim);
        let mut adj = vec![0.0; n * n];
        for (e, &(i, j)) in g.edges.iter().enumerate() {
            adj[i * n + j] = edge_m[e];
            adj[j * n + i] = edge_m[e];
        }
        for i in 0..n {
            adj[i * n + i] = self_m[i];
        }
        let deg: Vec<f64> = (0..n).map(|i| adj[i * n..(i + 1) * n].iter().sum()).collect();
        let mut agg = vec![0.0; n * d];
        for i in 0..n {
            for j in 0..n {
                if adj[i * n + j] != 0.0 {
                    let norm = adj[i * n + j] / (deg[i].max(1e-12) * deg[j].max(1e-12)).sqrt();
                    for t in 0..d {
                        agg[i * d + t] += norm * g.features[j * d + t];
                    }
                }
            }
        }
        let mut out = vec![0.0; n * dout];
        for i in 0..n {
            for o in 0..dout {
                let mut acc = 0.0;
                for t in 0..d {
                    acc += agg[i * d + t] * w[t * dout + o];
                }
                out[i * dout + o] = acc.max(0.0);
            }
        }
        out
    }

    #[test]
    fn gcn_single_node_self_loop_is_relu_xw() {
        let model = tiny_model(Arch::Gcn, 3, 4, 2, 1);
        let g = lcg_graph(0, 1, 3, &[], 5);
        let mut tape = Tape::new();
        let ids = register_params(&mut tape, &model);
        let x = tape.input(g.features.clone(), vec![1, 3]);
        let em = tape.input(vec![], vec![0]);
        let sm = tape.input(vec![1.0], vec![1]);
        let w = ids[model.index_of("w0")];
        let b = ids[model.index_of("b0")];
        let out = gcn_layer(&mut tape, x, em, sm, Rc::new(vec![]), 1, w, b, true).unwrap();

        let wv = &model.params[model.index_of("w0")].values;
        let mut expect = vec![0.0; 4];
        for o in 0..4 {
            for t in 0..3 {
                expect[o] += g.features[t] * wv[t * 4 + o];
            }
            expect[o] = expect[o].max(0.0);
        }
        for (a, b) in tape.values(out).iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gcn_all_zero_masks_give_zero_embeddings() {
        // biases are zero at init, so a fully masked graph yields zeros
        let model = tiny_model(Arch::Gcn, 3, 4, 2, 2);
        let g = lcg_graph(0, 4, 3, &[(0, 1), (1, 2), (2, 3)], 9);
        let mut tape = Tape::new();
        let ids = register_params(&mut tape, &model);
        let x = tape.input(g.features.clone(), vec![4, 3]);
        let em = tape.input(vec![0.0; 3], vec![3]);
        let sm = tape.input(vec![0.0; 4], vec![4]);
        let w = ids[model.index_of("w0")];
        let b = ids[model.index_of("b0")];
        let out = gcn_layer(&mut tape, x, em, sm, Rc::new(g.edges.clone()), 4, w, b, true).unwrap();
        assert!(tape.values(out).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gcn_layer_matches_per_node_loop_oracle() {
        let model = tiny_model(Arch::Gcn, 3, 4, 2, 3);
        let g = lcg_graph(0, 5, 3, &[(0, 1), (0, 2), (1, 3), (2, 4), (3, 4)], 13);
        let mut tape = Tape::new();
        let ids = register_params(&mut tape, &model);
        let x = tape.input(g.features.clone(), vec![5, 3]);
        let em = tape.input(vec![1.0; 5], vec![5]);
        let sm = tape.input(vec![1.0; 5], vec![5]);
        let w = ids[model.index_of("w0")];
        let b = ids[model.index_of("b0")];
        let out =
            gcn_layer(&mut tape, x, em, sm, Rc::new(g.edges.clone()), 5, w, b, true).unwrap();

        let expect = gcn_oracle(
            &g,
            &[1.0; 5],
            &[1.0; 5],
            &model.params[model.index_of("w0")].values,
            4,
        );
        for (a, b) in tape.values(out).iter().zip(&expect) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn sage_neighbor_term_behaviors() {
        // one neighbor, mask 1 -> neighbor term equals that neighbor's
        // features; two identical neighbors with masks .5 -> same.
        let model = tiny_model(Arch::Sage, 2, 3, 2, 4);
        let mut g = Graph::new(0, 3, 2, 0);
        g.add_edge(0, 1).unwrap();
        g.add_edge(0, 2).unwrap();
        g.set_feature_row(0, &[0.0, 0.0]);
        g.set_feature_row(1, &[0.7, -0.3]);
        g.set_feature_row(2, &[0.7, -0.3]);

        let ws = &model.params[model.index_of("w_self0")].values;
        let wn = &model.params[model.index_of("w_neigh0")].values;
        let _ = ws;
        // node 0 with masks (0.5, 0.5): weighted mean = (0.7, -0.3)
        let mut tape = Tape::new();
        let ids = register_params(&mut tape, &model);
        let x = tape.input(g.features.clone(), vec![3, 2]);
        let em = tape.input(vec![0.5, 0.5], vec![2]);
        let sm = tape.input(vec![0.0; 3], vec![3]); // zero self: isolate neighbor term
        let out = sage_layer(
            &mut tape,
            x,
            em,
            sm,
            Rc::new(g.edges.clone()),
            3,
            ids[model.index_of("w_self0")],
            ids[model.index_of("w_neigh0")],
            ids[model.index_of("b0")],
            false,
        )
        .unwrap();
        // expected: row0 = mean_feat . w_neigh
        let mut expect = vec![0.0; 3];
        for o in 0..3 {
            expect[o] = 0.7 * wn[o] - 0.3 * wn[3 + o];
        }
        for (a, b) in tape.values(out)[..3].iter().zip(&expect) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn sage_layer_matches_per_node_loop_oracle() {
        let model = tiny_model(Arch::Sage, 3, 4, 2, 5);
        let g = lcg_graph(0, 5, 3, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)], 17);
        let edge_m = [0.9, 0.4, 1.0, 0.2, 0.7];
        let self_m = [1.0, 0.3, 0.8, 1.0, 0.5];

        let mut tape = Tape::new();
        let ids = register_params(&mut tape, &model);
        let x = tape.input(g.features.clone(), vec![5, 3]);
        let em = tape.input(edge_m.to_vec(), vec![5]);
        let sm = tape.input(self_m.to_vec(), vec![5]);
        let out = sage_layer(
            &mut tape,
            x,
            em,
            sm,
            Rc::new(g.edges.clone()),
            5,
            ids[model.index_of("w_self0")],
            ids[model.index_of("w_neigh0")],
            ids[model.index_of("b0")],
            true,
        )
        .unwrap();

        // Per-node loop oracle.
        let d = 3;
        let dout = 4;
        let ws = &model.params[model.index_of("w_self0")].values;
        let wn = &model.params[model.index_of("w_neigh0")].values;
        let mut expect = vec![0.0; 5 * dout];
        for i in 0..5 {
            let mut mass = 0.0;
            let mut neigh = vec![0.0; d];
            for (e, &(a, b)) in g.edges.iter().enumerate() {
                let other = if a == i {
                    Some(b)
                } else if b == i {
                    Some(a)
                } else {
                    None
                };
                if let Some(j) = other {
                    mass += edge_m[e];
                    for t in 0..d {
                        neigh[t] += edge_m[e] * g.features[j * d + t];
                    }
                }
            }
            if mass > 1e-12 {
                neigh.iter_mut().for_each(|v| *v /= mass);
            } else {
                neigh.iter_mut().for_each(|v| *v = 0.0);
            }
            for o in 0..dout {
                let mut acc = 0.0;
                for t in 0..d {
                    acc += self_m[i] * g.features[i * d + t] * ws[t * dout + o];
                    acc += neigh[t] * wn[t * dout + o];
                }
                expect[i * dout + o] = acc.max(0.0);
            }
        }
        for (a, b) in tape.values(out).iter().zip(&expect) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn readout_trivials_and_permutation_invariance() {
        let mut tape = Tape::new();
        let single = tape.input(vec![0.4, -0.2], vec![1, 2]);
        let r = readout(&mut tape, single).unwrap();
        assert_eq!(tape.values(r), &[0.4, -0.2]);

        let opposite = tape.input(vec![1.0, -2.0, -1.0, 2.0], vec![2, 2]);
        let r2 = readout(&mut tape, opposite).unwrap();
        assert_eq!(tape.values(r2), &[0.0, 0.0]);

        let a = tape.input(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], vec![3, 2]);
        let b = tape.input(vec![5.0, 6.0, 1.0, 2.0, 3.0, 4.0], vec![3, 2]);
        let ra = readout(&mut tape, a).unwrap();
        let rb = readout(&mut tape, b).unwrap();
        assert_eq!(tape.values(ra), tape.values(rb));
    }

    #[test]
    fn all_ones_masks_equal_unmasked_forward() {
        for arch in [Arch::Gcn, Arch::Sage] {
            let model = tiny_model(arch, 3, 6, 2, 6);
            let g = lcg_graph(0, 6, 3, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5)], 23);
            let (unmasked, _) = graph_logits(&model, &g, MaskMode::Unmasked).unwrap();
            let ones = MaskSet::all_ones(2, g.edges.len(), g.n);
            let (masked, _) = graph_logits(&model, &g, MaskMode::Fixed(&ones)).unwrap();
            for (a, b) in unmasked.iter().zip(&masked) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn permutation_equivariance_of_node_logits() {
        let model = tiny_model(Arch::Gcn, 3, 5, 2, 7);
        let g = lcg_graph(0, 5, 3, &[(0, 1), (1, 2), (2, 3), (3, 4)], 31);
        // permutation: i -> (i + 2) % 5
        let perm = |v: usize| (v + 2) % 5;
        let mut pg = Graph::new(0, 5, 3, 0);
        for i in 0..5 {
            pg.set_feature_row(perm(i), g.feature_row(i));
        }
        for &(a, b) in &g.edges {
            pg.add_edge(perm(a), perm(b)).unwrap();
        }
        pg.sort_edges();

        let (l, _) = node_logits(&model, &g, MaskMode::Unmasked).unwrap();
        let (lp, _) = node_logits(&model, &pg, MaskMode::Unmasked).unwrap();
        for i in 0..5 {
            for c in 0..2 {
                let a = l[i * 2 + c];
                let b = lp[perm(i) * 2 + c];
                assert!((a - b).abs() < 1e-10, "node {i} class {c}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn zeroing_one_edge_only_touches_its_k_hop_cone() {
        // path 0-1-2-3-4-5, K=2: zeroing edge (0,1) must leave nodes 4 and 5
        // (distance > 2 from the edge) bit-identical.
        let model = tiny_model(Arch::Gcn, 3, 5, 2, 8);
        let g = lcg_graph(0, 6, 3, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)], 37);
        let ones = MaskSet::all_ones(2, g.edges.len(), g.n);
        let mut cut = ones.clone();
        for layer in &mut cut.layers {
            layer.edge_masks[0] = 0.0; // edge (0,1) is first in sorted order
        }
        let (a, _) = node_logits(&model, &g, MaskMode::Fixed(&ones)).unwrap();
        let (b, _) = node_logits(&model, &g, MaskMode::Fixed(&cut)).unwrap();
        for node in [4usize, 5] {
            for c in 0..2 {
                assert_eq!(a[node * 2 + c], b[node * 2 + c], "node {node}");
            }
        }
        // and the edge's own endpoints did change
        assert!((a[0] - b[0]).abs() > 0.0);
    }

    #[test]
    fn batch_of_graphs_keeps_order() {
        let model = tiny_model(Arch::Gcn, 3, 4, 2, 9);
        let graphs: Vec<Graph> = (0..4)
            .map(|i| lcg_graph(i, 4, 3, &[(0, 1), (1, 2), (2, 3)], 100 + i as u64))
            .collect();
        let each: Vec<Vec<f64>> = graphs
            .iter()
            .map(|g| graph_logits(&model, g, MaskMode::Unmasked).unwrap().0)
            .collect();
        // re-run in a different order, results must be identical per graph
        for (i, g) in graphs.iter().enumerate().rev() {
            let (l, _) = graph_logits(&model, g, MaskMode::Unmasked).unwrap();
            assert_eq!(l, each[i]);
        }
    }
}
