//! The Wengert tape: eager forward evaluation plus recorded backward rules.

use std::rc::Rc;

use crate::error::{Error, Result};
use crate::tensor::{Param, EPS};

/// Handle to a tensor stored on a tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TensorId(pub usize);

/// Edge list shared between the ops of one layer without copying.
pub type EdgeList = Rc<Vec<(usize, usize)>>;

/// Every operation the tape can record.
///
/// Graph-specific ops (`EdgeCosine`, `ScatterSym`, `IncidentMean`) exist so
/// that mask construction stays differentiable end to end: gradients reach
/// the projection heads through the mask values they produce.
#[derive(Clone, Debug)]
pub enum Op {
    /// Leaf value (input, constant, or parameter).
    Leaf,
    /// `[r,k] x [k,c] -> [r,c]`
    MatMul,
    /// Elementwise sum of two same-shape tensors.
    Add,
    /// `[n,d] + [d]` broadcast over rows (bias add).
    AddRow,
    /// Elementwise difference.
    Sub,
    /// Elementwise product.
    Mul,
    /// Multiply by a compile-time constant.
    Scale(f64),
    /// max(x, 0) elementwise.
    Relu,
    /// `[n,m] -> [n]`, sum along each row.
    RowSum,
    /// `[n,d] -> [1,d]`, column means (mean-pooling readout).
    MeanRows,
    /// `-> [1]`, sum of all entries.
    SumAll,
    /// `[n,d] -> [d]`, copy of one row.
    PickRow(usize),
    /// Mean of `-log softmax(X[r])[y]` over the recorded (row, label) pairs.
    SoftmaxCrossEntropy(Rc<Vec<(usize, usize)>>),
    /// `softmax(X[row])[label]` as a scalar.
    SoftmaxProb { row: usize, label: usize },
    /// Euclidean norm of the whole tensor.
    L2Norm,
    /// Per-edge cosine similarity of rows of `[n,d]` -> `[E]`.
    EdgeCosine(EdgeList),
    /// Clamp into [0,1]; gradient passes only strictly inside.
    Clamp01,
    /// Assemble a symmetric weighted adjacency: edge values off-diagonal,
    /// self values on the diagonal. `([E], [n]) -> [n,n]`.
    ScatterSym { edges: EdgeList, n: usize },
    /// Per-node mean of incident edge values -> `[n]`. Nodes with a pinned
    /// constant (clean nodes: 1) pass no gradient; isolated nodes get 1.
    IncidentMean {
        edges: EdgeList,
        n: usize,
        pinned: Rc<Vec<Option<f64>>>,
    },
    /// `1/sqrt(max(x, eps))` elementwise.
    RsqrtMaxEps,
    /// `1/max(x, eps)` elementwise.
    RecipMaxEps,
    /// `N_ij = W_ij * r_i * r_j` for `W [n,n]`, `r [n]`.
    MulRowCol,
    /// `Y_ij = X_ij * v_i` for `X [n,d]`, `v [n]`.
    ScaleRows,
}

/// One recorded tensor: its producing op, inputs, eager value, and gradient.
#[derive(Clone, Debug)]
pub struct Tensor {
    pub op: Op,
    pub inputs: Vec<TensorId>,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    pub requires_grad: bool,
    pub grad: Option<Vec<f64>>,
}

/// A single-use computation tape.
///
/// Reset rule: a tape is built for one forward/backward pass and then
/// dropped; parameters persist outside the tape in [`Param`] buffers and are
/// re-registered on the next tape. `backward` may be called once per tape.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Tensor>,
    bindings: Vec<(TensorId, usize)>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(
        &mut self,
        op: Op,
        inputs: Vec<TensorId>,
        shape: Vec<usize>,
        values: Vec<f64>,
        requires_grad: bool,
    ) -> TensorId {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        let id = TensorId(self.nodes.len());
        self.nodes.push(Tensor {
            op,
            inputs,
            shape,
            values,
            requires_grad,
            grad: None,
        });
        id
    }

    fn rg(&self, ids: &[TensorId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].requires_grad)
    }

    // ----- accessors -----

    pub fn values(&self, id: TensorId) -> &[f64] {
        &self.nodes[id.0].values
    }

    pub fn shape(&self, id: TensorId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn scalar(&self, id: TensorId) -> f64 {
        debug_assert_eq!(self.nodes[id.0].values.len(), 1);
        self.nodes[id.0].values[0]
    }

    pub fn grad(&self, id: TensorId) -> Option<&[f64]> {
        self.nodes[id.0].grad.as_deref()
    }

    /// Gradient of a tensor, erroring when backward has not populated it.
    pub fn grad_of(&self, id: TensorId) -> Result<&[f64]> {
        self.nodes[id.0]
            .grad
            .as_deref()
            .ok_or_else(|| Error::invalid("grad_of", "no gradient recorded; run backward first"))
    }

    // ----- leaves -----

    /// Non-trainable leaf (graph features, masks given as data, constants).
    pub fn input(&mut self, values: Vec<f64>, shape: Vec<usize>) -> TensorId {
        self.push(Op::Leaf, vec![], shape, values, false)
    }

    /// Trainable leaf not bound to a [`Param`] (used for input-gradient
    /// diagnostics).
    pub fn grad_leaf(&mut self, values: Vec<f64>, shape: Vec<usize>) -> TensorId {
        self.push(Op::Leaf, vec![], shape, values, true)
    }

    /// Registers a parameter; its gradient can later be harvested back by
    /// index with [`Tape::harvest_grads`].
    pub fn param(&mut self, index: usize, p: &Param) -> TensorId {
        let id = self.push(Op::Leaf, vec![], p.shape.clone(), p.values.clone(), true);
        self.bindings.push((id, index));
        id
    }

    // ----- arithmetic ops -----

    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: sa,
                rhs: sb,
            });
        }
        let (r, k, c) = (sa[0], sa[1], sb[1]);
        let av = &self.nodes[a.0].values;
        let bv = &self.nodes[b.0].values;
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            let arow = &av[i * k..(i + 1) * k];
            let orow = &mut out[i * c..(i + 1) * c];
            for (kk, &aik) in arow.iter().enumerate() {
                if aik != 0.0 {
                    let brow = &bv[kk * c..(kk + 1) * c];
                    for j in 0..c {
                        orow[j] += aik * brow[j];
                    }
                }
            }
        }
        let rg = self.rg(&[a, b]);
        Ok(self.push(Op::MatMul, vec![a, b], vec![r, c], out, rg))
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.zip_op("add", Op::Add, a, b, |x, y| x + y)
    }

    pub fn sub(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.zip_op("sub", Op::Sub, a, b, |x, y| x - y)
    }

    pub fn mul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.zip_op("mul", Op::Mul, a, b, |x, y| x * y)
    }

    fn zip_op(
        &mut self,
        name: &'static str,
        op: Op,
        a: TensorId,
        b: TensorId,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<TensorId> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::ShapeMismatch {
                op: name,
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        let out: Vec<f64> = self.nodes[a.0]
            .values
            .iter()
            .zip(&self.nodes[b.0].values)
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = self.shape(a).to_vec();
        let rg = self.rg(&[a, b]);
        Ok(self.push(op, vec![a, b], shape, out, rg))
    }

    /// `[n,d] + [d]` broadcast (bias).
    pub fn add_row(&mut self, x: TensorId, row: TensorId) -> Result<TensorId> {
        let sx = self.shape(x).to_vec();
        let sr = self.shape(row).to_vec();
        if sx.len() != 2 || sr != vec![sx[1]] {
            return Err(Error::ShapeMismatch {
                op: "add_row",
                lhs: sx,
                rhs: sr,
            });
        }
        let d = sx[1];
        let rv = self.nodes[row.0].values.clone();
        let out: Vec<f64> = self.nodes[x.0]
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| v + rv[i % d])
            .collect();
        let rg = self.rg(&[x, row]);
        Ok(self.push(Op::AddRow, vec![x, row], sx, out, rg))
    }

    pub fn scale(&mut self, a: TensorId, c: f64) -> TensorId {
        let out: Vec<f64> = self.nodes[a.0].values.iter().map(|&x| x * c).collect();
        let shape = self.shape(a).to_vec();
        let rg = self.rg(&[a]);
        self.push(Op::Scale(c), vec![a], shape, out, rg)
    }

    pub fn relu(&mut self, a: TensorId) -> TensorId {
        let out: Vec<f64> = self.nodes[a.0].values.iter().map(|&x| x.max(0.0)).collect();
        let shape = self.shape(a).to_vec();
        let rg = self.rg(&[a]);
        self.push(Op::Relu, vec![a], shape, out, rg)
    }

    pub fn row_sum(&mut self, a: TensorId) -> TensorId {
        let s = self.shape(a).to_vec();
        assert_eq!(s.len(), 2, "row_sum expects a matrix");
        let (n, m) = (s[0], s[1]);
        let v = &self.nodes[a.0].values;
        let out: Vec<f64> = (0..n).map(|i| v[i * m..(i + 1) * m].iter().sum()).collect();
        let rg = self.rg(&[a]);
        self.push(Op::RowSum, vec![a], vec![n], out, rg)
    }

    pub fn mean_rows(&mut self, a: TensorId) -> Result<TensorId> {
        let s = self.shape(a).to_vec();
        if s.len() != 2 || s[0] == 0 {
            return Err(Error::invalid("mean_rows", "expects a non-empty matrix"));
        }
        let (n, d) = (s[0], s[1]);
        let v = &self.nodes[a.0].values;
        let mut out = vec![0.0; d];
        for i in 0..n {
            for j in 0..d {
                out[j] += v[i * d + j];
            }
        }
        out.iter_mut().for_each(|x| *x /= n as f64);
        let rg = self.rg(&[a]);
        Ok(self.push(Op::MeanRows, vec![a], vec![1, d], out, rg))
    }

    pub fn sum_all(&mut self, a: TensorId) -> TensorId {
        let total: f64 = self.nodes[a.0].values.iter().sum();
        let rg = self.rg(&[a]);
        self.push(Op::SumAll, vec![a], vec![1], vec![total], rg)
    }

    pub fn pick_row(&mut self, a: TensorId, row: usize) -> TensorId {
        let s = self.shape(a).to_vec();
        assert_eq!(s.len(), 2, "pick_row expects a matrix");
        assert!(row < s[0], "row out of range");
        let d = s[1];
        let out = self.nodes[a.0].values[row * d..(row + 1) * d].to_vec();
        let rg = self.rg(&[a]);
        self.push(Op::PickRow(row), vec![a], vec![d], out, rg)
    }

    // ----- losses -----

    /// Mean cross-entropy over (row, label) pairs, stabilized by
    /// max-subtraction.
    pub fn softmax_cross_entropy(
        &mut self,
        logits: TensorId,
        pairs: &[(usize, usize)],
    ) -> Result<TensorId> {
        let s = self.shape(logits).to_vec();
        if s.len() != 2 {
            return Err(Error::invalid("softmax_cross_entropy", "logits must be 2-D"));
        }
        if pairs.is_empty() {
            return Err(Error::invalid("softmax_cross_entropy", "no samples"));
        }
        let classes = s[1];
        for &(row, label) in pairs {
            if row >= s[0] {
                return Err(Error::invalid(
                    "softmax_cross_entropy",
                    format!("row {row} out of range {}", s[0]),
                ));
            }
            if label >= classes {
                return Err(Error::invalid(
                    "softmax_cross_entropy",
                    format!("label {label} out of range for {classes} classes"),
                ));
            }
        }
        let v = &self.nodes[logits.0].values;
        let mut total = 0.0;
        for &(row, label) in pairs {
            let z = &v[row * classes..(row + 1) * classes];
            total -= log_softmax_at(z, label);
        }
        let loss = total / pairs.len() as f64;
        let rg = self.rg(&[logits]);
        Ok(self.push(
            Op::SoftmaxCrossEntropy(Rc::new(pairs.to_vec())),
            vec![logits],
            vec![1],
            vec![loss],
            rg,
        ))
    }

    /// `softmax(X[row])[label]` — the adversarial unlearning objective.
    pub fn softmax_prob(&mut self, logits: TensorId, row: usize, label: usize) -> Result<TensorId> {
        let s = self.shape(logits).to_vec();
        if s.len() != 2 || row >= s[0] || label >= s[1] {
            return Err(Error::invalid(
                "softmax_prob",
                format!("row {row}/label {label} invalid for shape {s:?}"),
            ));
        }
        let classes = s[1];
        let z = &self.nodes[logits.0].values[row * classes..(row + 1) * classes];
        let p = softmax(z)[label];
        let rg = self.rg(&[logits]);
        Ok(self.push(Op::SoftmaxProb { row, label }, vec![logits], vec![1], vec![p], rg))
    }

    pub fn l2_norm(&mut self, a: TensorId) -> TensorId {
        let norm = self.nodes[a.0]
            .values
            .iter()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt();
        let rg = self.rg(&[a]);
        self.push(Op::L2Norm, vec![a], vec![1], vec![norm], rg)
    }

    // ----- graph ops -----

    /// Cosine similarity of the endpoint rows of each edge.
    pub fn edge_cosine(&mut self, p: TensorId, edges: EdgeList) -> TensorId {
        let s = self.shape(p).to_vec();
        assert_eq!(s.len(), 2, "edge_cosine expects node rows");
        let d = s[1];
        let v = &self.nodes[p.0].values;
        let out: Vec<f64> = edges
            .iter()
            .map(|&(i, j)| crate::tensor::cosine_similarity(&v[i * d..(i + 1) * d], &v[j * d..(j + 1) * d]))
            .collect();
        let rg = self.rg(&[p]);
        let e = out.len();
        self.push(Op::EdgeCosine(edges), vec![p], vec![e], out, rg)
    }

    pub fn clamp01(&mut self, a: TensorId) -> TensorId {
        let out: Vec<f64> = self.nodes[a.0]
            .values
            .iter()
            .map(|&x| x.clamp(0.0, 1.0))
            .collect();
        let shape = self.shape(a).to_vec();
        let rg = self.rg(&[a]);
        self.push(Op::Clamp01, vec![a], shape, out, rg)
    }

    /// Symmetric weighted adjacency from per-edge and per-node diagonal
    /// values.
    pub fn scatter_sym(&mut self, edge_vals: TensorId, self_vals: TensorId, edges: EdgeList, n: usize) -> TensorId {
        assert_eq!(self.values(edge_vals).len(), edges.len());
        assert_eq!(self.values(self_vals).len(), n);
        let ev = &self.nodes[edge_vals.0].values;
        let sv = &self.nodes[self_vals.0].values;
        let mut out = vec![0.0; n * n];
        for (e, &(i, j)) in edges.iter().enumerate() {
            out[i * n + j] = ev[e];
            out[j * n + i] = ev[e];
        }
        for (i, &v) in sv.iter().enumerate() {
            out[i * n + i] = v;
        }
        let rg = self.rg(&[edge_vals, self_vals]);
        self.push(
            Op::ScatterSym { edges, n },
            vec![edge_vals, self_vals],
            vec![n, n],
            out,
            rg,
        )
    }

    /// Mean incident edge value per node; `pinned[i] = Some(c)` overrides
    /// node i with the constant c, isolated unpinned nodes get 1.
    pub fn incident_mean(
        &mut self,
        edge_vals: TensorId,
        edges: EdgeList,
        n: usize,
        pinned: Rc<Vec<Option<f64>>>,
    ) -> TensorId {
        assert_eq!(self.values(edge_vals).len(), edges.len());
        assert_eq!(pinned.len(), n);
        let ev = &self.nodes[edge_vals.0].values;
        let mut sums = vec![0.0; n];
        let mut counts = vec![0usize; n];
        for (e, &(i, j)) in edges.iter().enumerate() {
            sums[i] += ev[e];
            counts[i] += 1;
            sums[j] += ev[e];
            counts[j] += 1;
        }
        let out: Vec<f64> = (0..n)
            .map(|i| match pinned[i] {
                Some(c) => c,
                None if counts[i] == 0 => 1.0,
                None => sums[i] / counts[i] as f64,
            })
            .collect();
        let rg = self.rg(&[edge_vals]);
        self.push(
            Op::IncidentMean { edges, n, pinned },
            vec![edge_vals],
            vec![n],
            out,
            rg,
        )
    }

    pub fn rsqrt_max_eps(&mut self, a: TensorId) -> TensorId {
        let out: Vec<f64> = self.nodes[a.0]
            .values
            .iter()
            .map(|&x| 1.0 / x.max(EPS).sqrt())
            .collect();
        let shape = self.shape(a).to_vec();
        let rg = self.rg(&[a]);
        self.push(Op::RsqrtMaxEps, vec![a], shape, out, rg)
    }

    pub fn recip_max_eps(&mut self, a: TensorId) -> TensorId {
        let out: Vec<f64> = self.nodes[a.0]
            .values
            .iter()
            .map(|&x| 1.0 / x.max(EPS))
            .collect();
        let shape = self.shape(a).to_vec();
        let rg = self.rg(&[a]);
        self.push(Op::RecipMaxEps, vec![a], shape, out, rg)
    }

    /// `N_ij = W_ij * r_i * r_j` (symmetric degree normalization).
    pub fn mul_row_col(&mut self, w: TensorId, r: TensorId) -> TensorId {
        let s = self.shape(w).to_vec();
        assert!(s.len() == 2 && s[0] == s[1], "mul_row_col expects square matrix");
        let n = s[0];
        assert_eq!(self.values(r).len(), n);
        let wv = &self.nodes[w.0].values;
        let rv = self.nodes[r.0].values.clone();
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let x = wv[i * n + j];
                if x != 0.0 {
                    out[i * n + j] = x * rv[i] * rv[j];
                }
            }
        }
        let rg = self.rg(&[w, r]);
        self.push(Op::MulRowCol, vec![w, r], vec![n, n], out, rg)
    }

    /// `Y_ij = X_ij * v_i`.
    pub fn scale_rows(&mut self, x: TensorId, v: TensorId) -> TensorId {
        let s = self.shape(x).to_vec();
        assert_eq!(s.len(), 2, "scale_rows expects a matrix");
        let (n, d) = (s[0], s[1]);
        assert_eq!(self.values(v).len(), n);
        let xv = &self.nodes[x.0].values;
        let vv = &self.nodes[v.0].values;
        let mut out = vec![0.0; n * d];
        for i in 0..n {
            for j in 0..d {
                out[i * d + j] = xv[i * d + j] * vv[i];
            }
        }
        let rg = self.rg(&[x, v]);
        self.push(Op::ScaleRows, vec![x, v], vec![n, d], out, rg)
    }

    // ----- backward -----

    /// Reverse pass from a scalar loss. Fan-out gradients sum; every
    /// gradient-requiring tensor reachable from the loss ends up with a
    /// populated `grad`.
    pub fn backward(&mut self, loss: TensorId) -> Result<()> {
        if self.nodes[loss.0].values.len() != 1 {
            return Err(Error::invalid(
                "backward",
                format!("loss must be scalar, got shape {:?}", self.shape(loss)),
            ));
        }
        self.nodes[loss.0].grad = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let g = match &self.nodes[idx].grad {
                Some(g) => g.clone(),
                None => continue,
            };
            if self.nodes[idx].inputs.is_empty() {
                continue;
            }
            let op = self.nodes[idx].op.clone();
            let inputs = self.nodes[idx].inputs.clone();
            self.backprop_one(idx, &op, &inputs, &g);
        }
        Ok(())
    }

    fn accumulate(&mut self, id: TensorId, delta: &[f64]) {
        if !self.nodes[id.0].requires_grad {
            return;
        }
        let node = &mut self.nodes[id.0];
        let grad = node.grad.get_or_insert_with(|| vec![0.0; node.values.len()]);
        for (g, d) in grad.iter_mut().zip(delta) {
            *g += d;
        }
    }

    fn backprop_one(&mut self, idx: usize, op: &Op, inputs: &[TensorId], g: &[f64]) {
        match op {
            Op::Leaf => {}
            Op::MatMul => {
                let (a, b) = (inputs[0], inputs[1]);
                let (r, k) = (self.shape(a)[0], self.shape(a)[1]);
                let c = self.shape(b)[1];
                if self.nodes[a.0].requires_grad {
                    // da = g . b^T
                    let bv = &self.nodes[b.0].values;
                    let mut da = vec![0.0; r * k];
                    for i in 0..r {
                        for kk in 0..k {
                            let brow = &bv[kk * c..(kk + 1) * c];
                            let grow = &g[i * c..(i + 1) * c];
                            let mut acc = 0.0;
                            for j in 0..c {
                                acc += grow[j] * brow[j];
                            }
                            da[i * k + kk] = acc;
                        }
                    }
                    self.accumulate(a, &da);
                }
                if self.nodes[b.0].requires_grad {
                    // db = a^T . g
                    let av = self.nodes[a.0].values.clone();
                    let mut db = vec![0.0; k * c];
                    for i in 0..r {
                        let grow = &g[i * c..(i + 1) * c];
                        for kk in 0..k {
                            let aik = av[i * k + kk];
                            if aik != 0.0 {
                                let drow = &mut db[kk * c..(kk + 1) * c];
                                for j in 0..c {
                                    drow[j] += aik * grow[j];
                                }
                            }
                        }
                    }
                    self.accumulate(b, &db);
                }
            }
            Op::Add => {
                self.accumulate(inputs[0], g);
                self.accumulate(inputs[1], g);
            }
            Op::AddRow => {
                self.accumulate(inputs[0], g);
                if self.nodes[inputs[1].0].requires_grad {
                    let d = self.shape(inputs[1])[0];
                    let mut dr = vec![0.0; d];
                    for (i, &gi) in g.iter().enumerate() {
                        dr[i % d] += gi;
                    }
                    self.accumulate(inputs[1], &dr);
                }
            }
            Op::Sub => {
                self.accumulate(inputs[0], g);
                if self.nodes[inputs[1].0].requires_grad {
                    let neg: Vec<f64> = g.iter().map(|x| -x).collect();
                    self.accumulate(inputs[1], &neg);
                }
            }
            Op::Mul => {
                let (a, b) = (inputs[0], inputs[1]);
                if self.nodes[a.0].requires_grad {
                    let da: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[b.0].values)
                        .map(|(&gi, &bi)| gi * bi)
                        .collect();
                    self.accumulate(a, &da);
                }
                if self.nodes[b.0].requires_grad {
                    let db: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[a.0].values)
                        .map(|(&gi, &ai)| gi * ai)
                        .collect();
                    self.accumulate(b, &db);
                }
            }
            Op::Scale(c) => {
                let da: Vec<f64> = g.iter().map(|x| x * c).collect();
                self.accumulate(inputs[0], &da);
            }
            Op::Relu => {
                let da: Vec<f64> = g
                    .iter()
                    .zip(&self.nodes[inputs[0].0].values)
                    .map(|(&gi, &x)| if x > 0.0 { gi } else { 0.0 })
                    .collect();
                self.accumulate(inputs[0], &da);
            }
            Op::RowSum => {
                let s = self.shape(inputs[0]).to_vec();
                let (n, m) = (s[0], s[1]);
                let mut da = vec![0.0; n * m];
                for i in 0..n {
                    for j in 0..m {
                        da[i * m + j] = g[i];
                    }
                }
                self.accumulate(inputs[0], &da);
            }
            Op::MeanRows => {
                let s = self.shape(inputs[0]).to_vec();
                let (n, d) = (s[0], s[1]);
                let mut da = vec![0.0; n * d];
                for i in 0..n {
                    for j in 0..d {
                        da[i * d + j] = g[j] / n as f64;
                    }
                }
                self.accumulate(inputs[0], &da);
            }
            Op::SumAll => {
                let da = vec![g[0]; self.nodes[inputs[0].0].values.len()];
                self.accumulate(inputs[0], &da);
            }
            Op::PickRow(row) => {
                let s = self.shape(inputs[0]).to_vec();
                let d = s[1];
                let mut da = vec![0.0; s[0] * d];
                da[row * d..(row + 1) * d].copy_from_slice(g);
                self.accumulate(inputs[0], &da);
            }
            Op::SoftmaxCrossEntropy(pairs) => {
                let s = self.shape(inputs[0]).to_vec();
                let classes = s[1];
                let v = self.nodes[inputs[0].0].values.clone();
                let mut da = vec![0.0; v.len()];
                let w = g[0] / pairs.len() as f64;
                for &(row, label) in pairs.iter() {
                    let p = softmax(&v[row * classes..(row + 1) * classes]);
                    for j in 0..classes {
                        let delta = if j == label { 1.0 } else { 0.0 };
                        da[row * classes + j] += w * (p[j] - delta);
                    }
                }
                self.accumulate(inputs[0], &da);
            }
            Op::SoftmaxProb { row, label } => {
                let s = self.shape(inputs[0]).to_vec();
                let classes = s[1];
                let v = self.nodes[inputs[0].0].values.clone();
                let p = softmax(&v[row * classes..(row + 1) * classes]);
                let py = p[*label];
                let mut da = vec![0.0; v.len()];
                for j in 0..classes {
                    let delta = if j == *label { 1.0 } else { 0.0 };
                    da[row * classes + j] = g[0] * py * (delta - p[j]);
                }
                self.accumulate(inputs[0], &da);
            }
            Op::L2Norm => {
                let norm = self.nodes[idx].values[0];
                if norm > EPS {
                    let da: Vec<f64> = self.nodes[inputs[0].0]
                        .values
                        .iter()
                        .map(|&x| g[0] * x / norm)
                        .collect();
                    self.accumulate(inputs[0], &da);
                }
            }
            Op::EdgeCosine(edges) => {
                let p = inputs[0];
                let d = self.shape(p)[1];
                let v = self.nodes[p.0].values.clone();
                let cos = self.nodes[idx].values.clone();
                let mut da = vec![0.0; v.len()];
                for (e, &(i, j)) in edges.iter().enumerate() {
                    let gi = g[e];
                    if gi == 0.0 {
                        continue;
                    }
                    let u = &v[i * d..(i + 1) * d];
                    let w = &v[j * d..(j + 1) * d];
                    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
                    let nw = w.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if nu < EPS || nw < EPS {
                        continue; // zero-vector convention: constant 0, no gradient
                    }
                    let c = cos[e];
                    for t in 0..d {
                        da[i * d + t] += gi * (w[t] / (nu * nw) - c * u[t] / (nu * nu));
                        da[j * d + t] += gi * (u[t] / (nu * nw) - c * w[t] / (nw * nw));
                    }
                }
                self.accumulate(p, &da);
            }
            Op::Clamp01 => {
                let da: Vec<f64> = g
                    .iter()
                    .zip(&self.nodes[inputs[0].0].values)
                    .map(|(&gi, &x)| if x > 0.0 && x < 1.0 { gi } else { 0.0 })
                    .collect();
                self.accumulate(inputs[0], &da);
            }
            Op::ScatterSym { edges, n } => {
                let (ev, sv) = (inputs[0], inputs[1]);
                if self.nodes[ev.0].requires_grad {
                    let mut de = vec![0.0; edges.len()];
                    for (e, &(i, j)) in edges.iter().enumerate() {
                        de[e] = g[i * n + j] + g[j * n + i];
                    }
                    self.accumulate(ev, &de);
                }
                if self.nodes[sv.0].requires_grad {
                    let ds: Vec<f64> = (0..*n).map(|i| g[i * n + i]).collect();
                    self.accumulate(sv, &ds);
                }
            }
            Op::IncidentMean { edges, n, pinned } => {
                let ev = inputs[0];
                if !self.nodes[ev.0].requires_grad {
                    return;
                }
                let mut counts = vec![0usize; *n];
                for &(i, j) in edges.iter() {
                    counts[i] += 1;
                    counts[j] += 1;
                }
                let mut de = vec![0.0; edges.len()];
                for (e, &(i, j)) in edges.iter().enumerate() {
                    if pinned[i].is_none() && counts[i] > 0 {
                        de[e] += g[i] / counts[i] as f64;
                    }
                    if pinned[j].is_none() && counts[j] > 0 {
                        de[e] += g[j] / counts[j] as f64;
                    }
                }
                self.accumulate(ev, &de);
            }
            Op::RsqrtMaxEps => {
                let da: Vec<f64> = g
                    .iter()
                    .zip(&self.nodes[inputs[0].0].values)
                    .map(|(&gi, &x)| {
                        if x > EPS {
                            gi * (-0.5) * x.powf(-1.5)
                        } else {
                            0.0
                        }
                    })
                    .collect();
                self.accumulate(inputs[0], &da);
            }
            Op::RecipMaxEps => {
                let da: Vec<f64> = g
                    .iter()
                    .zip(&self.nodes[inputs[0].0].values)
                    .map(|(&gi, &x)| if x > EPS { -gi / (x * x) } else { 0.0 })
                    .collect();
                self.accumulate(inputs[0], &da);
            }
            Op::MulRowCol => {
                let (w, r) = (inputs[0], inputs[1]);
                let n = self.shape(w)[0];
                let wv = self.nodes[w.0].values.clone();
                let rv = self.nodes[r.0].values.clone();
                if self.nodes[w.0].requires_grad {
                    let mut dw = vec![0.0; n * n];
                    for i in 0..n {
                        for j in 0..n {
                            dw[i * n + j] = g[i * n + j] * rv[i] * rv[j];
                        }
                    }
                    self.accumulate(w, &dw);
                }
                if self.nodes[r.0].requires_grad {
                    let mut dr = vec![0.0; n];
                    for i in 0..n {
                        for j in 0..n {
                            // d/dr_i of W_ij r_i r_j (row) and W_ji r_j r_i (col)
                            dr[i] += g[i * n + j] * wv[i * n + j] * rv[j];
                            dr[i] += g[j * n + i] * wv[j * n + i] * rv[j];
                        }
                    }
                    self.accumulate(r, &dr);
                }
            }
            Op::ScaleRows => {
                let (x, v) = (inputs[0], inputs[1]);
                let s = self.shape(x).to_vec();
                let (n, d) = (s[0], s[1]);
                let vv = self.nodes[v.0].values.clone();
                if self.nodes[x.0].requires_grad {
                    let mut dx = vec![0.0; n * d];
                    for i in 0..n {
                        for j in 0..d {
                            dx[i * d + j] = g[i * d + j] * vv[i];
                        }
                    }
                    self.accumulate(x, &dx);
                }
                if self.nodes[v.0].requires_grad {
                    let xv = self.nodes[x.0].values.clone();
                    let mut dv = vec![0.0; n];
                    for i in 0..n {
                        for j in 0..d {
                            dv[i] += g[i * d + j] * xv[i * d + j];
                        }
                    }
                    self.accumulate(v, &dv);
                }
            }
        }
    }

    /// Adds each bound parameter's tape gradient into its [`Param::grad`]
    /// buffer. Parameters the loss never touched are skipped.
    pub fn harvest_grads(&self, params: &mut [Param]) {
        for &(id, index) in &self.bindings {
            if let Some(g) = self.nodes[id.0].grad.as_ref() {
                let p = &mut params[index];
                debug_assert_eq!(p.grad.len(), g.len());
                for (pg, gi) in p.grad.iter_mut().zip(g) {
                    *pg += gi;
                }
            }
        }
    }

    /// True when every recorded value is finite.
    pub fn all_finite(&self) -> bool {
        self.nodes
            .iter()
            .all(|n| n.values.iter().all(|v| v.is_finite()))
    }
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&x| (x - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn log_softmax_at(z: &[f64], label: usize) -> f64 {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = z.iter().map(|&x| (x - m).exp()).sum::<f64>().ln() + m;
    z[label] - lse
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent triple-loop matrix product.
    fn naive_matmul(a: &[f64], b: &[f64], r: usize, k: usize, c: usize) -> Vec<f64> {
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                let mut acc = 0.0;
                for kk in 0..k {
                    acc += a[i * k + kk] * b[kk * c + j];
                }
                out[i * c + j] = acc;
            }
        }
        out
    }

    fn lcg_values(n: usize, seed: u64) -> Vec<f64> {
        let mut state = seed;
        (0..n)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            })
            .collect()
    }

    #[test]
    fn matmul_identity() {
        let mut t = Tape::new();
        let i2 = t.input(vec![1.0, 0.0, 0.0, 1.0], vec![2, 2]);
        let m = t.input(vec![1.0, 2.0, 3.0, 4.0], vec![2, 2]);
        let out = t.matmul(i2, m).unwrap();
        assert_eq!(t.values(out), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn matmul_orthogonal_pick() {
        let mut t = Tape::new();
        let a = t.input(vec![1.0, 0.0], vec![1, 2]);
        let b = t.input(vec![0.0, 5.0], vec![2, 1]);
        let out = t.matmul(a, b).unwrap();
        assert_eq!(t.values(out), &[0.0]);
    }

    #[test]
    fn matmul_matches_triple_loop_oracle() {
        let (r, k, c) = (3, 4, 2);
        let av = lcg_values(r * k, 11);
        let bv = lcg_values(k * c, 22);
        let expected = naive_matmul(&av, &bv, r, k, c);
        let mut t = Tape::new();
        let a = t.input(av, vec![r, k]);
        let b = t.input(bv, vec![k, c]);
        let out = t.matmul(a, b).unwrap();
        for (x, y) in t.values(out).iter().zip(&expected) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn matmul_shape_mismatch_names_both_shapes() {
        let mut t = Tape::new();
        let a = t.input(vec![0.0; 6], vec![2, 3]);
        let b = t.input(vec![0.0; 4], vec![2, 2]);
        let err = t.matmul(a, b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("[2, 2]"), "{msg}");
    }

    #[test]
    fn cross_entropy_uniform_logits_is_ln_c() {
        let mut t = Tape::new();
        let logits = t.input(vec![0.3; 4], vec![1, 4]);
        let loss = t.softmax_cross_entropy(logits, &[(0, 2)]).unwrap();
        assert!((t.scalar(loss) - 4.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_saturated_is_near_zero() {
        let mut t = Tape::new();
        let logits = t.input(vec![1000.0, 0.0, 0.0], vec![1, 3]);
        let loss = t.softmax_cross_entropy(logits, &[(0, 0)]).unwrap();
        assert!(t.scalar(loss) < 1e-9);
        assert!(t.scalar(loss) >= 0.0);
    }

    #[test]
    fn cross_entropy_matches_direct_formula_oracle() {
        // Direct high-precision formula: -z_y + ln(sum exp z_j), no
        // max-subtraction, evaluated per row then averaged.
        let logits = lcg_values(15, 7);
        let labels = [2usize, 0, 1, 2, 1];
        let mut expected = 0.0;
        for (row, &y) in labels.iter().enumerate() {
            let z = &logits[row * 3..(row + 1) * 3];
            let lse = z.iter().map(|x| x.exp()).sum::<f64>().ln();
            expected += lse - z[y];
        }
        expected /= labels.len() as f64;

        let mut t = Tape::new();
        let l = t.input(logits, vec![5, 3]);
        let pairs: Vec<(usize, usize)> = labels.iter().enumerate().map(|(i, &y)| (i, y)).collect();
        let loss = t.softmax_cross_entropy(l, &pairs).unwrap();
        assert!((t.scalar(loss) - expected).abs() < 1e-10);
    }

    #[test]
    fn cross_entropy_rejects_label_out_of_range() {
        let mut t = Tape::new();
        let logits = t.input(vec![0.0; 3], vec![1, 3]);
        assert!(t.softmax_cross_entropy(logits, &[(0, 3)]).is_err());
    }

    #[test]
    fn backward_sum_gives_ones() {
        let mut t = Tape::new();
        let x = t.grad_leaf(vec![1.0, -2.0, 3.0], vec![3, 1]);
        let s = t.sum_all(x);
        t.backward(s).unwrap();
        assert_eq!(t.grad(x).unwrap(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn backward_square_gives_2x() {
        let mut t = Tape::new();
        let x = t.grad_leaf(vec![3.0], vec![1, 1]);
        let y = t.mul(x, x).unwrap();
        let s = t.sum_all(y);
        t.backward(s).unwrap();
        assert_eq!(t.grad(x).unwrap(), &[6.0]);
    }

    #[test]
    fn backward_rejects_non_scalar_loss() {
        let mut t = Tape::new();
        let x = t.grad_leaf(vec![1.0, 2.0], vec![2, 1]);
        assert!(t.backward(x).is_err());
    }

    #[test]
    fn fanout_gradients_accumulate_exactly_twice() {
        // loss = f(x) + f(x) with f = sum(x*x) must give exactly 2x the
        // gradient of f.
        let grad_once = {
            let mut t = Tape::new();
            let x = t.grad_leaf(vec![1.5, -0.5], vec![2, 1]);
            let y = t.mul(x, x).unwrap();
            let s = t.sum_all(y);
            t.backward(s).unwrap();
            t.grad(x).unwrap().to_vec()
        };
        let grad_twice = {
            let mut t = Tape::new();
            let x = t.grad_leaf(vec![1.5, -0.5], vec![2, 1]);
            let y1 = t.mul(x, x).unwrap();
            let s1 = t.sum_all(y1);
            let y2 = t.mul(x, x).unwrap();
            let s2 = t.sum_all(y2);
            let total = t.add(s1, s2).unwrap();
            t.backward(total).unwrap();
            t.grad(x).unwrap().to_vec()
        };
        for (a, b) in grad_once.iter().zip(&grad_twice) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn softmax_prob_uniform_two_classes() {
        let mut t = Tape::new();
        let logits = t.input(vec![0.7, 0.7], vec![1, 2]);
        let p = t.softmax_prob(logits, 0, 1).unwrap();
        assert!((t.scalar(p) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn edge_cosine_matches_plain_cosine() {
        let p = lcg_values(12, 3);
        let mut t = Tape::new();
        let pt = t.input(p.clone(), vec![4, 3]);
        let edges = Rc::new(vec![(0, 1), (2, 3), (1, 3)]);
        let c = t.edge_cosine(pt, edges.clone());
        for (e, &(i, j)) in edges.iter().enumerate() {
            let expect = crate::tensor::cosine_similarity(&p[i * 3..i * 3 + 3], &p[j * 3..j * 3 + 3]);
            assert!((t.values(c)[e] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn scatter_sym_roundtrip_and_grad() {
        let mut t = Tape::new();
        let ev = t.grad_leaf(vec![0.25, 0.5], vec![2]);
        let sv = t.input(vec![1.0, 1.0, 1.0], vec![3]);
        let edges = Rc::new(vec![(0, 1), (1, 2)]);
        let w = t.scatter_sym(ev, sv, edges, 3);
        assert_eq!(
            t.values(w),
            &[1.0, 0.25, 0.0, 0.25, 1.0, 0.5, 0.0, 0.5, 1.0]
        );
        let s = t.sum_all(w);
        t.backward(s).unwrap();
        // each edge value appears twice in the symmetric matrix
        assert_eq!(t.grad(ev).unwrap(), &[2.0, 2.0]);
    }

    #[test]
    fn incident_mean_handles_pins_and_isolated_nodes() {
        let mut t = Tape::new();
        let ev = t.input(vec![0.2, 0.8], vec![2]);
        let edges = Rc::new(vec![(0, 1), (0, 2)]);
        let pinned = Rc::new(vec![None, Some(1.0), None, None]);
        let m = t.incident_mean(ev, edges, 4, pinned);
        // node 0: mean(0.2, 0.8) = 0.5; node 1 pinned to 1; node 2: 0.8;
        // node 3 isolated -> 1.
        assert_eq!(t.values(m), &[0.5, 1.0, 0.8, 1.0]);
    }
}
