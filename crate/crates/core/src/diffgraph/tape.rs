//! Eagerly evaluated reverse-mode tape.
//!
//! Every operation computes its value immediately and records its parents.
//! Nodes are appended in creation order, so reverse index order is a valid
//! topological order for the backward sweep.

use crate::diffgraph::params::{Gradients, ParamId, ParameterSet};
use crate::diffgraph::tensor::{gemm_acc, gemm_nt_acc, gemm_tn_acc, Tensor};
use crate::error::{Error, Result};
use crate::kg::{OperatorSet, SparseAdjacency};

/// Floor applied inside [`Tape::log`].
pub const LOG_FLOOR: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op<'o> {
    Constant,
    Param(ParamId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Shift(NodeId),
    ScaleBy(NodeId, NodeId),
    Dot(NodeId, NodeId),
    MatMul(NodeId, NodeId),
    Affine(NodeId, NodeId, NodeId),
    Concat(Vec<NodeId>),
    SliceRows(NodeId, usize),
    Embed(NodeId, Vec<usize>),
    GatherCols(NodeId, Vec<usize>),
    PickRows(NodeId, Vec<usize>),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Softmax(NodeId),
    Log(NodeId, f64),
    SumAll(NodeId),
    ColSum(NodeId),
    SpmvT(&'o SparseAdjacency, NodeId),
    MixSpmvT(&'o OperatorSet, NodeId, NodeId),
}

#[derive(Debug)]
struct Node<'o> {
    value: Option<Tensor>,
    shape: (usize, usize),
    op: Op<'o>,
    needs_grad: bool,
}

/// A single-use computation record. Parameters are borrowed from a
/// [`ParameterSet`]; sparse operators are borrowed constants.
#[derive(Debug)]
pub struct Tape<'p, 'o> {
    params: &'p ParameterSet,
    nodes: Vec<Node<'o>>,
    finished: bool,
}

fn shape_err(op: &str, a: (usize, usize), b: (usize, usize)) -> Error {
    Error::Dimension(format!("{op}: {}×{} vs {}×{}", a.0, a.1, b.0, b.1))
}

impl<'p, 'o> Tape<'p, 'o> {
    pub fn new(params: &'p ParameterSet) -> Self {
        Self {
            params,
            nodes: Vec::new(),
            finished: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        let node = &self.nodes[id.0];
        match (&node.value, &node.op) {
            (Some(v), _) => v,
            (None, Op::Param(p)) => self.params.get(*p),
            (None, _) => unreachable!("only parameter nodes borrow their value"),
        }
    }

    pub fn shape(&self, id: NodeId) -> (usize, usize) {
        self.nodes[id.0].shape
    }

    pub fn scalar(&self, id: NodeId) -> Option<f64> {
        self.value(id).item()
    }

    fn push(&mut self, value: Tensor, op: Op<'o>, parents: &[NodeId]) -> NodeId {
        let needs_grad = parents.iter().any(|p| self.nodes[p.0].needs_grad);
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            shape: value.shape(),
            value: Some(value),
            op,
            needs_grad,
        });
        id
    }

    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Constant, &[])
    }

    pub fn param(&mut self, id: ParamId) -> NodeId {
        let shape = self.params.get(id).shape();
        let node = NodeId(self.nodes.len());
        self.nodes.push(Node {
            value: None,
            shape,
            op: Op::Param(id),
            needs_grad: true,
        });
        node
    }

    fn zip_map(&mut self, name: &str, a: NodeId, b: NodeId, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(shape_err(name, va.shape(), vb.shape()));
        }
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| f(*x, *y)).collect();
        Tensor::from_vec(va.rows(), va.cols(), data)
    }

    fn map(&self, a: NodeId, f: impl Fn(f64) -> f64) -> Tensor {
        let va = self.value(a);
        let data = va.data().iter().map(|x| f(*x)).collect();
        Tensor::from_vec(va.rows(), va.cols(), data).expect("same shape")
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.zip_map("add", a, b, |x, y| x + y)?;
        Ok(self.push(v, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.zip_map("sub", a, b, |x, y| x - y)?;
        Ok(self.push(v, Op::Sub(a, b), &[a, b]))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.zip_map("mul", a, b, |x, y| x * y)?;
        Ok(self.push(v, Op::Mul(a, b), &[a, b]))
    }

    /// Multiplies by a constant.
    pub fn scale(&mut self, a: NodeId, s: f64) -> NodeId {
        let v = self.map(a, |x| x * s);
        self.push(v, Op::Scale(a, s), &[a])
    }

    /// Adds a constant to every entry.
    pub fn shift(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.map(a, |x| x + c);
        self.push(v, Op::Shift(a), &[a])
    }

    /// Multiplies every entry of `a` by the 1×1 node `s`.
    pub fn scale_by(&mut self, a: NodeId, s: NodeId) -> Result<NodeId> {
        let sv = self
            .scalar(s)
            .ok_or_else(|| shape_err("scale_by", self.shape(s), (1, 1)))?;
        let v = self.map(a, |x| x * sv);
        Ok(self.push(v, Op::ScaleBy(a, s), &[a, s]))
    }

    /// Sum of elementwise products of two equally shaped tensors, as 1×1.
    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(shape_err("dot", va.shape(), vb.shape()));
        }
        let s = va.data().iter().zip(vb.data()).map(|(x, y)| x * y).sum();
        Ok(self.push(Tensor::scalar(s), Op::Dot(a, b), &[a, b]))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.cols() != vb.rows() {
            return Err(shape_err("matmul", va.shape(), vb.shape()));
        }
        let mut out = Tensor::zeros(va.rows(), vb.cols());
        gemm_acc(va, vb, &mut out);
        Ok(self.push(out, Op::MatMul(a, b), &[a, b]))
    }

    /// `w · x + b` with `b` a column broadcast over the columns of `x`.
    pub fn affine(&mut self, w: NodeId, x: NodeId, b: NodeId) -> Result<NodeId> {
        let (vw, vx, vb) = (self.value(w), self.value(x), self.value(b));
        if vw.cols() != vx.rows() {
            return Err(shape_err("affine", vw.shape(), vx.shape()));
        }
        if vb.shape() != (vw.rows(), 1) {
            return Err(shape_err("affine bias", vb.shape(), (vw.rows(), 1)));
        }
        let mut out = Tensor::zeros(vw.rows(), vx.cols());
        let cols = vx.cols();
        for r in 0..vw.rows() {
            let bias = vb.data()[r];
            out.data_mut()[r * cols..(r + 1) * cols].fill(bias);
        }
        gemm_acc(vw, vx, &mut out);
        Ok(self.push(out, Op::Affine(w, x, b), &[w, x, b]))
    }

    /// Stacks tensors with equal column counts vertically.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Argument("concat of nothing".into()))?;
        let cols = self.shape(*first).1;
        let mut data = Vec::new();
        let mut rows = 0;
        for p in parts {
            let v = self.value(*p);
            if v.cols() != cols {
                return Err(shape_err("concat", self.shape(*first), v.shape()));
            }
            rows += v.rows();
            data.extend_from_slice(v.data());
        }
        let v = Tensor::from_vec(rows, cols, data)?;
        Ok(self.push(v, Op::Concat(parts.to_vec()), parts))
    }

    pub fn slice_rows(&mut self, a: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let va = self.value(a);
        if start + len > va.rows() {
            return Err(Error::Dimension(format!(
                "slice_rows {start}..{} of {} rows",
                start + len,
                va.rows()
            )));
        }
        let c = va.cols();
        let data = va.data()[start * c..(start + len) * c].to_vec();
        let v = Tensor::from_vec(len, c, data)?;
        Ok(self.push(v, Op::SliceRows(a, start), &[a]))
    }

    /// Looks up rows of `table` and lays them out as columns: the result is
    /// `table.cols × ids.len()`.
    pub fn embed(&mut self, table: NodeId, ids: &[usize]) -> Result<NodeId> {
        let vt = self.value(table);
        let (rows, dim) = vt.shape();
        let mut out = Tensor::zeros(dim, ids.len());
        for (c, &id) in ids.iter().enumerate() {
            if id >= rows {
                return Err(Error::Index(format!("embedding row {id} of {rows}")));
            }
            for (d, v) in vt.row(id).iter().enumerate() {
                out.set(d, c, *v);
            }
        }
        Ok(self.push(out, Op::Embed(table, ids.to_vec()), &[table]))
    }

    /// Output column c is column `ids[c]` of `a`.
    pub fn gather_cols(&mut self, a: NodeId, ids: &[usize]) -> Result<NodeId> {
        let va = self.value(a);
        let mut out = Tensor::zeros(va.rows(), ids.len());
        for (c, &src) in ids.iter().enumerate() {
            if src >= va.cols() {
                return Err(Error::Index(format!("column {src} of {}", va.cols())));
            }
            for r in 0..va.rows() {
                out.set(r, c, va.get(r, src));
            }
        }
        Ok(self.push(out, Op::GatherCols(a, ids.to_vec()), &[a]))
    }

    /// `1 × cols` row holding `a[ids[c], c]` for every column c.
    pub fn pick_rows(&mut self, a: NodeId, ids: &[usize]) -> Result<NodeId> {
        let va = self.value(a);
        if ids.len() != va.cols() {
            return Err(Error::Dimension(format!(
                "pick_rows: {} indices for {} columns",
                ids.len(),
                va.cols()
            )));
        }
        let mut data = Vec::with_capacity(ids.len());
        for (c, &r) in ids.iter().enumerate() {
            if r >= va.rows() {
                return Err(Error::Index(format!("row {r} of {}", va.rows())));
            }
            data.push(va.get(r, c));
        }
        let v = Tensor::from_vec(1, ids.len(), data)?;
        Ok(self.push(v, Op::PickRows(a, ids.to_vec()), &[a]))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.map(a, |x| 1.0 / (1.0 + (-x).exp()));
        self.push(v, Op::Sigmoid(a), &[a])
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.map(a, f64::tanh);
        self.push(v, Op::Tanh(a), &[a])
    }

    /// Column-wise softmax with max subtraction.
    pub fn softmax(&mut self, a: NodeId) -> NodeId {
        let va = self.value(a);
        let (rows, cols) = va.shape();
        let mut out = Tensor::zeros(rows, cols);
        for c in 0..cols {
            let max = (0..rows).map(|r| va.get(r, c)).fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for r in 0..rows {
                let e = (va.get(r, c) - max).exp();
                out.set(r, c, e);
                total += e;
            }
            for r in 0..rows {
                out.set(r, c, out.get(r, c) / total);
            }
        }
        self.push(out, Op::Softmax(a), &[a])
    }

    /// `ln(max(x, floor))` elementwise.
    pub fn log(&mut self, a: NodeId, floor: f64) -> NodeId {
        let v = self.map(a, |x| x.max(floor).ln());
        self.push(v, Op::Log(a, floor), &[a])
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::SumAll(a), &[a])
    }

    /// Mean of all entries, as 1×1.
    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let n = self.value(a).len().max(1) as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    /// `1 × cols` row of column sums.
    pub fn col_sum(&mut self, a: NodeId) -> NodeId {
        let va = self.value(a);
        let mut out = Tensor::zeros(1, va.cols());
        for r in 0..va.rows() {
            for (o, x) in out.data_mut().iter_mut().zip(va.row(r)) {
                *o += x;
            }
        }
        self.push(out, Op::ColSum(a), &[a])
    }

    /// `Aᵀ · x` for a constant sparse operator.
    pub fn spmv_t(&mut self, adj: &'o SparseAdjacency, x: NodeId) -> Result<NodeId> {
        let vx = self.value(x);
        if vx.rows() != adj.dim() {
            return Err(shape_err("spmv_t", (adj.dim(), adj.dim()), vx.shape()));
        }
        let out = spmv_t_dense(adj, vx);
        Ok(self.push(out, Op::SpmvT(adj, x), &[x]))
    }

    /// `Σ_k coeffs[k] ⊙ (A_kᵀ · x)` where `coeffs` is `K × cols(x)` (one
    /// mixture per column) or `K × 1` (shared by all columns).
    pub fn mix_spmv_t(&mut self, ops: &'o OperatorSet, coeffs: NodeId, x: NodeId) -> Result<NodeId> {
        let out = mix_spmv_t(ops, self.value(coeffs), self.value(x))?;
        Ok(self.push(out, Op::MixSpmvT(ops, coeffs, x), &[coeffs, x]))
    }

    /// Reverse sweep from a 1×1 node. A tape supports exactly one sweep.
    pub fn backward(&mut self, loss: NodeId) -> Result<Gradients> {
        if self.finished {
            return Err(Error::Contract(
                "backward already ran on this tape; higher-order derivatives are not supported".into(),
            ));
        }
        if self.shape(loss) != (1, 1) {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got {}×{}",
                self.shape(loss).0,
                self.shape(loss).1
            )));
        }
        self.finished = true;
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::scalar(1.0));
        let mut param_grads: Vec<Option<Tensor>> = vec![None; self.params.len()];

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].needs_grad {
                continue;
            }
            self.propagate(i, g, &mut grads, &mut param_grads);
        }
        Ok(Gradients::from_vec(param_grads))
    }

    fn acc<'g>(&self, grads: &'g mut [Option<Tensor>], id: NodeId) -> Option<&'g mut Tensor> {
        if !self.nodes[id.0].needs_grad {
            return None;
        }
        let (r, c) = self.shape(id);
        Some(grads[id.0].get_or_insert_with(|| Tensor::zeros(r, c)))
    }

    fn propagate(
        &self,
        i: usize,
        g: Tensor,
        grads: &mut [Option<Tensor>],
        param_grads: &mut [Option<Tensor>],
    ) {
        let out = self.value(NodeId(i));
        match &self.nodes[i].op {
            Op::Constant => {}
            Op::Param(p) => match &mut param_grads[p.0] {
                Some(t) => t.add_assign(&g),
                slot @ None => *slot = Some(g),
            },
            Op::Add(a, b) => {
                if let Some(t) = self.acc(grads, *a) {
                    t.add_assign(&g);
                }
                if let Some(t) = self.acc(grads, *b) {
                    t.add_assign(&g);
                }
            }
            Op::Sub(a, b) => {
                if let Some(t) = self.acc(grads, *a) {
                    t.add_assign(&g);
                }
                if let Some(t) = self.acc(grads, *b) {
                    for (o, x) in t.data_mut().iter_mut().zip(g.data()) {
                        *o -= x;
                    }
                }
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                if let Some(t) = self.acc(grads, *a) {
                    for ((o, x), y) in t.data_mut().iter_mut().zip(g.data()).zip(vb.data()) {
                        *o += x * y;
                    }
                }
                if let Some(t) = self.acc(grads, *b) {
                    for ((o, x), y) in t.data_mut().iter_mut().zip(g.data()).zip(va.data()) {
                        *o += x * y;
                    }
                }
            }
            Op::Scale(a, s) => {
                if let Some(t) = self.acc(grads, *a) {
                    for (o, x) in t.data_mut().iter_mut().zip(g.data()) {
                        *o += s * x;
                    }
                }
            }
            Op::Shift(a) => {
                if let Some(t) = self.acc(grads, *a) {
                    t.add_assign(&g);
                }
            }
            Op::ScaleBy(a, s) => {
                let sv = self.value(*s).data()[0];
                let va = self.value(*a);
                if let Some(t) = self.acc(grads, *a) {
                    for (o, x) in t.data_mut().iter_mut().zip(g.data()) {
                        *o += sv * x;
                    }
                }
                if let Some(t) = self.acc(grads, *s) {
                    t.data_mut()[0] += g.data().iter().zip(va.data()).map(|(x, y)| x * y).sum::<f64>();
                }
            }
            Op::Dot(a, b) => {
                let gs = g.data()[0];
                let (va, vb) = (self.value(*a), self.value(*b));
                if let Some(t) = self.acc(grads, *a) {
                    for (o, y) in t.data_mut().iter_mut().zip(vb.data()) {
                        *o += gs * y;
                    }
                }
                if let Some(t) = self.acc(grads, *b) {
                    for (o, x) in t.data_mut().iter_mut().zip(va.data()) {
                        *o += gs * x;
                    }
                }
            }
            Op::MatMul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                if let Some(t) = self.acc(grads, *a) {
                    gemm_nt_acc(&g, vb, t);
                }
                if let Some(t) = self.acc(grads, *b) {
                    gemm_tn_acc(va, &g, t);
                }
            }
            Op::Affine(w, x, b) => {
                let (vw, vx) = (self.value(*w), self.value(*x));
                if let Some(t) = self.acc(grads, *w) {
                    gemm_nt_acc(&g, vx, t);
                }
                if let Some(t) = self.acc(grads, *x) {
                    gemm_tn_acc(vw, &g, t);
                }
                if let Some(t) = self.acc(grads, *b) {
                    for r in 0..g.rows() {
                        t.data_mut()[r] += g.row(r).iter().sum::<f64>();
                    }
                }
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for p in parts {
                    let len = self.value(*p).len();
                    if let Some(t) = self.acc(grads, *p) {
                        for (o, x) in t.data_mut().iter_mut().zip(&g.data()[offset..offset + len]) {
                            *o += x;
                        }
                    }
                    offset += len;
                }
            }
            Op::SliceRows(a, start) => {
                let c = g.cols();
                if let Some(t) = self.acc(grads, *a) {
                    let dst = &mut t.data_mut()[start * c..start * c + g.len()];
                    for (o, x) in dst.iter_mut().zip(g.data()) {
                        *o += x;
                    }
                }
            }
            Op::Embed(table, ids) => {
                if let Some(t) = self.acc(grads, *table) {
                    let dim = g.rows();
                    for (c, &id) in ids.iter().enumerate() {
                        for d in 0..dim {
                            t.data_mut()[id * dim + d] += g.get(d, c);
                        }
                    }
                }
            }
            Op::GatherCols(a, ids) => {
                if let Some(t) = self.acc(grads, *a) {
                    for (c, &src) in ids.iter().enumerate() {
                        for r in 0..g.rows() {
                            let v = t.get(r, src) + g.get(r, c);
                            t.set(r, src, v);
                        }
                    }
                }
            }
            Op::PickRows(a, ids) => {
                if let Some(t) = self.acc(grads, *a) {
                    for (c, &r) in ids.iter().enumerate() {
                        let v = t.get(r, c) + g.data()[c];
                        t.set(r, c, v);
                    }
                }
            }
            Op::Sigmoid(a) => {
                if let Some(t) = self.acc(grads, *a) {
                    for ((o, x), y) in t.data_mut().iter_mut().zip(g.data()).zip(out.data()) {
                        *o += x * y * (1.0 - y);
                    }
                }
            }
            Op::Tanh(a) => {
                if let Some(t) = self.acc(grads, *a) {
                    for ((o, x), y) in t.data_mut().iter_mut().zip(g.data()).zip(out.data()) {
                        *o += x * (1.0 - y * y);
                    }
                }
            }
            Op::Softmax(a) => {
                if let Some(t) = self.acc(grads, *a) {
                    let (rows, cols) = out.shape();
                    for c in 0..cols {
                        let inner: f64 = (0..rows).map(|r| g.get(r, c) * out.get(r, c)).sum();
                        for r in 0..rows {
                            let v = t.get(r, c) + out.get(r, c) * (g.get(r, c) - inner);
                            t.set(r, c, v);
                        }
                    }
                }
            }
            Op::Log(a, floor) => {
                let va = self.value(*a);
                if let Some(t) = self.acc(grads, *a) {
                    for ((o, x), v) in t.data_mut().iter_mut().zip(g.data()).zip(va.data()) {
                        if *v > *floor {
                            *o += x / v;
                        }
                    }
                }
            }
            Op::SumAll(a) => {
                let gs = g.data()[0];
                if let Some(t) = self.acc(grads, *a) {
                    for o in t.data_mut() {
                        *o += gs;
                    }
                }
            }
            Op::ColSum(a) => {
                if let Some(t) = self.acc(grads, *a) {
                    let cols = g.cols();
                    for r in 0..t.rows() {
                        for (o, x) in t.data_mut()[r * cols..(r + 1) * cols].iter_mut().zip(g.data()) {
                            *o += x;
                        }
                    }
                }
            }
            Op::SpmvT(adj, x) => {
                if let Some(t) = self.acc(grads, *x) {
                    spmv_acc(adj, &g, t);
                }
            }
            Op::MixSpmvT(ops, coeffs, x) => {
                let (va, vx) = (self.value(*coeffs), self.value(*x));
                let need_a = self.nodes[coeffs.0].needs_grad;
                let need_x = self.nodes[x.0].needs_grad;
                let mut ga = need_a.then(|| Tensor::zeros(va.rows(), va.cols()));
                let mut gx = need_x.then(|| Tensor::zeros(vx.rows(), vx.cols()));
                mix_spmv_t_backward(ops, va, vx, &g, ga.as_mut(), gx.as_mut());
                if let (Some(ga), Some(t)) = (ga, self.acc(grads, *coeffs)) {
                    t.add_assign(&ga);
                }
                if let (Some(gx), Some(t)) = (gx, self.acc(grads, *x)) {
                    t.add_assign(&gx);
                }
            }
        }
    }
}

fn spmv_t_dense(adj: &SparseAdjacency, x: &Tensor) -> Tensor {
    let (n, c) = x.shape();
    let mut out = Tensor::zeros(n, c);
    if adj.is_identity() {
        out.data_mut().copy_from_slice(x.data());
        return out;
    }
    for &(i, j) in adj.coords() {
        let (i, j) = (i as usize, j as usize);
        let src = &x.data()[i * c..(i + 1) * c];
        let dst = &mut out.data_mut()[j * c..(j + 1) * c];
        for (o, v) in dst.iter_mut().zip(src) {
            *o += v;
        }
    }
    out
}

/// `t += A · g`.
fn spmv_acc(adj: &SparseAdjacency, g: &Tensor, t: &mut Tensor) {
    let c = g.cols();
    if adj.is_identity() {
        t.add_assign(g);
        return;
    }
    for &(i, j) in adj.coords() {
        let (i, j) = (i as usize, j as usize);
        let src = &g.data()[j * c..(j + 1) * c];
        let dst = &mut t.data_mut()[i * c..(i + 1) * c];
        for (o, v) in dst.iter_mut().zip(src) {
            *o += v;
        }
    }
}

fn active_rows(x: &Tensor) -> Vec<bool> {
    (0..x.rows()).map(|r| x.row(r).iter().any(|v| *v != 0.0)).collect()
}

/// Forward kernel shared by the tape and by gradient-free scoring.
pub fn mix_spmv_t(ops: &OperatorSet, coeffs: &Tensor, x: &Tensor) -> Result<Tensor> {
    let (n, c) = x.shape();
    if n != ops.entity_count() {
        return Err(shape_err("mix_spmv_t operand", (ops.entity_count(), ops.entity_count()), x.shape()));
    }
    if coeffs.rows() != ops.len() || (coeffs.cols() != c && coeffs.cols() != 1) {
        return Err(shape_err("mix_spmv_t coefficients", coeffs.shape(), (ops.len(), c)));
    }
    let broadcast = coeffs.cols() == 1;
    let active = active_rows(x);
    let mut out = Tensor::zeros(n, c);
    let mut coef_row = vec![0.0; c];
    for (k, op) in ops.operators().iter().enumerate() {
        if broadcast {
            coef_row.fill(coeffs.data()[k]);
        } else {
            coef_row.copy_from_slice(coeffs.row(k));
        }
        if coef_row.iter().all(|a| *a == 0.0) {
            continue;
        }
        let mut apply = |i: usize, j: usize| {
            let src = &x.data()[i * c..(i + 1) * c];
            let dst = &mut out.data_mut()[j * c..(j + 1) * c];
            for ((o, v), a) in dst.iter_mut().zip(src).zip(&coef_row) {
                *o += a * v;
            }
        };
        if op.is_identity() {
            for i in (0..n).filter(|i| active[*i]) {
                apply(i, i);
            }
        } else {
            for &(i, j) in op.coords() {
                if active[i as usize] {
                    apply(i as usize, j as usize);
                }
            }
        }
    }
    Ok(out)
}

fn mix_spmv_t_backward(
    ops: &OperatorSet,
    coeffs: &Tensor,
    x: &Tensor,
    g: &Tensor,
    mut ga: Option<&mut Tensor>,
    mut gx: Option<&mut Tensor>,
) {
    let (n, c) = x.shape();
    let broadcast = coeffs.cols() == 1;
    let active = active_rows(x);
    let mut coef_row = vec![0.0; c];
    let mut acc_row = vec![0.0; c];
    for (k, op) in ops.operators().iter().enumerate() {
        if broadcast {
            coef_row.fill(coeffs.data()[k]);
        } else {
            coef_row.copy_from_slice(coeffs.row(k));
        }
        acc_row.fill(0.0);
        let mut visit = |i: usize, j: usize| {
            let gj = &g.data()[j * c..(j + 1) * c];
            if ga.is_some() && active[i] {
                let xi = &x.data()[i * c..(i + 1) * c];
                for ((s, gv), xv) in acc_row.iter_mut().zip(gj).zip(xi) {
                    *s += gv * xv;
                }
            }
            if let Some(gx) = gx.as_deref_mut() {
                let dst = &mut gx.data_mut()[i * c..(i + 1) * c];
                for ((o, gv), a) in dst.iter_mut().zip(gj).zip(&coef_row) {
                    *o += a * gv;
                }
            }
        };
        if op.is_identity() {
            for i in 0..n {
                visit(i, i);
            }
        } else {
            for &(i, j) in op.coords() {
                visit(i as usize, j as usize);
            }
        }
        if let Some(ga) = ga.as_deref_mut() {
            if broadcast {
                ga.data_mut()[k] += acc_row.iter().sum::<f64>();
            } else {
                for (o, s) in ga.data_mut()[k * c..(k + 1) * c].iter_mut().zip(&acc_row) {
                    *o += s;
                }
            }
        }
    }
}
