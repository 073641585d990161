//! Reverse-mode autodiff over 2-D `f64` arrays.
//!
//! A [`Tape`] records the forward computation as a flat list of nodes;
//! [`Tape::backward`] walks it in reverse, pushing gradients to input
//! nodes and accumulating parameter gradients straight into a flat
//! [`GradStore`] that mirrors the [`ParamStore`](super::ParamStore)
//! layout. Nodes own their values, so a finished tape can also serve as a
//! pure forward pass (build it, read the output, drop it).

use ndarray::{Array1, Array2, Axis};

use super::{ParamId, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(pub(crate) usize);

/// Flat gradient buffer matching a `ParamStore`'s layout.
#[derive(Debug, Clone)]
pub struct GradStore {
    data: Vec<f64>,
}

impl GradStore {
    pub fn zeros(len: usize) -> Self {
        GradStore { data: vec![0.0; len] }
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn reset(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    fn add_into(&mut self, store: &ParamStore, id: ParamId, grad: &Array2<f64>) {
        let range = store.offset_range(id);
        let slice = &mut self.data[range];
        for (dst, src) in slice.iter_mut().zip(grad.iter()) {
            *dst += src;
        }
    }

    fn add_row_into(&mut self, store: &ParamStore, id: ParamId, row: usize, grad: &[f64]) {
        let range = store.offset_range(id);
        let (_, cols) = store.shape(id);
        let slice = &mut self.data[range][row * cols..(row + 1) * cols];
        for (dst, src) in slice.iter_mut().zip(grad) {
            *dst += src;
        }
    }
}

enum Op {
    Const,
    /// Rows of a parameter table selected by token/position ids.
    Gather { param: ParamId, ids: Vec<usize> },
    /// x @ W (+ bias broadcast over rows).
    Linear { input: NodeId, weight: ParamId, bias: Option<ParamId> },
    MatMul { a: NodeId, b: NodeId },
    /// a @ b^T without materializing the transpose.
    MatMulNT { a: NodeId, b: NodeId },
    Add { a: NodeId, b: NodeId },
    Scale { a: NodeId, factor: f64 },
    AddConst { a: NodeId },
    MulConst { a: NodeId, mask: Array2<f64> },
    SoftmaxRows { a: NodeId },
    LayerNorm { input: NodeId, gamma: ParamId, beta: ParamId, xhat: Array2<f64>, inv_std: Vec<f64> },
    Gelu { a: NodeId },
    SliceCols { a: NodeId, start: usize },
    SliceRows { a: NodeId, start: usize },
    ConcatCols { parts: Vec<NodeId> },
    /// Sum of -log softmax(logits)[target] over rows; caches probabilities.
    NllSum { logits: NodeId, targets: Vec<usize>, probs: Array2<f64> },
    /// Sum over rows of KL(teacher || softmax(logits / tau)); gradients
    /// flow to the student logits only.
    KlTempered { logits: NodeId, teacher: Array2<f64>, tau: f64, student: Array2<f64> },
    /// a + coeff * b, elementwise.
    AddScaled { a: NodeId, b: NodeId, coeff: f64 },
}

pub struct Tape {
    ops: Vec<Op>,
    values: Vec<Array2<f64>>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { ops: Vec::with_capacity(256), values: Vec::with_capacity(256) }
    }

    pub fn value(&self, id: NodeId) -> &Array2<f64> {
        &self.values[id.0]
    }

    /// Value of a 1x1 node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        let v = &self.values[id.0];
        debug_assert_eq!(v.dim(), (1, 1));
        v[[0, 0]]
    }

    fn push(&mut self, op: Op, value: Array2<f64>) -> NodeId {
        self.ops.push(op);
        self.values.push(value);
        NodeId(self.values.len() - 1)
    }

    pub fn constant(&mut self, value: Array2<f64>) -> NodeId {
        self.push(Op::Const, value)
    }

    pub fn gather(&mut self, store: &ParamStore, param: ParamId, ids: &[usize]) -> NodeId {
        let table = store.view(param);
        let mut out = Array2::zeros((ids.len(), table.ncols()));
        for (r, &id) in ids.iter().enumerate() {
            out.row_mut(r).assign(&table.row(id));
        }
        self.push(Op::Gather { param, ids: ids.to_vec() }, out)
    }

    pub fn linear(
        &mut self,
        store: &ParamStore,
        input: NodeId,
        weight: ParamId,
        bias: Option<ParamId>,
    ) -> NodeId {
        let w = store.view(weight);
        let mut out = self.values[input.0].dot(&w);
        if let Some(b) = bias {
            let bias_row = store.view(b);
            out += &bias_row.row(0);
        }
        self.push(Op::Linear { input, weight, bias }, out)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out = self.values[a.0].dot(&self.values[b.0]);
        self.push(Op::MatMul { a, b }, out)
    }

    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out = self.values[a.0].dot(&self.values[b.0].t());
        self.push(Op::MatMulNT { a, b }, out)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        debug_assert_eq!(self.values[a.0].dim(), self.values[b.0].dim());
        let out = &self.values[a.0] + &self.values[b.0];
        self.push(Op::Add { a, b }, out)
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        let out = &self.values[a.0] * factor;
        self.push(Op::Scale { a, factor }, out)
    }

    pub fn add_const(&mut self, a: NodeId, addend: &Array2<f64>) -> NodeId {
        let out = &self.values[a.0] + addend;
        self.push(Op::AddConst { a }, out)
    }

    pub fn mul_const(&mut self, a: NodeId, mask: Array2<f64>) -> NodeId {
        let out = &self.values[a.0] * &mask;
        self.push(Op::MulConst { a, mask }, out)
    }

    pub fn softmax_rows(&mut self, a: NodeId) -> NodeId {
        let x = &self.values[a.0];
        let mut out = x.clone();
        for mut row in out.rows_mut() {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            row.mapv_inplace(|v| (v - max).exp());
            let sum = row.sum();
            row.mapv_inplace(|v| v / sum);
        }
        self.push(Op::SoftmaxRows { a }, out)
    }

    pub fn layer_norm(
        &mut self,
        store: &ParamStore,
        input: NodeId,
        gamma: ParamId,
        beta: ParamId,
    ) -> NodeId {
        const EPS: f64 = 1e-5;
        let x = &self.values[input.0];
        let g = store.view(gamma);
        let b = store.view(beta);
        let n = x.nrows();
        let d = x.ncols() as f64;
        let mut xhat = x.clone();
        let mut inv_std = Vec::with_capacity(n);
        for mut row in xhat.rows_mut() {
            let mean = row.sum() / d;
            row.mapv_inplace(|v| v - mean);
            let var = row.iter().map(|v| v * v).sum::<f64>() / d;
            let is = 1.0 / (var + EPS).sqrt();
            row.mapv_inplace(|v| v * is);
            inv_std.push(is);
        }
        let mut out = xhat.clone();
        for mut row in out.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = *v * g[[0, j]] + b[[0, j]];
            }
        }
        self.push(Op::LayerNorm { input, gamma, beta, xhat, inv_std }, out)
    }

    pub fn gelu(&mut self, a: NodeId) -> NodeId {
        let out = self.values[a.0].mapv(gelu);
        self.push(Op::Gelu { a }, out)
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, len: usize) -> NodeId {
        let out = self.values[a.0].slice(ndarray::s![.., start..start + len]).to_owned();
        self.push(Op::SliceCols { a, start }, out)
    }

    pub fn slice_rows(&mut self, a: NodeId, start: usize, len: usize) -> NodeId {
        let out = self.values[a.0].slice(ndarray::s![start..start + len, ..]).to_owned();
        self.push(Op::SliceRows { a, start }, out)
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        let total: usize = parts.iter().map(|p| self.values[p.0].ncols()).sum();
        let rows = self.values[parts[0].0].nrows();
        let mut out = Array2::zeros((rows, total));
        let mut col = 0;
        for p in parts {
            let v = &self.values[p.0];
            out.slice_mut(ndarray::s![.., col..col + v.ncols()]).assign(v);
            col += v.ncols();
        }
        self.push(Op::ConcatCols { parts: parts.to_vec() }, out)
    }

    /// Sum over rows of the negative log-likelihood of `targets`.
    pub fn nll_sum(&mut self, logits: NodeId, targets: &[usize]) -> NodeId {
        let z = &self.values[logits.0];
        debug_assert_eq!(z.nrows(), targets.len());
        let (probs, loss) = nll_forward(z, targets);
        self.push(
            Op::NllSum { logits, targets: targets.to_vec(), probs },
            ndarray::arr2(&[[loss]]),
        )
    }

    /// Sum over rows of KL(teacher || softmax(logits/tau)).
    pub fn kl_tempered(&mut self, logits: NodeId, teacher: Array2<f64>, tau: f64) -> NodeId {
        let z = &self.values[logits.0];
        debug_assert_eq!(z.dim(), teacher.dim());
        let student = tempered_softmax(z, tau);
        let mut loss = 0.0;
        for (t_row, s_row) in teacher.rows().into_iter().zip(student.rows()) {
            for (&t, &s) in t_row.iter().zip(s_row.iter()) {
                if t > 0.0 {
                    loss += t * (t.ln() - s.max(1e-12).ln());
                }
            }
        }
        self.push(Op::KlTempered { logits, teacher, tau, student }, ndarray::arr2(&[[loss]]))
    }

    pub fn add_scaled(&mut self, a: NodeId, b: NodeId, coeff: f64) -> NodeId {
        let out = &self.values[a.0] + &(&self.values[b.0] * coeff);
        self.push(Op::AddScaled { a, b, coeff }, out)
    }

    /// Reverse pass from a scalar loss node; parameter gradients accumulate
    /// into `grads`.
    pub fn backward(&self, loss: NodeId, store: &ParamStore, grads: &mut GradStore) {
        debug_assert_eq!(self.values[loss.0].dim(), (1, 1));
        let mut node_grads: Vec<Option<Array2<f64>>> = vec![None; self.values.len()];
        node_grads[loss.0] = Some(ndarray::arr2(&[[1.0]]));
        for i in (0..=loss.0).rev() {
            let Some(g) = node_grads[i].take() else { continue };
            match &self.ops[i] {
                Op::Const => {}
                Op::Gather { param, ids } => {
                    for (r, &id) in ids.iter().enumerate() {
                        grads.add_row_into(store, *param, id, g.row(r).as_slice().unwrap());
                    }
                }
                Op::Linear { input, weight, bias } => {
                    let x = &self.values[input.0];
                    let w = store.view(*weight);
                    accumulate(&mut node_grads[input.0], g.dot(&w.t()));
                    grads.add_into(store, *weight, &x.t().dot(&g));
                    if let Some(b) = bias {
                        let col_sum = g.sum_axis(Axis(0));
                        grads.add_row_into(store, *b, 0, col_sum.as_slice().unwrap());
                    }
                }
                Op::MatMul { a, b } => {
                    let av = &self.values[a.0];
                    let bv = &self.values[b.0];
                    accumulate(&mut node_grads[a.0], g.dot(&bv.t()));
                    accumulate(&mut node_grads[b.0], av.t().dot(&g));
                }
                Op::MatMulNT { a, b } => {
                    let av = &self.values[a.0];
                    let bv = &self.values[b.0];
                    accumulate(&mut node_grads[a.0], g.dot(bv));
                    accumulate(&mut node_grads[b.0], g.t().dot(av));
                }
                Op::Add { a, b } => {
                    accumulate(&mut node_grads[a.0], g.clone());
                    accumulate(&mut node_grads[b.0], g);
                }
                Op::Scale { a, factor } => {
                    accumulate(&mut node_grads[a.0], &g * *factor);
                }
                Op::AddConst { a } => {
                    accumulate(&mut node_grads[a.0], g);
                }
                Op::MulConst { a, mask } => {
                    accumulate(&mut node_grads[a.0], &g * mask);
                }
                Op::SoftmaxRows { a } => {
                    let p = &self.values[i];
                    let mut gi = &g * p;
                    for (mut gr, pr) in gi.rows_mut().into_iter().zip(p.rows()) {
                        let dot: f64 = gr.sum();
                        for (v, &pv) in gr.iter_mut().zip(pr.iter()) {
                            *v -= dot * pv;
                        }
                    }
                    accumulate(&mut node_grads[a.0], gi);
                }
                Op::LayerNorm { input, gamma, beta, xhat, inv_std } => {
                    let gview = store.view(*gamma);
                    let d = xhat.ncols() as f64;
                    let mut dx = Array2::zeros(xhat.raw_dim());
                    let mut dgamma = Array1::zeros(xhat.ncols());
                    let mut dbeta = Array1::zeros(xhat.ncols());
                    for (r, g_row) in g.rows().into_iter().enumerate() {
                        let xh = xhat.row(r);
                        let mut dxhat = Array1::zeros(xhat.ncols());
                        for j in 0..xhat.ncols() {
                            dgamma[j] += g_row[j] * xh[j];
                            dbeta[j] += g_row[j];
                            dxhat[j] = g_row[j] * gview[[0, j]];
                        }
                        let mean_dxhat = dxhat.sum() / d;
                        let mean_dxhat_xhat =
                            dxhat.iter().zip(xh.iter()).map(|(a, b)| a * b).sum::<f64>() / d;
                        let is = inv_std[r];
                        for j in 0..xhat.ncols() {
                            dx[[r, j] ] = is * (dxhat[j] - mean_dxhat - xh[j] * mean_dxhat_xhat);
                        }
                    }
                    grads.add_row_into(store, *gamma, 0, dgamma.as_slice().unwrap());
                    grads.add_row_into(store, *beta, 0, dbeta.as_slice().unwrap());
                    accumulate(&mut node_grads[input.0], dx);
                }
                Op::Gelu { a } => {
                    let x = &self.values[a.0];
                    let gi = ndarray::Zip::from(&g).and(x).map_collect(|&gv, &xv| gv * gelu_grad(xv));
                    accumulate(&mut node_grads[a.0], gi);
                }
                Op::SliceCols { a, start } => {
                    let mut gi = Array2::zeros(self.values[a.0].raw_dim());
                    gi.slice_mut(ndarray::s![.., *start..*start + g.ncols()]).assign(&g);
                    accumulate(&mut node_grads[a.0], gi);
                }
                Op::SliceRows { a, start } => {
                    let mut gi = Array2::zeros(self.values[a.0].raw_dim());
                    gi.slice_mut(ndarray::s![*start..*start + g.nrows(), ..]).assign(&g);
                    accumulate(&mut node_grads[a.0], gi);
                }
                Op::ConcatCols { parts } => {
                    let mut col = 0;
                    for p in parts {
                        let w = self.values[p.0].ncols();
                        let slice = g.slice(ndarray::s![.., col..col + w]).to_owned();
                        accumulate(&mut node_grads[p.0], slice);
                        col += w;
                    }
                }
                Op::NllSum { logits, targets, probs } => {
                    let scale = g[[0, 0]];
                    let mut gi = probs * scale;
                    for (r, &t) in targets.iter().enumerate() {
                        gi[[r, t]] -= scale;
                    }
                    accumulate(&mut node_grads[logits.0], gi);
                }
                Op::KlTempered { logits, teacher, tau, student } => {
                    let scale = g[[0, 0]] / tau;
                    let gi = (student - teacher) * scale;
                    accumulate(&mut node_grads[logits.0], gi);
                }
                Op::AddScaled { a, b, coeff } => {
                    accumulate(&mut node_grads[a.0], g.clone());
                    accumulate(&mut node_grads[b.0], &g * *coeff);
                }
            }
        }
    }
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

fn accumulate(slot: &mut Option<Array2<f64>>, grad: Array2<f64>) {
    match slot {
        Some(existing) => *existing += &grad,
        None => *slot = Some(grad),
    }
}

fn gelu(x: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
    0.5 * x * (1.0 + (C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4;
    let u = C * (x + 0.044715 * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * C * (1.0 + 3.0 * 0.044715 * x * x)
}

/// Stable log-softmax NLL; returns (softmax probabilities, summed loss).
fn nll_forward(logits: &Array2<f64>, targets: &[usize]) -> (Array2<f64>, f64) {
    let mut probs = logits.clone();
    let mut loss = 0.0;
    for (row, &target) in probs.rows_mut().into_iter().zip(targets) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
        loss -= row[target] - log_sum;
        let mut r = row;
        r.mapv_inplace(|v| (v - log_sum).exp());
    }
    (probs, loss)
}

/// Softmax of `logits / tau`, row-wise, numerically stabilized.
pub(crate) fn tempered_softmax(logits: &Array2<f64>, tau: f64) -> Array2<f64> {
    let mut out = logits.mapv(|v| v / tau);
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}
