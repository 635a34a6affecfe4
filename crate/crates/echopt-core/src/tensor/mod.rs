//! Dense-tensor engine with reverse-mode automatic differentiation.
//!
//! A [`Tape`] is a Wengert list: every operation appends a node holding
//! its forward value, a gradient buffer, and enough saved context for the
//! backward rule. Creation order is topological order, so [`Tape::backward`]
//! is a single reverse sweep that visits each node exactly once. Gradients
//! accumulate: calling `backward` twice without a fresh tape doubles them.
//!
//! Values are f64 throughout. A tape is single-threaded by construction;
//! run one tape per worker and reduce gradients in worker-index order.

mod gradcheck;
mod image;
pub mod serialize;

pub use gradcheck::grad_check;

use crate::error::{CoreError, Result};

pub(crate) use image::{ConvSpec, ResizeSpec};

/// Handle to a tensor on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

pub(crate) struct Node {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    pub grad: Vec<f64>,
    pub op: Op,
}

pub(crate) enum Op {
    Leaf,
    Add(usize, usize),
    /// x [..., d] + bias [d]
    AddBias(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    Relu(usize),
    Sum(usize),
    Reshape(usize),
    Concat {
        parts: Vec<usize>,
        axis: usize,
    },
    Slice {
        x: usize,
        axis: usize,
        start: usize,
    },
    /// a [m,k] * b [k,n]
    Matmul {
        a: usize,
        b: usize,
        m: usize,
        k: usize,
        n: usize,
    },
    /// a [m,k] * b[n,k]^T
    MatmulNT {
        a: usize,
        b: usize,
        m: usize,
        k: usize,
        n: usize,
    },
    /// softmax along the last axis; the node's data is the output
    Softmax(usize),
    LayerNorm {
        x: usize,
        gamma: usize,
        beta: usize,
        xhat: Vec<f64>,
        rstd: Vec<f64>,
    },
    BatchNorm {
        x: usize,
        gamma: usize,
        beta: usize,
        xhat: Vec<f64>,
        rstd: Vec<f64>,
        /// training mode differentiates through the batch statistics
        training: bool,
    },
    Conv2d {
        x: usize,
        w: usize,
        b: usize,
        spec: ConvSpec,
    },
    TransposedConv2d {
        x: usize,
        w: usize,
        b: usize,
        spec: ConvSpec,
    },
    ResizeBilinear {
        x: usize,
        spec: ResizeSpec,
    },
    /// [c, h, w] -> [p, ph*pw*c]
    Patchify {
        x: usize,
        ph: usize,
        pw: usize,
    },
    /// [p, ph*pw] -> [1, h, w]
    Unpatchify {
        x: usize,
        ph: usize,
        pw: usize,
        h: usize,
        w: usize,
    },
    MeanSqError {
        pred: usize,
        target: usize,
    },
}

#[derive(Default)]
pub struct Tape {
    pub(crate) nodes: Vec<Node>,
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub(crate) fn push(&mut self, shape: Vec<usize>, data: Vec<f64>, op: Op) -> Var {
        debug_assert_eq!(numel(&shape), data.len());
        let grad = vec![0.0; data.len()];
        self.nodes.push(Node {
            shape,
            data,
            grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, data: Vec<f64>, shape: &[usize]) -> Result<Var> {
        if numel(shape) != data.len() {
            return Err(CoreError::ShapeMismatch {
                op: "leaf",
                lhs: vec![data.len()],
                rhs: shape.to_vec(),
            });
        }
        Ok(self.push(shape.to_vec(), data, Op::Leaf))
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].data
    }

    pub fn grad(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].grad
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    // ---- elementwise and structural ops ----------------------------------

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same_shape("add", a, b)?;
        let data = self.nodes[a.0]
            .data
            .iter()
            .zip(&self.nodes[b.0].data)
            .map(|(x, y)| x + y)
            .collect();
        Ok(self.push(self.nodes[a.0].shape.clone(), data, Op::Add(a.0, b.0)))
    }

    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let d = *self.nodes[x.0].shape.last().unwrap_or(&0);
        if self.nodes[bias.0].shape != [d] {
            return Err(CoreError::ShapeMismatch {
                op: "add_bias",
                lhs: self.nodes[x.0].shape.clone(),
                rhs: self.nodes[bias.0].shape.clone(),
            });
        }
        let bias_data = &self.nodes[bias.0].data;
        let data = self.nodes[x.0]
            .data
            .iter()
            .enumerate()
            .map(|(i, v)| v + bias_data[i % d])
            .collect();
        Ok(self.push(self.nodes[x.0].shape.clone(), data, Op::AddBias(x.0, bias.0)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same_shape("mul", a, b)?;
        let data = self.nodes[a.0]
            .data
            .iter()
            .zip(&self.nodes[b.0].data)
            .map(|(x, y)| x * y)
            .collect();
        Ok(self.push(self.nodes[a.0].shape.clone(), data, Op::Mul(a.0, b.0)))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let data = self.nodes[x.0].data.iter().map(|v| c * v).collect();
        self.push(self.nodes[x.0].shape.clone(), data, Op::Scale(x.0, c))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let data = self.nodes[x.0].data.iter().map(|v| v.max(0.0)).collect();
        self.push(self.nodes[x.0].shape.clone(), data, Op::Relu(x.0))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s: f64 = self.nodes[x.0].data.iter().sum();
        self.push(vec![1], vec![s], Op::Sum(x.0))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        if numel(shape) != self.nodes[x.0].data.len() {
            return Err(CoreError::ShapeMismatch {
                op: "reshape",
                lhs: self.nodes[x.0].shape.clone(),
                rhs: shape.to_vec(),
            });
        }
        let data = self.nodes[x.0].data.clone();
        Ok(self.push(shape.to_vec(), data, Op::Reshape(x.0)))
    }

    /// Concatenates along `axis`; all other dimensions must match.
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        if parts.is_empty() {
            return Err(CoreError::InvalidArgument("concat of nothing".into()));
        }
        let first = self.nodes[parts[0].0].shape.clone();
        if axis >= first.len() {
            return Err(CoreError::InvalidArgument(format!(
                "concat axis {axis} out of rank {}",
                first.len()
            )));
        }
        let mut axis_total = 0;
        for p in parts {
            let s = &self.nodes[p.0].shape;
            if s.len() != first.len()
                || s.iter()
                    .zip(&first)
                    .enumerate()
                    .any(|(i, (a, b))| i != axis && a != b)
            {
                return Err(CoreError::ShapeMismatch {
                    op: "concat",
                    lhs: first.clone(),
                    rhs: s.clone(),
                });
            }
            axis_total += s[axis];
        }
        let mut out_shape = first.clone();
        out_shape[axis] = axis_total;

        let outer: usize = first[..axis].iter().product();
        let inner: usize = first[axis + 1..].iter().product();
        let mut data = vec![0.0; numel(&out_shape)];
        let out_axis_stride = axis_total * inner;
        let mut offset = 0;
        for p in parts {
            let s_axis = self.nodes[p.0].shape[axis];
            let src = &self.nodes[p.0].data;
            for o in 0..outer {
                let dst_base = o * out_axis_stride + offset * inner;
                let src_base = o * s_axis * inner;
                data[dst_base..dst_base + s_axis * inner]
                    .copy_from_slice(&src[src_base..src_base + s_axis * inner]);
            }
            offset += s_axis;
        }
        Ok(self.push(
            out_shape,
            data,
            Op::Concat {
                parts: parts.iter().map(|p| p.0).collect(),
                axis,
            },
        ))
    }

    /// Contiguous slice `[start, start + len)` along `axis`.
    pub fn slice(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let shape = self.nodes[x.0].shape.clone();
        if axis >= shape.len() || start + len > shape[axis] || len == 0 {
            return Err(CoreError::InvalidArgument(format!(
                "slice {start}..{} along axis {axis} of {shape:?}",
                start + len
            )));
        }
        let mut out_shape = shape.clone();
        out_shape[axis] = len;
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let mut data = vec![0.0; numel(&out_shape)];
        let src = &self.nodes[x.0].data;
        for o in 0..outer {
            let src_base = (o * shape[axis] + start) * inner;
            let dst_base = o * len * inner;
            data[dst_base..dst_base + len * inner]
                .copy_from_slice(&src[src_base..src_base + len * inner]);
        }
        Ok(self.push(out_shape, data, Op::Slice { x: x.0, axis, start }))
    }

    // ---- linear algebra ---------------------------------------------------

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (&self.nodes[a.0].shape, &self.nodes[b.0].shape);
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(CoreError::ShapeMismatch {
                op: "matmul",
                lhs: sa.clone(),
                rhs: sb.clone(),
            });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        matmul_kernel(
            &self.nodes[a.0].data,
            &self.nodes[b.0].data,
            &mut out,
            m,
            k,
            n,
        );
        Ok(self.push(
            vec![m, n],
            out,
            Op::Matmul {
                a: a.0,
                b: b.0,
                m,
                k,
                n,
            },
        ))
    }

    /// `a [m,k] * b[n,k]^T -> [m,n]`, used for attention scores.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (&self.nodes[a.0].shape, &self.nodes[b.0].shape);
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[1] {
            return Err(CoreError::ShapeMismatch {
                op: "matmul_nt",
                lhs: sa.clone(),
                rhs: sb.clone(),
            });
        }
        let (m, k, n) = (sa[0], sa[1], sb[0]);
        let a_data = &self.nodes[a.0].data;
        let b_data = &self.nodes[b.0].data;
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let arow = &a_data[i * k..(i + 1) * k];
            for j in 0..n {
                let brow = &b_data[j * k..(j + 1) * k];
                out[i * n + j] = arow.iter().zip(brow).map(|(x, y)| x * y).sum();
            }
        }
        Ok(self.push(
            vec![m, n],
            out,
            Op::MatmulNT {
                a: a.0,
                b: b.0,
                m,
                k,
                n,
            },
        ))
    }

    /// Numerically stable softmax along the last axis.
    pub fn softmax_lastdim(&mut self, x: Var) -> Var {
        let shape = self.nodes[x.0].shape.clone();
        let d = (*shape.last().unwrap_or(&1)).max(1);
        let rows = self.nodes[x.0].data.len() / d;
        let mut data = self.nodes[x.0].data.clone();
        for r in 0..rows {
            let row = &mut data[r * d..(r + 1) * d];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                z += *v;
            }
            for v in row.iter_mut() {
                *v /= z;
            }
        }
        self.push(shape, data, Op::Softmax(x.0))
    }

    // ---- normalization ------------------------------------------------------

    /// Layer normalization of `x [rows, d]` along the last axis with
    /// learned `gamma` and `beta` of shape `[d]`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let shape = self.nodes[x.0].shape.clone();
        let d = *shape.last().unwrap_or(&0);
        if d == 0 || self.nodes[gamma.0].shape != [d] || self.nodes[beta.0].shape != [d] {
            return Err(CoreError::ShapeMismatch {
                op: "layer_norm",
                lhs: shape,
                rhs: self.nodes[gamma.0].shape.clone(),
            });
        }
        let rows = self.nodes[x.0].data.len() / d;
        let mut xhat = vec![0.0; rows * d];
        let mut rstd = vec![0.0; rows];
        let mut out = vec![0.0; rows * d];
        {
            let xd = &self.nodes[x.0].data;
            let g = &self.nodes[gamma.0].data;
            let bt = &self.nodes[beta.0].data;
            for r in 0..rows {
                let row = &xd[r * d..(r + 1) * d];
                let mean = row.iter().sum::<f64>() / d as f64;
                let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
                let rs = 1.0 / (var + eps).sqrt();
                rstd[r] = rs;
                for i in 0..d {
                    let xh = (row[i] - mean) * rs;
                    xhat[r * d + i] = xh;
                    out[r * d + i] = g[i] * xh + bt[i];
                }
            }
        }
        Ok(self.push(
            self.nodes[x.0].shape.clone(),
            out,
            Op::LayerNorm {
                x: x.0,
                gamma: gamma.0,
                beta: beta.0,
                xhat,
                rstd,
            },
        ))
    }

    /// Batch normalization of `x [rows, d]` per feature over rows.
    ///
    /// In training mode (`running: None`) the statistics come from `x`
    /// itself, the backward pass differentiates through them, and the
    /// batch mean and variance are returned so the caller can update
    /// running statistics. In inference mode the provided running
    /// statistics are used and treated as constants.
    pub fn batch_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        running: Option<(&[f64], &[f64])>,
        eps: f64,
    ) -> Result<(Var, Vec<f64>, Vec<f64>)> {
        let shape = self.nodes[x.0].shape.clone();
        if shape.len() != 2 {
            return Err(CoreError::ShapeMismatch {
                op: "batch_norm",
                lhs: shape,
                rhs: vec![0, 0],
            });
        }
        let (rows, d) = (shape[0], shape[1]);
        if self.nodes[gamma.0].shape != [d] || self.nodes[beta.0].shape != [d] {
            return Err(CoreError::ShapeMismatch {
                op: "batch_norm",
                lhs: shape,
                rhs: self.nodes[gamma.0].shape.clone(),
            });
        }
        let training = running.is_none();
        let (mean, var) = match running {
            Some((m, v)) => (m.to_vec(), v.to_vec()),
            None => {
                let xd = &self.nodes[x.0].data;
                let mut mean = vec![0.0; d];
                let mut var = vec![0.0; d];
                for r in 0..rows {
                    for i in 0..d {
                        mean[i] += xd[r * d + i];
                    }
                }
                mean.iter_mut().for_each(|m| *m /= rows as f64);
                for r in 0..rows {
                    for i in 0..d {
                        var[i] += (xd[r * d + i] - mean[i]).powi(2);
                    }
                }
                var.iter_mut().for_each(|v| *v /= rows as f64);
                (mean, var)
            }
        };
        let mut xhat = vec![0.0; rows * d];
        let mut rstd = vec![0.0; d];
        for i in 0..d {
            rstd[i] = 1.0 / (var[i] + eps).sqrt();
        }
        let mut out = vec![0.0; rows * d];
        {
            let xd = &self.nodes[x.0].data;
            let g = &self.nodes[gamma.0].data;
            let bt = &self.nodes[beta.0].data;
            for r in 0..rows {
                for i in 0..d {
                    let xh = (xd[r * d + i] - mean[i]) * rstd[i];
                    xhat[r * d + i] = xh;
                    out[r * d + i] = g[i] * xh + bt[i];
                }
            }
        }
        let v = self.push(
            self.nodes[x.0].shape.clone(),
            out,
            Op::BatchNorm {
                x: x.0,
                gamma: gamma.0,
                beta: beta.0,
                xhat,
                rstd,
                training,
            },
        );
        Ok((v, mean, var))
    }

    // ---- loss ---------------------------------------------------------------

    /// Scalar mean squared error between two same-shape tensors.
    pub fn mean_sq_error(&mut self, pred: Var, target: Var) -> Result<Var> {
        self.check_same_shape("mean_sq_error", pred, target)?;
        let n = self.nodes[pred.0].data.len() as f64;
        let mse = self.nodes[pred.0]
            .data
            .iter()
            .zip(&self.nodes[target.0].data)
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / n;
        Ok(self.push(
            vec![1],
            vec![mse],
            Op::MeanSqError {
                pred: pred.0,
                target: target.0,
            },
        ))
    }

    // ---- backward -------------------------------------------------------------

    /// Accumulates d(loss)/d(node) into every node's gradient buffer.
    /// `loss` must be scalar. Visits nodes in reverse creation order,
    /// which is reverse topological order by construction. Adjoints are
    /// computed in scratch buffers and added into the persistent grads,
    /// so calling backward twice doubles every gradient.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.nodes[loss.0].data.len() != 1 {
            return Err(CoreError::ShapeMismatch {
                op: "backward",
                lhs: self.nodes[loss.0].shape.clone(),
                rhs: vec![1],
            });
        }
        let mut adjoints: Vec<Vec<f64>> = self.nodes[..=loss.0]
            .iter()
            .map(|n| vec![0.0; n.data.len()])
            .collect();
        adjoints[loss.0][0] = 1.0;
        for idx in (0..=loss.0).rev() {
            let grad = std::mem::take(&mut adjoints[idx]);
            self.backward_node(idx, &grad, &mut adjoints);
            adjoints[idx] = grad;
        }
        for (node, adj) in self.nodes.iter_mut().zip(adjoints) {
            add_into(&mut node.grad, &adj);
        }
        Ok(())
    }

    fn check_same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.nodes[a.0].shape != self.nodes[b.0].shape {
            return Err(CoreError::ShapeMismatch {
                op,
                lhs: self.nodes[a.0].shape.clone(),
                rhs: self.nodes[b.0].shape.clone(),
            });
        }
        Ok(())
    }

    /// Scatters this node's adjoint into its parents' adjoint buffers.
    fn backward_node(&self, idx: usize, grad: &[f64], adj: &mut [Vec<f64>]) {
        match &self.nodes[idx].op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                add_into(&mut adj[*a], grad);
                add_into(&mut adj[*b], grad);
            }
            Op::AddBias(x, bias) => {
                add_into(&mut adj[*x], grad);
                let d = self.nodes[*bias].data.len();
                for (i, g) in grad.iter().enumerate() {
                    adj[*bias][i % d] += g;
                }
            }
            Op::Mul(a, b) => {
                let adata = &self.nodes[*a].data;
                let bdata = &self.nodes[*b].data;
                for (i, g) in grad.iter().enumerate() {
                    adj[*a][i] += g * bdata[i];
                    adj[*b][i] += g * adata[i];
                }
            }
            Op::Scale(x, c) => {
                for (gx, g) in adj[*x].iter_mut().zip(grad) {
                    *gx += c * g;
                }
            }
            Op::Relu(x) => {
                let xdata = &self.nodes[*x].data;
                for i in 0..xdata.len() {
                    if xdata[i] > 0.0 {
                        adj[*x][i] += grad[i];
                    }
                }
            }
            Op::Sum(x) => {
                let g = grad[0];
                for gx in adj[*x].iter_mut() {
                    *gx += g;
                }
            }
            Op::Reshape(x) => {
                add_into(&mut adj[*x], grad);
            }
            Op::Concat { parts, axis } => {
                let out_shape = &self.nodes[idx].shape;
                let outer: usize = out_shape[..*axis].iter().product();
                let inner: usize = out_shape[*axis + 1..].iter().product();
                let total_axis = out_shape[*axis];
                let mut offset = 0;
                for p in parts {
                    let s_axis = self.nodes[*p].shape[*axis];
                    for o in 0..outer {
                        let src_base = (o * total_axis + offset) * inner;
                        let dst_base = o * s_axis * inner;
                        for i in 0..s_axis * inner {
                            adj[*p][dst_base + i] += grad[src_base + i];
                        }
                    }
                    offset += s_axis;
                }
            }
            Op::Slice { x, axis, start } => {
                let in_shape = &self.nodes[*x].shape;
                let out_len = self.nodes[idx].shape[*axis];
                let outer: usize = in_shape[..*axis].iter().product();
                let inner: usize = in_shape[*axis + 1..].iter().product();
                for o in 0..outer {
                    let dst_base = (o * in_shape[*axis] + start) * inner;
                    let src_base = o * out_len * inner;
                    for i in 0..out_len * inner {
                        adj[*x][dst_base + i] += grad[src_base + i];
                    }
                }
            }
            Op::Matmul { a, b, m, k, n } => {
                // dA += dC * B^T ; dB += A^T * dC
                let adata = &self.nodes[*a].data;
                let bdata = &self.nodes[*b].data;
                {
                    let ga = &mut adj[*a];
                    for i in 0..*m {
                        let grow = &grad[i * n..(i + 1) * n];
                        let garow = &mut ga[i * k..(i + 1) * k];
                        for kk in 0..*k {
                            let brow = &bdata[kk * n..(kk + 1) * n];
                            let mut acc = 0.0;
                            for j in 0..*n {
                                acc += grow[j] * brow[j];
                            }
                            garow[kk] += acc;
                        }
                    }
                }
                {
                    let gb = &mut adj[*b];
                    for i in 0..*m {
                        let arow = &adata[i * k..(i + 1) * k];
                        let grow = &grad[i * n..(i + 1) * n];
                        for (kk, &av) in arow.iter().enumerate() {
                            if av != 0.0 {
                                let gbrow = &mut gb[kk * n..(kk + 1) * n];
                                for j in 0..*n {
                                    gbrow[j] += av * grow[j];
                                }
                            }
                        }
                    }
                }
            }
            Op::MatmulNT { a, b, m, k, n } => {
                // C = A * B^T ; dA += dC * B ; dB += dC^T * A
                let adata = &self.nodes[*a].data;
                let bdata = &self.nodes[*b].data;
                {
                    let ga = &mut adj[*a];
                    for i in 0..*m {
                        let grow = &grad[i * n..(i + 1) * n];
                        let garow = &mut ga[i * k..(i + 1) * k];
                        for (j, &g) in grow.iter().enumerate() {
                            if g != 0.0 {
                                let brow = &bdata[j * k..(j + 1) * k];
                                for kk in 0..*k {
                                    garow[kk] += g * brow[kk];
                                }
                            }
                        }
                    }
                }
                {
                    let gb = &mut adj[*b];
                    for i in 0..*m {
                        let grow = &grad[i * n..(i + 1) * n];
                        let arow = &adata[i * k..(i + 1) * k];
                        for (j, &g) in grow.iter().enumerate() {
                            if g != 0.0 {
                                let gbrow = &mut gb[j * k..(j + 1) * k];
                                for kk in 0..*k {
                                    gbrow[kk] += g * arow[kk];
                                }
                            }
                        }
                    }
                }
            }
            Op::Softmax(x) => {
                let d = *self.nodes[idx].shape.last().unwrap();
                let y = &self.nodes[idx].data;
                let rows = y.len() / d;
                for r in 0..rows {
                    let yrow = &y[r * d..(r + 1) * d];
                    let grow = &grad[r * d..(r + 1) * d];
                    let dot: f64 = yrow.iter().zip(grow).map(|(a, b)| a * b).sum();
                    for i in 0..d {
                        adj[*x][r * d + i] += yrow[i] * (grow[i] - dot);
                    }
                }
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                rstd,
            } => {
                let gdata = &self.nodes[*gamma].data;
                let d = gdata.len();
                let rows = xhat.len() / d;
                for r in 0..rows {
                    let xh = &xhat[r * d..(r + 1) * d];
                    let grow = &grad[r * d..(r + 1) * d];
                    let mut sum_g = 0.0;
                    let mut sum_gx = 0.0;
                    for i in 0..d {
                        let dxhat = grow[i] * gdata[i];
                        sum_g += dxhat;
                        sum_gx += dxhat * xh[i];
                    }
                    let inv_d = 1.0 / d as f64;
                    for i in 0..d {
                        let dxhat = grow[i] * gdata[i];
                        adj[*x][r * d + i] +=
                            rstd[r] * (dxhat - inv_d * sum_g - xh[i] * inv_d * sum_gx);
                        adj[*gamma][i] += grow[i] * xh[i];
                        adj[*beta][i] += grow[i];
                    }
                }
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                rstd,
                training,
            } => {
                let gdata = &self.nodes[*gamma].data;
                let d = gdata.len();
                let rows = xhat.len() / d;
                if *training {
                    let mut sum_g = vec![0.0; d];
                    let mut sum_gx = vec![0.0; d];
                    for r in 0..rows {
                        for i in 0..d {
                            let dxhat = grad[r * d + i] * gdata[i];
                            sum_g[i] += dxhat;
                            sum_gx[i] += dxhat * xhat[r * d + i];
                        }
                    }
                    let inv_r = 1.0 / rows as f64;
                    for r in 0..rows {
                        for i in 0..d {
                            let dxhat = grad[r * d + i] * gdata[i];
                            adj[*x][r * d + i] += rstd[i]
                                * (dxhat - inv_r * sum_g[i] - xhat[r * d + i] * inv_r * sum_gx[i]);
                        }
                    }
                } else {
                    for r in 0..rows {
                        for i in 0..d {
                            adj[*x][r * d + i] += grad[r * d + i] * gdata[i] * rstd[i];
                        }
                    }
                }
                for r in 0..rows {
                    for i in 0..d {
                        adj[*gamma][i] += grad[r * d + i] * xhat[r * d + i];
                        adj[*beta][i] += grad[r * d + i];
                    }
                }
            }
            Op::Conv2d { x, w, b, spec } => {
                image::conv2d_backward(self, *x, *w, *b, spec, grad, adj);
            }
            Op::TransposedConv2d { x, w, b, spec } => {
                image::tconv2d_backward(self, *x, *w, *b, spec, grad, adj);
            }
            Op::ResizeBilinear { x, spec } => {
                image::resize_backward(*x, spec, grad, adj);
            }
            Op::Patchify { x, ph, pw } => {
                image::patchify_backward(self, *x, *ph, *pw, grad, adj);
            }
            Op::Unpatchify { x, ph, pw, h, w } => {
                image::unpatchify_backward(*x, *ph, *pw, *h, *w, grad, adj);
            }
            Op::MeanSqError { pred, target } => {
                let n = self.nodes[*pred].data.len() as f64;
                let g = grad[0];
                let pdata = &self.nodes[*pred].data;
                let tdata = &self.nodes[*target].data;
                for i in 0..pdata.len() {
                    let diff = 2.0 * (pdata[i] - tdata[i]) / n * g;
                    adj[*pred][i] += diff;
                    adj[*target][i] -= diff;
                }
            }
        }
    }
}

pub(crate) fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// `out += a [m,k] * b [k,n]`, ikj order for contiguous inner loops.
pub(crate) fn matmul_kernel(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (kk, &av) in arow.iter().enumerate() {
            if av != 0.0 {
                let brow = &b[kk * n..(kk + 1) * n];
                for j in 0..n {
                    orow[j] += av * brow[j];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity() {
        let mut t = Tape::new();
        let mut eye = vec![0.0; 9];
        for i in 0..3 {
            eye[i * 3 + i] = 1.0;
        }
        let i3 = t.leaf(eye, &[3, 3]).unwrap();
        let x = t
            .leaf(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[3, 2])
            .unwrap();
        let y = t.matmul(i3, x).unwrap();
        assert_eq!(t.value(y), t.value(x));
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut t = Tape::new();
        let x = t
            .leaf(vec![0.3, -1.5, 2.0, 7.0, 7.0, 7.0], &[2, 3])
            .unwrap();
        let y = t.softmax_lastdim(x);
        for r in 0..2 {
            let s: f64 = t.value(y)[r * 3..(r + 1) * 3].iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        let row1 = &t.value(y)[3..6];
        assert!(row1.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-12));
    }

    #[test]
    fn d_sum_of_squares() {
        // d/dx sum(x^2) at x = 3 is 6.
        let mut t = Tape::new();
        let x = t.leaf(vec![3.0], &[1]).unwrap();
        let sq = t.mul(x, x).unwrap();
        let loss = t.sum(sq);
        t.backward(loss).unwrap();
        assert!((t.grad(x)[0] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn grad_of_sum_is_ones_and_detached_is_zero() {
        let mut t = Tape::new();
        let w = t.leaf(vec![0.5, -2.0, 3.0], &[3]).unwrap();
        let other = t.leaf(vec![1.0, 1.0], &[2]).unwrap();
        let loss = t.sum(w);
        t.backward(loss).unwrap();
        assert_eq!(t.grad(w), &[1.0, 1.0, 1.0]);
        assert_eq!(t.grad(other), &[0.0, 0.0]);
    }

    #[test]
    fn backward_accumulates_on_second_call() {
        let mut t = Tape::new();
        let w = t.leaf(vec![2.0], &[1]).unwrap();
        let loss = t.sum(w);
        t.backward(loss).unwrap();
        t.backward(loss).unwrap();
        assert_eq!(t.grad(w)[0], 2.0);
    }

    #[test]
    fn shared_subexpression_sums_contributions() {
        // y = x + x -> dy/dx = 2
        let mut t = Tape::new();
        let x = t.leaf(vec![1.5], &[1]).unwrap();
        let y = t.add(x, x).unwrap();
        let loss = t.sum(y);
        t.backward(loss).unwrap();
        assert_eq!(t.grad(x)[0], 2.0);
    }

    #[test]
    fn non_scalar_backward_rejected() {
        let mut t = Tape::new();
        let x = t.leaf(vec![1.0, 2.0], &[2]).unwrap();
        assert!(t.backward(x).is_err());
    }

    #[test]
    fn shape_mismatch_reports_shapes() {
        let mut t = Tape::new();
        let a = t.leaf(vec![1.0, 2.0], &[2]).unwrap();
        let b = t.leaf(vec![1.0, 2.0, 3.0], &[3]).unwrap();
        let err = t.add(a, b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2]") && msg.contains("[3]"), "{msg}");
    }

    #[test]
    fn concat_and_slice_round_trip() {
        let mut t = Tape::new();
        let a = t.leaf(vec![1.0, 2.0, 3.0, 4.0], &[2, 2]).unwrap();
        let b = t.leaf(vec![5.0, 6.0], &[2, 1]).unwrap();
        let c = t.concat(&[a, b], 1).unwrap();
        assert_eq!(t.shape(c), &[2, 3]);
        assert_eq!(t.value(c), &[1.0, 2.0, 5.0, 3.0, 4.0, 6.0]);
        let back = t.slice(c, 1, 0, 2).unwrap();
        assert_eq!(t.value(back), t.value(a));
        let tail = t.slice(c, 1, 2, 1).unwrap();
        assert_eq!(t.value(tail), t.value(b));
    }

    #[test]
    fn mse_forward_value() {
        let mut t = Tape::new();
        let p = t.leaf(vec![1.0, 2.0], &[2]).unwrap();
        let y = t.leaf(vec![0.0, 0.0], &[2]).unwrap();
        let loss = t.mean_sq_error(p, y).unwrap();
        assert!((t.value(loss)[0] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn forward_is_deterministic() {
        let run = || {
            let mut t = Tape::new();
            let x = t.leaf(vec![0.1, -0.7, 0.4, 0.9], &[2, 2]).unwrap();
            let w = t.leaf(vec![0.3, -0.2, 0.8, 0.05], &[2, 2]).unwrap();
            let h = t.matmul(x, w).unwrap();
            let h = t.relu(h);
            let s = t.softmax_lastdim(h);
            t.value(s).to_vec()
        };
        assert_eq!(run(), run());
    }
}
