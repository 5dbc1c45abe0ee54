//! Reverse-mode tape. Nodes are appended in evaluation order, so the
//! recording order is already topological and backward is one reverse sweep.

use super::kernels::{gelu_grad, gelu_scalar, gemm, layer_norm_forward};
use super::{Tensor, TensorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PoolMode {
    #[default]
    Max,
    Mean,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    MatMulNT(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    MulScalar(NodeId, NodeId),
    Recip(NodeId),
    Exp(NodeId),
    Clamp(NodeId, f64, f64),
    Sum(NodeId),
    Gelu(NodeId),
    LayerNorm {
        x: NodeId,
        gain: NodeId,
        shift: NodeId,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Mask(NodeId, Vec<f64>),
    NormalizeRows(NodeId, Vec<f64>),
    Transpose(NodeId),
    Volume {
        m: NodeId,
        t: NodeId,
        h: NodeId,
        a: Vec<f64>,
        b: Vec<f64>,
        c: Vec<f64>,
        det: Vec<f64>,
        eps: f64,
    },
    SoftmaxXent {
        logits: NodeId,
        probs: Vec<f64>,
        smoothing: f64,
    },
    Pool {
        x: NodeId,
        mode: PoolMode,
        groups: Vec<Vec<usize>>,
        argmax: Vec<usize>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
}

fn check_same(a: &Tensor, b: &Tensor, what: &str) {
    assert_eq!(a.shape(), b.shape(), "{what}: shape mismatch");
}

fn check_2d(t: &Tensor, what: &str) {
    assert_eq!(t.shape().len(), 2, "{what}: expected a 2-D tensor, got {:?}", t.shape());
}

impl Tape {
    pub fn new() -> Tape {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[NodeId]) -> NodeId {
        let requires_grad = inputs.iter().any(|i| self.nodes[i.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        self.grads.push(None);
        NodeId(self.nodes.len() - 1)
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor) -> NodeId {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: true,
        });
        self.grads.push(None);
        NodeId(self.nodes.len() - 1)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: false,
        });
        self.grads.push(None);
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn val(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// `[n, k] × [k, m]`.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (av, bv) = (self.val(a), self.val(b));
        check_2d(av, "matmul");
        check_2d(bv, "matmul");
        assert_eq!(av.cols(), bv.rows(), "matmul: inner dimension mismatch");
        let (n, k, m) = (av.rows(), av.cols(), bv.cols());
        let mut out = vec![0.0; n * m];
        gemm(n, k, m, av.data(), (k, 1), bv.data(), (m, 1), &mut out, 0.0);
        let value = Tensor::new(vec![n, m], out).unwrap();
        self.push(value, Op::MatMul(a, b), &[a, b])
    }

    /// `[n, k] × [m, k]ᵀ`.
    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (av, bv) = (self.val(a), self.val(b));
        check_2d(av, "matmul_nt");
        check_2d(bv, "matmul_nt");
        assert_eq!(av.cols(), bv.cols(), "matmul_nt: inner dimension mismatch");
        let (n, k, m) = (av.rows(), av.cols(), bv.rows());
        let mut out = vec![0.0; n * m];
        gemm(n, k, m, av.data(), (k, 1), bv.data(), (1, k), &mut out, 0.0);
        let value = Tensor::new(vec![n, m], out).unwrap();
        self.push(value, Op::MatMulNT(a, b), &[a, b])
    }

    /// Adds a length-`m` vector to every row of an `[n, m]` matrix.
    pub fn add_row(&mut self, x: NodeId, bias: NodeId) -> NodeId {
        let (xv, bv) = (self.val(x), self.val(bias));
        check_2d(xv, "add_row");
        let m = xv.cols();
        assert_eq!(bv.len(), m, "add_row: bias length mismatch");
        let mut out = xv.data().to_vec();
        for row in out.chunks_mut(m) {
            for (o, b) in row.iter_mut().zip(bv.data()) {
                *o += b;
            }
        }
        let value = Tensor::new(xv.shape().to_vec(), out).unwrap();
        self.push(value, Op::AddRow(x, bias), &[x, bias])
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (av, bv) = (self.val(a), self.val(b));
        check_same(av, bv, "add");
        let out = av.data().iter().zip(bv.data()).map(|(x, y)| x + y).collect();
        let value = Tensor::new(av.shape().to_vec(), out).unwrap();
        self.push(value, Op::Add(a, b), &[a, b])
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (av, bv) = (self.val(a), self.val(b));
        check_same(av, bv, "mul");
        let out = av.data().iter().zip(bv.data()).map(|(x, y)| x * y).collect();
        let value = Tensor::new(av.shape().to_vec(), out).unwrap();
        self.push(value, Op::Mul(a, b), &[a, b])
    }

    /// Multiplies by a constant.
    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        let xv = self.val(x);
        let out = xv.data().iter().map(|v| v * c).collect();
        let value = Tensor::new(xv.shape().to_vec(), out).unwrap();
        self.push(value, Op::Scale(x, c), &[x])
    }

    /// Multiplies every element by a one-element node.
    pub fn mul_scalar(&mut self, x: NodeId, s: NodeId) -> NodeId {
        let (xv, sv) = (self.val(x), self.val(s));
        let sc = sv.item();
        let out = xv.data().iter().map(|v| v * sc).collect();
        let value = Tensor::new(xv.shape().to_vec(), out).unwrap();
        self.push(value, Op::MulScalar(x, s), &[x, s])
    }

    pub fn recip(&mut self, x: NodeId) -> NodeId {
        let xv = self.val(x);
        let out = xv.data().iter().map(|v| 1.0 / v).collect();
        let value = Tensor::new(xv.shape().to_vec(), out).unwrap();
        self.push(value, Op::Recip(x), &[x])
    }

    pub fn exp(&mut self, x: NodeId) -> NodeId {
        let xv = self.val(x);
        let out = xv.data().iter().map(|v| v.exp()).collect();
        let value = Tensor::new(xv.shape().to_vec(), out).unwrap();
        self.push(value, Op::Exp(x), &[x])
    }

    /// Clamps into `[lo, hi]`; the gradient is zero outside the interval.
    pub fn clamp(&mut self, x: NodeId, lo: f64, hi: f64) -> NodeId {
        let xv = self.val(x);
        let out = xv.data().iter().map(|v| v.clamp(lo, hi)).collect();
        let value = Tensor::new(xv.shape().to_vec(), out).unwrap();
        self.push(value, Op::Clamp(x, lo, hi), &[x])
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let s = self.val(x).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(x), &[x])
    }

    pub fn gelu(&mut self, x: NodeId) -> NodeId {
        let xv = self.val(x);
        let out = xv.data().iter().map(|&v| gelu_scalar(v)).collect();
        let value = Tensor::new(xv.shape().to_vec(), out).unwrap();
        self.push(value, Op::Gelu(x), &[x])
    }

    pub fn layer_norm(&mut self, x: NodeId, gain: NodeId, shift: NodeId, eps: f64) -> NodeId {
        let (xv, gv, sv) = (self.val(x), self.val(gain), self.val(shift));
        let cols = xv.cols();
        assert_eq!(gv.len(), cols, "layer_norm: gain length mismatch");
        assert_eq!(sv.len(), cols, "layer_norm: shift length mismatch");
        let out = layer_norm_forward(xv.data(), cols, gv.data(), sv.data(), eps);
        let value = Tensor::new(xv.shape().to_vec(), out.y).unwrap();
        let op = Op::LayerNorm {
            x,
            gain,
            shift,
            xhat: out.xhat,
            inv_std: out.inv_std,
        };
        self.push(value, op, &[x, gain, shift])
    }

    /// Elementwise product with a fixed mask (dropout).
    pub fn mask(&mut self, x: NodeId, mask: Vec<f64>) -> NodeId {
        let xv = self.val(x);
        assert_eq!(mask.len(), xv.len(), "mask: length mismatch");
        let out = xv.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let value = Tensor::new(xv.shape().to_vec(), out).unwrap();
        self.push(value, Op::Mask(x, mask), &[x])
    }

    /// Scales every row to unit L2 norm. Zero rows stay zero.
    pub fn normalize_rows(&mut self, x: NodeId) -> NodeId {
        let xv = self.val(x);
        check_2d(xv, "normalize_rows");
        let cols = xv.cols();
        let mut out = xv.data().to_vec();
        let mut norms = Vec::with_capacity(xv.rows());
        for row in out.chunks_mut(cols.max(1)) {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            norms.push(norm);
            if norm > 0.0 {
                for v in row.iter_mut() {
                    *v /= norm;
                }
            }
        }
        let value = Tensor::new(xv.shape().to_vec(), out).unwrap();
        self.push(value, Op::NormalizeRows(x, norms), &[x])
    }

    pub fn transpose(&mut self, x: NodeId) -> NodeId {
        let xv = self.val(x);
        check_2d(xv, "transpose");
        let (n, m) = (xv.rows(), xv.cols());
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                out[j * n + i] = xv.data()[i * m + j];
            }
        }
        let value = Tensor::new(vec![m, n], out).unwrap();
        self.push(value, Op::Transpose(x), &[x])
    }

    /// `V[i][j] = Vol(m_i, t_j, h_j)` for unit rows. The backward rule uses
    /// `1 / (2·sqrt(max(det, 0) + eps))` for the square-root derivative.
    pub fn volume_matrix(&mut self, m: NodeId, t: NodeId, h: NodeId, eps: f64) -> NodeId {
        let (mv, tv, hv) = (self.val(m), self.val(t), self.val(h));
        check_2d(mv, "volume_matrix");
        check_2d(tv, "volume_matrix");
        check_same(tv, hv, "volume_matrix");
        assert_eq!(mv.cols(), tv.cols(), "volume_matrix: dimension mismatch");
        let (b1, b2, d) = (mv.rows(), tv.rows(), mv.cols());
        let mut a = vec![0.0; b1 * b2];
        let mut b = vec![0.0; b1 * b2];
        gemm(b1, d, b2, mv.data(), (d, 1), tv.data(), (1, d), &mut a, 0.0);
        gemm(b1, d, b2, mv.data(), (d, 1), hv.data(), (1, d), &mut b, 0.0);
        let c: Vec<f64> = (0..b2)
            .map(|j| tv.row(j).iter().zip(hv.row(j)).map(|(x, y)| x * y).sum())
            .collect();
        let mut det = vec![0.0; b1 * b2];
        let mut vol = vec![0.0; b1 * b2];
        for i in 0..b1 {
            for j in 0..b2 {
                let k = i * b2 + j;
                let (aa, bb, cc) = (a[k], b[k], c[j]);
                det[k] = 1.0 - aa * aa - bb * bb - cc * cc + 2.0 * aa * bb * cc;
                vol[k] = det[k].max(0.0).sqrt();
            }
        }
        let value = Tensor::new(vec![b1, b2], vol).unwrap();
        let op = Op::Volume {
            m,
            t,
            h,
            a,
            b,
            c,
            det,
            eps,
        };
        self.push(value, op, &[m, t, h])
    }

    /// Mean over rows of the cross-entropy of `softmax(logits[i])` against
    /// target `i`, with targets `(1−ε)·onehot + ε/C`. Needs rows ≤ cols.
    pub fn softmax_xent_rows(&mut self, logits: NodeId, smoothing: f64) -> NodeId {
        let lv = self.val(logits);
        check_2d(lv, "softmax_xent_rows");
        let (n, c) = (lv.rows(), lv.cols());
        assert!(n <= c, "softmax_xent_rows: more rows than classes");
        let mut probs = vec![0.0; n * c];
        let mut total = 0.0;
        for i in 0..n {
            let row = lv.row(i);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = row.iter().map(|v| (v - max).exp()).sum();
            let log_z = z.ln() + max;
            let mut loss = 0.0;
            for j in 0..c {
                let log_p = row[j] - log_z;
                probs[i * c + j] = log_p.exp();
                let q = smoothing / c as f64 + if i == j { 1.0 - smoothing } else { 0.0 };
                loss -= q * log_p;
            }
            total += loss;
        }
        let mean = if n == 0 { 0.0 } else { total / n as f64 };
        let op = Op::SoftmaxXent {
            logits,
            probs,
            smoothing,
        };
        self.push(Tensor::scalar(mean), op, &[logits])
    }

    /// Pools groups of rows of `x` into one row each. Max mode routes the
    /// gradient to the first row attaining the maximum.
    pub fn pool_rows(&mut self, x: NodeId, groups: Vec<Vec<usize>>, mode: PoolMode) -> NodeId {
        let xv = self.val(x);
        check_2d(xv, "pool_rows");
        let d = xv.cols();
        let mut out = vec![0.0; groups.len() * d];
        let mut argmax = Vec::new();
        for (g, members) in groups.iter().enumerate() {
            assert!(!members.is_empty(), "pool_rows: empty group");
            let dst = &mut out[g * d..(g + 1) * d];
            match mode {
                PoolMode::Max => {
                    for k in 0..d {
                        let mut best = members[0];
                        for &r in &members[1..] {
                            if xv.data()[r * d + k] > xv.data()[best * d + k] {
                                best = r;
                            }
                        }
                        dst[k] = xv.data()[best * d + k];
                        argmax.push(best);
                    }
                }
                PoolMode::Mean => {
                    for &r in members {
                        for (o, v) in dst.iter_mut().zip(xv.row(r)) {
                            *o += v;
                        }
                    }
                    let inv = 1.0 / members.len() as f64;
                    for o in dst.iter_mut() {
                        *o *= inv;
                    }
                }
            }
        }
        let value = Tensor::new(vec![groups.len(), d], out).unwrap();
        let op = Op::Pool {
            x,
            mode,
            groups,
            argmax,
        };
        self.push(value, op, &[x])
    }

    /// Populates gradients of `loss` with respect to every node.
    pub fn backward(&mut self, loss: NodeId) -> Result<(), TensorError> {
        let n = self.nodes[loss.0].value.len();
        if n != 1 {
            return Err(TensorError::NonScalarLoss(n));
        }
        for g in &mut self.grads {
            *g = None;
        }
        self.grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let Some(g) = self.grads[idx].take() else {
                continue;
            };
            if self.nodes[idx].requires_grad {
                self.propagate(idx, &g);
            }
            self.grads[idx] = Some(g);
        }
        Ok(())
    }

    /// Gradient of the last backward pass; zero if the node was not reached.
    pub fn grad(&self, id: NodeId) -> Tensor {
        let shape = self.nodes[id.0].value.shape().to_vec();
        match &self.grads[id.0] {
            Some(g) => Tensor::new(shape, g.clone()).unwrap(),
            None => Tensor::zeros(&shape),
        }
    }

    fn buf<'g>(grads: &'g mut [Option<Vec<f64>>], nodes: &[Node], id: NodeId) -> &'g mut Vec<f64> {
        grads[id.0].get_or_insert_with(|| vec![0.0; nodes[id.0].value.len()])
    }

    fn acc(grads: &mut [Option<Vec<f64>>], nodes: &[Node], id: NodeId, f: impl Fn(usize) -> f64) {
        if !nodes[id.0].requires_grad {
            return;
        }
        let buf = Self::buf(grads, nodes, id);
        for (i, v) in buf.iter_mut().enumerate() {
            *v += f(i);
        }
    }

    fn propagate(&mut self, idx: usize, g: &[f64]) {
        let nodes = &self.nodes;
        let node = &nodes[idx];
        match &node.op {
            Op::Leaf => {}
            &Op::MatMul(a, b) => {
                let (av, bv) = (&nodes[a.0].value, &nodes[b.0].value);
                let (n, k, m) = (av.rows(), av.cols(), bv.cols());
                if nodes[a.0].requires_grad {
                    let da = Self::buf(&mut self.grads, nodes, a);
                    gemm(n, m, k, g, (m, 1), bv.data(), (1, m), da, 1.0);
                }
                if nodes[b.0].requires_grad {
                    let db = Self::buf(&mut self.grads, nodes, b);
                    gemm(k, n, m, av.data(), (1, k), g, (m, 1), db, 1.0);
                }
            }
            &Op::MatMulNT(a, b) => {
                let (av, bv) = (&nodes[a.0].value, &nodes[b.0].value);
                let (n, k, m) = (av.rows(), av.cols(), bv.rows());
                if nodes[a.0].requires_grad {
                    let da = Self::buf(&mut self.grads, nodes, a);
                    gemm(n, m, k, g, (m, 1), bv.data(), (k, 1), da, 1.0);
                }
                if nodes[b.0].requires_grad {
                    let db = Self::buf(&mut self.grads, nodes, b);
                    gemm(m, n, k, g, (1, m), av.data(), (k, 1), db, 1.0);
                }
            }
            &Op::AddRow(x, bias) => {
                let m = node.value.cols();
                Self::acc(&mut self.grads, nodes, x, |i| g[i]);
                if nodes[bias.0].requires_grad {
                    let db = Self::buf(&mut self.grads, nodes, bias);
                    for row in g.chunks(m) {
                        for (d, v) in db.iter_mut().zip(row) {
                            *d += v;
                        }
                    }
                }
            }
            &Op::Add(a, b) => {
                Self::acc(&mut self.grads, nodes, a, |i| g[i]);
                Self::acc(&mut self.grads, nodes, b, |i| g[i]);
            }
            &Op::Mul(a, b) => {
                let av = nodes[a.0].value.data();
                let bv = nodes[b.0].value.data();
                Self::acc(&mut self.grads, nodes, a, |i| g[i] * bv[i]);
                Self::acc(&mut self.grads, nodes, b, |i| g[i] * av[i]);
            }
            &Op::Scale(x, c) => Self::acc(&mut self.grads, nodes, x, |i| g[i] * c),
            &Op::MulScalar(x, s) => {
                let sc = nodes[s.0].value.item();
                let dot: f64 = g.iter().zip(nodes[x.0].value.data()).map(|(a, b)| a * b).sum();
                Self::acc(&mut self.grads, nodes, x, |i| g[i] * sc);
                Self::acc(&mut self.grads, nodes, s, |_| dot);
            }
            &Op::Recip(x) => {
                let y = node.value.data();
                Self::acc(&mut self.grads, nodes, x, |i| -g[i] * y[i] * y[i]);
            }
            &Op::Exp(x) => {
                let y = node.value.data();
                Self::acc(&mut self.grads, nodes, x, |i| g[i] * y[i]);
            }
            &Op::Clamp(x, lo, hi) => {
                let xv = nodes[x.0].value.data();
                Self::acc(&mut self.grads, nodes, x, |i| if xv[i] >= lo && xv[i] <= hi { g[i] } else { 0.0 });
            }
            &Op::Sum(x) => Self::acc(&mut self.grads, nodes, x, |_| g[0]),
            &Op::Gelu(x) => {
                let xv = nodes[x.0].value.data();
                Self::acc(&mut self.grads, nodes, x, |i| g[i] * gelu_grad(xv[i]));
            }
            Op::LayerNorm {
                x,
                gain,
                shift,
                xhat,
                inv_std,
            } => {
                let (x, gain, shift) = (*x, *gain, *shift);
                let cols = node.value.cols();
                let gv = nodes[gain.0].value.data();
                let mut dx = vec![0.0; g.len()];
                let mut dgain = vec![0.0; cols];
                let mut dshift = vec![0.0; cols];
                let nf = cols as f64;
                for (r, inv) in inv_std.iter().enumerate() {
                    let gr = &g[r * cols..(r + 1) * cols];
                    let xh = &xhat[r * cols..(r + 1) * cols];
                    let mut sum_d = 0.0;
                    let mut sum_dx = 0.0;
                    for c in 0..cols {
                        let d = gr[c] * gv[c];
                        sum_d += d;
                        sum_dx += d * xh[c];
                        dgain[c] += gr[c] * xh[c];
                        dshift[c] += gr[c];
                    }
                    for c in 0..cols {
                        let d = gr[c] * gv[c];
                        dx[r * cols + c] = inv / nf * (nf * d - sum_d - xh[c] * sum_dx);
                    }
                }
                Self::acc(&mut self.grads, nodes, x, |i| dx[i]);
                Self::acc(&mut self.grads, nodes, gain, |i| dgain[i]);
                Self::acc(&mut self.grads, nodes, shift, |i| dshift[i]);
            }
            Op::Mask(x, mask) => {
                let x = *x;
                                Self::acc(&mut self.grads, nodes, x, |i| g[i] * mask[i]);
            }
            Op::NormalizeRows(x, norms) => {
                let x = *x;
                let cols = node.value.cols();
                let y = node.value.data();
                let mut dx = vec![0.0; g.len()];
                for (r, &norm) in norms.iter().enumerate() {
                    if norm == 0.0 {
                        continue;
                    }
                    let yr = &y[r * cols..(r + 1) * cols];
                    let gr = &g[r * cols..(r + 1) * cols];
                    let proj: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for c in 0..cols {
                        dx[r * cols + c] = (gr[c] - yr[c] * proj) / norm;
                    }
                }
                Self::acc(&mut self.grads, nodes, x, |i| dx[i]);
            }
            &Op::Transpose(x) => {
                let (n, m) = (nodes[x.0].value.rows(), nodes[x.0].value.cols());
                Self::acc(&mut self.grads, nodes, x, |k| {
                    let (i, j) = (k / m, k % m);
                    g[j * n + i]
                });
            }
            Op::Volume {
                m,
                t,
                h,
                a,
                b,
                c,
                det,
                eps,
            } => {
                let (m, t, h) = (*m, *t, *h);
                let (mv, tv, hv) = (&nodes[m.0].value, &nodes[t.0].value, &nodes[h.0].value);
                let (b1, b2, d) = (mv.rows(), tv.rows(), mv.cols());
                let mut ga = vec![0.0; b1 * b2];
                let mut gb = vec![0.0; b1 * b2];
                let mut gc = vec![0.0; b2];
                for i in 0..b1 {
                    for j in 0..b2 {
                        let k = i * b2 + j;
                        let gdet = g[k] / (2.0 * (det[k].max(0.0) + eps).sqrt());
                        let (aa, bb, cc) = (a[k], b[k], c[j]);
                        ga[k] = gdet * (-2.0 * aa + 2.0 * bb * cc);
                        gb[k] = gdet * (-2.0 * bb + 2.0 * aa * cc);
                        gc[j] += gdet * (-2.0 * cc + 2.0 * aa * bb);
                    }
                }
                if nodes[m.0].requires_grad {
                    let dm = Self::buf(&mut self.grads, nodes, m);
                    gemm(b1, b2, d, &ga, (b2, 1), tv.data(), (d, 1), dm, 1.0);
                    gemm(b1, b2, d, &gb, (b2, 1), hv.data(), (d, 1), dm, 1.0);
                }
                if nodes[t.0].requires_grad {
                    let dt = Self::buf(&mut self.grads, nodes, t);
                    gemm(b2, b1, d, &ga, (1, b2), mv.data(), (d, 1), dt, 1.0);
                    for j in 0..b2 {
                        for (o, v) in dt[j * d..(j + 1) * d].iter_mut().zip(hv.row(j)) {
                            *o += gc[j] * v;
                        }
                    }
                }
                if nodes[h.0].requires_grad {
                    let dh = Self::buf(&mut self.grads, nodes, h);
                    gemm(b2, b1, d, &gb, (1, b2), mv.data(), (d, 1), dh, 1.0);
                    for j in 0..b2 {
                        for (o, v) in dh[j * d..(j + 1) * d].iter_mut().zip(tv.row(j)) {
                            *o += gc[j] * v;
                        }
                    }
                }
            }
            Op::SoftmaxXent {
                logits,
                probs,
                smoothing,
            } => {
                let logits = *logits;
                let (n, c) = (nodes[logits.0].value.rows(), nodes[logits.0].value.cols());
                let scale = g[0] / n as f64;
                let eps = *smoothing;
                                Self::acc(&mut self.grads, nodes, logits, |k| {
                    let (i, j) = (k / c, k % c);
                    let q = eps / c as f64 + if i == j { 1.0 - eps } else { 0.0 };
                    scale * (probs[k] - q)
                });
            }
            Op::Pool {
                x,
                mode,
                groups,
                argmax,
            } => {
                let x = *x;
                if !nodes[x.0].requires_grad {
                    return;
                }
                let d = node.value.cols();
                let mode = *mode;
                                let dx = Self::buf(&mut self.grads, nodes, x);
                for (gi, members) in groups.iter().enumerate() {
                    for k in 0..d {
                        let gv = g[gi * d + k];
                        match mode {
                            PoolMode::Max => dx[argmax[gi * d + k] * d + k] += gv,
                            PoolMode::Mean => {
                                let share = gv / members.len() as f64;
                                for &r in members {
                                    dx[r * d + k] += share;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Free-function form of [`Tape::backward`].
pub fn backward(tape: &mut Tape, loss: NodeId) -> Result<(), TensorError> {
    tape.backward(loss)
}
