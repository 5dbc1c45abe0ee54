use rand::Rng;

use super::{EncodeError, RAW_DIM, SHARED_DIM};
use crate::tensor::{dropout_mask, NodeId, Tape, Tensor};

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Parameter order used everywhere a head is flattened (optimizer state,
/// checkpoints).
pub const HEAD_PARAM_NAMES: [&str; 10] = ["w1", "b1", "g1", "s1", "w2", "b2", "g2", "s2", "w3", "b3"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeadDims {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

impl Default for HeadDims {
    fn default() -> Self {
        HeadDims {
            input: RAW_DIM,
            hidden: RAW_DIM,
            output: SHARED_DIM,
        }
    }
}

impl HeadDims {
    pub fn param_shapes(&self) -> [Vec<usize>; 10] {
        let (i, h, o) = (self.input, self.hidden, self.output);
        [
            vec![i, h],
            vec![h],
            vec![h],
            vec![h],
            vec![h, h],
            vec![h],
            vec![h],
            vec![h],
            vec![h, o],
            vec![o],
        ]
    }
}

/// Linear→GELU→LayerNorm→Dropout→Linear→GELU→LayerNorm→Linear.
/// Weights are stored `[fan_in, fan_out]` so a batch is `x · W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionHead {
    pub dims: HeadDims,
    pub dropout: f64,
    /// Ordered as [`HEAD_PARAM_NAMES`].
    pub params: Vec<Tensor>,
}

#[derive(Debug, Clone, Copy)]
pub struct HeadNodes(pub [NodeId; 10]);

impl ProjectionHead {
    /// Linear layers drawn from U(±1/√fan_in); LayerNorm gains 1, shifts 0.
    pub fn init<R: Rng + ?Sized>(dims: HeadDims, dropout: f64, rng: &mut R) -> ProjectionHead {
        let params = dims
            .param_shapes()
            .iter()
            .enumerate()
            .map(|(k, shape)| {
                let n: usize = shape.iter().product();
                let data = match k {
                    2 | 6 => vec![1.0; n],
                    3 | 7 => vec![0.0; n],
                    _ => {
                        let fan_in = [dims.input, dims.hidden, dims.hidden][k / 4] as f64;
                        let bound = 1.0 / fan_in.sqrt();
                        (0..n).map(|_| rng.random_range(-bound..bound)).collect()
                    }
                };
                Tensor::new(shape.clone(), data).unwrap()
            })
            .collect();
        ProjectionHead { dims, dropout, params }
    }

    /// All-zero weights, biases, gains and shifts.
    pub fn zeros(dims: HeadDims) -> ProjectionHead {
        let params = dims.param_shapes().iter().map(|s| Tensor::zeros(s)).collect();
        ProjectionHead {
            dims,
            dropout: 0.0,
            params,
        }
    }

    pub fn register(&self, tape: &mut Tape) -> HeadNodes {
        let ids: Vec<NodeId> = self.params.iter().map(|p| tape.param(p.clone())).collect();
        HeadNodes(ids.try_into().unwrap())
    }

    /// Records the forward pass for a `[batch, input]` node. Dropout is
    /// applied only when `dropout_rng` is given.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        p: &HeadNodes,
        x: NodeId,
        dropout_rng: Option<&mut R>,
    ) -> NodeId {
        let [w1, b1, g1, s1, w2, b2, g2, s2, w3, b3] = p.0;
        let y = tape.matmul(x, w1);
        let y = tape.add_row(y, b1);
        let y = tape.gelu(y);
        let mut y = tape.layer_norm(y, g1, s1, LAYER_NORM_EPS);
        if let Some(rng) = dropout_rng {
            if self.dropout > 0.0 {
                let mask = dropout_mask(tape.value(y).len(), self.dropout, rng);
                y = tape.mask(y, mask);
            }
        }
        let y = tape.matmul(y, w2);
        let y = tape.add_row(y, b2);
        let y = tape.gelu(y);
        let y = tape.layer_norm(y, g2, s2, LAYER_NORM_EPS);
        let y = tape.matmul(y, w3);
        tape.add_row(y, b3)
    }
}

/// Projects a `[batch, input]` matrix. Output rows are not normalized.
pub fn project_batch<R: Rng + ?Sized>(
    head: &ProjectionHead,
    raw: &Tensor,
    rng: &mut R,
    training: bool,
) -> Result<Tensor, EncodeError> {
    if raw.shape().len() != 2 || raw.cols() != head.dims.input {
        return Err(EncodeError::ShapeMismatch {
            expected: head.dims.input,
            found: raw.cols(),
        });
    }
    let mut tape = Tape::new();
    let nodes = head.register(&mut tape);
    let x = tape.constant(raw.clone());
    let y = head.forward(&mut tape, &nodes, x, if training { Some(rng) } else { None });
    Ok(tape.value(y).clone())
}

/// Single-vector form of [`project_batch`].
pub fn project<R: Rng + ?Sized>(
    head: &ProjectionHead,
    raw: &[f64],
    rng: &mut R,
    training: bool,
) -> Result<Vec<f64>, EncodeError> {
    if raw.len() != head.dims.input {
        return Err(EncodeError::ShapeMismatch {
            expected: head.dims.input,
            found: raw.len(),
        });
    }
    let x = Tensor::new(vec![1, raw.len()], raw.to_vec()).unwrap();
    Ok(project_batch(head, &x, rng, training)?.into_data())
}
