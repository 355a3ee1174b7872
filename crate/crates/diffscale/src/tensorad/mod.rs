//! Minimal dense-tensor compute with reverse-mode differentiation.
//!
//! A `Tape` records operations eagerly; `backward` replays the tape in
//! reverse and accumulates analytic adjoints. Storage is f64 throughout so
//! gradient checks against central finite differences are meaningful.
//! Construction is strictly append-only, so node indices form a topological
//! order for free.

mod checkpoint;
mod ops;
mod params;

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use params::{Param, ParamStore};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorId(pub(crate) usize);

impl TensorId {
    /// Index into the gradient vector returned by `Tape::backward`.
    pub fn index(&self) -> usize {
        self.0
    }
}

#[derive(Debug)]
pub(crate) struct Node {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    pub op: Op,
    pub requires_grad: bool,
}

#[derive(Debug)]
pub(crate) enum Op {
    Leaf,
    Add(TensorId, TensorId),
    Sub(TensorId, TensorId),
    Mul(TensorId, TensorId),
    Scale(TensorId, f64),
    /// x: [C,H,W] plus per-channel bias [C] broadcast over space.
    AddBias { x: TensorId, bias: TensorId },
    /// y = W x + b with x: [N], w: [M,N], b: [M].
    Dense { x: TensorId, w: TensorId, b: TensorId },
    /// [M,K] x [K,N] -> [M,N].
    MatMul(TensorId, TensorId),
    Transpose(TensorId),
    /// x: [Cin,H,W], w: [Cout,Cin,k,k], b: [Cout]; stride 1, zero "same" padding.
    Conv2d { x: TensorId, w: TensorId, b: TensorId },
    /// Normalize each channel group to mean 0 / var 1, then per-channel affine.
    GroupNorm {
        x: TensorId,
        gamma: TensorId,
        beta: TensorId,
        groups: usize,
        mean: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Silu(TensorId),
    AvgPool2(TensorId),
    UpsampleNearest2(TensorId),
    ConcatChannels(TensorId, TensorId),
    /// Row-wise softmax on [M,N].
    SoftmaxRows(TensorId),
    Reshape(TensorId),
    MeanAll(TensorId),
}

/// Records operations and their results; owns all intermediate values.
#[derive(Debug, Default)]
pub struct Tape {
    pub(crate) nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn shape(&self, id: TensorId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn data(&self, id: TensorId) -> &[f64] {
        &self.nodes[id.0].data
    }

    pub(crate) fn push(&mut self, shape: Vec<usize>, data: Vec<f64>, op: Op) -> TensorId {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        let requires_grad = match &op {
            Op::Leaf => false,
            other => op_parents(other).iter().any(|p| self.nodes[p.0].requires_grad),
        };
        self.nodes.push(Node { shape, data, op, requires_grad });
        TensorId(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, shape: &[usize], data: Vec<f64>, requires_grad: bool) -> TensorId {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.nodes.push(Node {
            shape: shape.to_vec(),
            data,
            op: Op::Leaf,
            requires_grad,
        });
        TensorId(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, shape: &[usize], data: Vec<f64>) -> TensorId {
        self.leaf(shape, data, false)
    }

    pub fn scalar_value(&self, id: TensorId) -> f64 {
        debug_assert_eq!(self.nodes[id.0].data.len(), 1);
        self.nodes[id.0].data[0]
    }

    /// Reverse-mode sweep from a scalar loss. Returns one gradient slot per
    /// tape node; only nodes on a differentiable path to the loss carry one.
    pub fn backward(&self, loss: TensorId) -> Result<Vec<Option<Vec<f64>>>> {
        if self.nodes[loss.0].data.len() != 1 {
            return Err(Error::Usage("backward requires a scalar loss".into()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            if grads[idx].is_none() || !self.nodes[idx].requires_grad {
                continue;
            }
            self.backward_node(idx, &mut grads);
        }
        Ok(grads)
    }
}

pub(crate) fn op_parents(op: &Op) -> Vec<TensorId> {
    match op {
        Op::Leaf => vec![],
        Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::MatMul(a, b) | Op::ConcatChannels(a, b) => {
            vec![*a, *b]
        }
        Op::Scale(a, _)
        | Op::Transpose(a)
        | Op::Silu(a)
        | Op::AvgPool2(a)
        | Op::UpsampleNearest2(a)
        | Op::SoftmaxRows(a)
        | Op::Reshape(a)
        | Op::MeanAll(a) => vec![*a],
        Op::AddBias { x, bias } => vec![*x, *bias],
        Op::Dense { x, w, b } => vec![*x, *w, *b],
        Op::Conv2d { x, w, b } => vec![*x, *w, *b],
        Op::GroupNorm { x, gamma, beta, .. } => vec![*x, *gamma, *beta],
    }
}

/// Max over parameters of |g_ad - g_fd| / max(|g_ad|, |g_fd|, 1e-8), with
/// central differences at step h.
pub fn finite_diff_check(
    f: &mut dyn FnMut(&ParamStore) -> f64,
    params: &ParamStore,
    analytic: &[Vec<f64>],
    h: f64,
) -> f64 {
    let mut worst = 0.0f64;
    let mut probe = params.clone();
    for (pi, param) in params.params().iter().enumerate() {
        for si in 0..param.data.len() {
            let orig = param.data[si];
            probe.params_mut()[pi].data[si] = orig + h;
            let fp = f(&probe);
            probe.params_mut()[pi].data[si] = orig - h;
            let fm = f(&probe);
            probe.params_mut()[pi].data[si] = orig;
            let fd = (fp - fm) / (2.0 * h);
            let ad = analytic[pi][si];
            let err = (ad - fd).abs() / ad.abs().max(fd.abs()).max(1e-8);
            if err > worst {
                worst = err;
            }
        }
    }
    worst
}
