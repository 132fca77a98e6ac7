//! A small reverse-mode tape over dense row-major matrices.
//!
//! Every op is row-block structured: a batch of `B` graphs is a stack of `B`
//! row blocks, and constant graph operators act block-diagonally. The same
//! property lets [`Tape::vjp`] and [`Tape::jvp`] push `K` cotangents or
//! tangents through in one sweep by stacking them as `K` copies of a node's
//! row space.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{gemm, Matrix, SparseMatrix};

pub type NodeId = usize;

#[derive(Clone, Debug)]
pub enum Op {
    Input,
    /// Trainable leaf; the index is the caller's parameter slot.
    Param(usize),
    /// Block-diagonal product with a constant operator.
    Propagate {
        x: NodeId,
        op: Arc<SparseMatrix>,
    },
    /// `x · w`.
    MatMul {
        x: NodeId,
        w: NodeId,
    },
    /// `x + 1 bᵀ` for a `1 × c` row `b`.
    AddBias {
        x: NodeId,
        b: NodeId,
    },
    Add {
        a: NodeId,
        b: NodeId,
    },
    Gelu {
        x: NodeId,
    },
    /// Mean over each block of `block` rows.
    MeanPool {
        x: NodeId,
        block: usize,
    },
    /// Appends `extra` zero rows after each block of `block` rows.
    PadRows {
        x: NodeId,
        block: usize,
        extra: usize,
    },
    /// Keeps the first `keep` rows of each block of `block` rows.
    TakeRows {
        x: NodeId,
        block: usize,
        keep: usize,
    },
    /// Mean of squared differences to a fixed target; a `1 × 1` result.
    SquaredError {
        pred: NodeId,
        target: Matrix,
    },
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Matrix,
}

#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2))
}

pub fn gelu_derivative(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2))
        + x * FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Multiplies each stacked copy of `deriv`'s shape elementwise.
fn tiled_product(stacked: &Matrix, deriv: &Matrix) -> Matrix {
    let period = deriv.as_slice().len();
    let mut out = stacked.clone();
    for (i, v) in out.as_mut_slice().iter_mut().enumerate() {
        *v *= deriv.as_slice()[i % period];
    }
    out
}

fn mean_pool(x: &Matrix, block: usize) -> Matrix {
    let blocks = x.rows() / block;
    let c = x.cols();
    let mut out = Matrix::zeros(blocks, c);
    let scale = 1.0 / block as f64;
    for b in 0..blocks {
        for r in 0..block {
            for (o, v) in out.row_mut(b).iter_mut().zip(x.row(b * block + r)) {
                *o += v;
            }
        }
        out.row_mut(b).iter_mut().for_each(|o| *o *= scale);
    }
    out
}

fn mean_pool_transpose(dy: &Matrix, block: usize) -> Matrix {
    let c = dy.cols();
    let mut out = Matrix::zeros(dy.rows() * block, c);
    let scale = 1.0 / block as f64;
    for b in 0..dy.rows() {
        for r in 0..block {
            for (o, v) in out.row_mut(b * block + r).iter_mut().zip(dy.row(b)) {
                *o = v * scale;
            }
        }
    }
    out
}

fn pad_rows(x: &Matrix, block: usize, extra: usize) -> Matrix {
    let blocks = x.rows() / block;
    let c = x.cols();
    let mut out = Matrix::zeros(blocks * (block + extra), c);
    for b in 0..blocks {
        for r in 0..block {
            out.row_mut(b * (block + extra) + r)
                .copy_from_slice(x.row(b * block + r));
        }
    }
    out
}

fn take_rows(x: &Matrix, block: usize, keep: usize) -> Matrix {
    let blocks = x.rows() / block;
    let c = x.cols();
    let mut out = Matrix::zeros(blocks * keep, c);
    for b in 0..blocks {
        for r in 0..keep {
            out.row_mut(b * keep + r)
                .copy_from_slice(x.row(b * block + r));
        }
    }
    out
}

fn add_bias(x: &Matrix, b: &Matrix) -> Matrix {
    let mut out = x.clone();
    for i in 0..out.rows() {
        for (o, v) in out.row_mut(i).iter_mut().zip(b.row(0)) {
            *o += v;
        }
    }
    out
}

fn column_sums(x: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(1, x.cols());
    for i in 0..x.rows() {
        for (o, v) in out.row_mut(0).iter_mut().zip(x.row(i)) {
            *o += v;
        }
    }
    out
}

fn accumulate(slot: &mut Option<Matrix>, g: Matrix) {
    match slot {
        Some(acc) => acc.add_assign(&g),
        None => *slot = Some(g),
    }
}

fn shape_error(what: &str, a: &Matrix, b: &Matrix) -> Error {
    Error::DimensionMismatch(format!(
        "{what}: {}x{} vs {}x{}",
        a.rows(),
        a.cols(),
        b.rows(),
        b.cols()
    ))
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

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id].value
    }

    pub fn op(&self, id: NodeId) -> &Op {
        &self.nodes[id].op
    }

    fn push(&mut self, op: Op, value: Matrix) -> NodeId {
        self.nodes.push(Node { op, value });
        self.nodes.len() - 1
    }

    pub fn input(&mut self, x: Matrix) -> NodeId {
        self.push(Op::Input, x)
    }

    pub fn param(&mut self, slot: usize, w: Matrix) -> NodeId {
        self.push(Op::Param(slot), w)
    }

    pub fn propagate(&mut self, x: NodeId, op: Arc<SparseMatrix>) -> Result<NodeId> {
        let xv = self.value(x);
        if op.cols() == 0 || xv.rows() % op.cols() != 0 {
            return Err(Error::DimensionMismatch(format!(
                "operator over {} nodes cannot act on {} rows",
                op.cols(),
                xv.rows()
            )));
        }
        let value = op.apply_blocks(xv);
        Ok(self.push(Op::Propagate { x, op }, value))
    }

    pub fn matmul(&mut self, x: NodeId, w: NodeId) -> Result<NodeId> {
        let (xv, wv) = (self.value(x), self.value(w));
        if xv.cols() != wv.rows() {
            return Err(shape_error("matmul", xv, wv));
        }
        let value = gemm(xv, false, wv, false);
        Ok(self.push(Op::MatMul { x, w }, value))
    }

    pub fn add_bias(&mut self, x: NodeId, b: NodeId) -> Result<NodeId> {
        let (xv, bv) = (self.value(x), self.value(b));
        if bv.rows() != 1 || bv.cols() != xv.cols() {
            return Err(shape_error("bias", xv, bv));
        }
        let value = add_bias(xv, bv);
        Ok(self.push(Op::AddBias { x, b }, value))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.value(a).add(self.value(b))?;
        Ok(self.push(Op::Add { a, b }, value))
    }

    pub fn gelu(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).map(gelu);
        self.push(Op::Gelu { x }, value)
    }

    pub fn mean_pool(&mut self, x: NodeId, block: usize) -> Result<NodeId> {
        let xv = self.value(x);
        if block == 0 || xv.rows() % block != 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} rows do not split into blocks of {block}",
                xv.rows()
            )));
        }
        let value = mean_pool(xv, block);
        Ok(self.push(Op::MeanPool { x, block }, value))
    }

    pub fn pad_rows(&mut self, x: NodeId, block: usize, extra: usize) -> Result<NodeId> {
        let xv = self.value(x);
        if block == 0 || xv.rows() % block != 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} rows do not split into blocks of {block}",
                xv.rows()
            )));
        }
        let value = pad_rows(xv, block, extra);
        Ok(self.push(Op::PadRows { x, block, extra }, value))
    }

    pub fn take_rows(&mut self, x: NodeId, block: usize, keep: usize) -> Result<NodeId> {
        let xv = self.value(x);
        if block == 0 || keep > block || xv.rows() % block != 0 {
            return Err(Error::DimensionMismatch(format!(
                "cannot keep {keep} of every {block} rows from {}",
                xv.rows()
            )));
        }
        let value = take_rows(xv, block, keep);
        Ok(self.push(Op::TakeRows { x, block, keep }, value))
    }

    pub fn squared_error(&mut self, pred: NodeId, target: Matrix) -> Result<NodeId> {
        let pv = self.value(pred);
        if pv.rows() != target.rows() || pv.cols() != target.cols() {
            return Err(shape_error("squared error", pv, &target));
        }
        let count = pv.as_slice().len().max(1) as f64;
        let loss = pv
            .as_slice()
            .iter()
            .zip(target.as_slice())
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / count;
        let value = Matrix::from_vec(1, 1, vec![loss])?;
        Ok(self.push(Op::SquaredError { pred, target }, value))
    }

    /// Full reverse sweep from `output` seeded with `seed` (same shape as the
    /// output). Returns a gradient slot per node, `None` where unreached.
    pub fn backward(&self, output: NodeId, seed: Matrix) -> Vec<Option<Matrix>> {
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[output] = Some(seed);
        for id in (0..=output).rev() {
            let Some(g) = grads[id].take() else { continue };
            self.push_back(id, &g, &mut grads, true);
            grads[id] = Some(g);
        }
        grads
    }

    /// Gradients of every parameter slot from a scalar output.
    pub fn param_gradients(&self, output: NodeId, slots: usize) -> Vec<Option<Matrix>> {
        let ones = Matrix::from_vec(1, 1, vec![1.0]).expect("1x1");
        let grads = self.backward(output, ones);
        let mut out = vec![None; slots];
        for (id, node) in self.nodes.iter().enumerate() {
            if let (Op::Param(slot), Some(g)) = (&node.op, &grads[id]) {
                accumulate(&mut out[*slot], g.clone());
            }
        }
        out
    }

    fn push_back(&self, id: NodeId, g: &Matrix, grads: &mut [Option<Matrix>], with_params: bool) {
        match &self.nodes[id].op {
            Op::Input | Op::Param(_) => {}
            Op::Propagate { x, op } => accumulate(&mut grads[*x], op.apply_transpose_blocks(g)),
            Op::MatMul { x, w } => {
                let wv = self.value(*w);
                accumulate(&mut grads[*x], gemm(g, false, wv, true));
                if with_params {
                    accumulate(&mut grads[*w], gemm(self.value(*x), true, g, false));
                }
            }
            Op::AddBias { x, b } => {
                accumulate(&mut grads[*x], g.clone());
                if with_params {
                    accumulate(&mut grads[*b], column_sums(g));
                }
            }
            Op::Add { a, b } => {
                accumulate(&mut grads[*a], g.clone());
                accumulate(&mut grads[*b], g.clone());
            }
            Op::Gelu { x } => {
                let d = self.value(*x).map(gelu_derivative);
                accumulate(&mut grads[*x], tiled_product(g, &d));
            }
            Op::MeanPool { x, block } => accumulate(&mut grads[*x], mean_pool_transpose(g, *block)),
            Op::PadRows { x, block, extra } => {
                accumulate(&mut grads[*x], take_rows(g, block + extra, *block))
            }
            Op::TakeRows { x, block, keep } => {
                let blocks = g.rows() / keep;
                let c = g.cols();
                let mut out = Matrix::zeros(blocks * block, c);
                for bi in 0..blocks {
                    for r in 0..*keep {
                        out.row_mut(bi * block + r)
                            .copy_from_slice(g.row(bi * keep + r));
                    }
                }
                accumulate(&mut grads[*x], out)
            }
            Op::SquaredError { pred, target } => {
                let pv = self.value(*pred);
                let scale = 2.0 * g.as_slice()[0] / pv.as_slice().len().max(1) as f64;
                let diff = pv.sub(target).expect("shapes checked on record");
                accumulate(&mut grads[*pred], diff.scale(scale));
            }
        }
    }

    /// Nodes whose value depends on `wrt`.
    fn dependents(&self, wrt: NodeId) -> Vec<bool> {
        let mut dep = vec![false; self.nodes.len()];
        dep[wrt] = true;
        for id in wrt + 1..self.nodes.len() {
            dep[id] = match &self.nodes[id].op {
                Op::Input | Op::Param(_) => false,
                Op::Propagate { x, .. }
                | Op::Gelu { x }
                | Op::MeanPool { x, .. }
                | Op::PadRows { x, .. }
                | Op::TakeRows { x, .. } => dep[*x],
                Op::MatMul { x, w } => dep[*x] || dep[*w],
                Op::AddBias { x, b } => dep[*x] || dep[*b],
                Op::Add { a, b } => dep[*a] || dep[*b],
                Op::SquaredError { pred, .. } => dep[*pred],
            };
        }
        dep
    }

    fn check_stack(&self, id: NodeId, stacked: &Matrix) -> Result<usize> {
        let v = self.value(id);
        if stacked.cols() != v.cols() || v.rows() == 0 || stacked.rows() % v.rows() != 0 {
            return Err(shape_error("stacked seeds", v, stacked));
        }
        Ok(stacked.rows() / v.rows())
    }

    /// Vector-Jacobian products of `output` with respect to `wrt` for `K`
    /// stacked cotangents (`K · rows(output)` rows). Parameters are held
    /// constant; `wrt` must not feed the right operand of a product.
    pub fn vjp(&self, output: NodeId, wrt: NodeId, cotangents: &Matrix) -> Result<Matrix> {
        let k = self.check_stack(output, cotangents)?;
        let dep = self.dependents(wrt);
        if !dep[output] {
            return Ok(Matrix::zeros(
                k * self.value(wrt).rows(),
                self.value(wrt).cols(),
            ));
        }
        self.check_linear_in(wrt, &dep)?;
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[output] = Some(cotangents.clone());
        for id in (wrt + 1..=output).rev() {
            if !dep[id] {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            self.push_back(id, &g, &mut grads, false);
        }
        Ok(grads[wrt]
            .take()
            .unwrap_or_else(|| Matrix::zeros(k * self.value(wrt).rows(), self.value(wrt).cols())))
    }

    fn check_linear_in(&self, wrt: NodeId, dep: &[bool]) -> Result<()> {
        for node in &self.nodes[wrt + 1..] {
            match &node.op {
                Op::MatMul { w, .. } if dep[*w] => {
                    return Err(Error::Unsupported(
                        "stacked sweeps need constant right operands".into(),
                    ))
                }
                Op::AddBias { b, .. } if dep[*b] => {
                    return Err(Error::Unsupported(
                        "stacked sweeps need constant biases".into(),
                    ))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Jacobian-vector products of `output` with respect to `wrt` for `K`
    /// stacked tangents (`K · rows(wrt)` rows).
    pub fn jvp(&self, wrt: NodeId, output: NodeId, tangents: &Matrix) -> Result<Matrix> {
        let k = self.check_stack(wrt, tangents)?;
        let dep = self.dependents(wrt);
        if !dep[output] {
            return Ok(Matrix::zeros(
                k * self.value(output).rows(),
                self.value(output).cols(),
            ));
        }
        self.check_linear_in(wrt, &dep)?;
        let mut tan: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        tan[wrt] = Some(tangents.clone());
        for id in wrt + 1..=output {
            if !dep[id] {
                continue;
            }
            let t = |n: &NodeId| tan[*n].as_ref();
            let value = match &self.nodes[id].op {
                Op::Input | Op::Param(_) => None,
                Op::Propagate { x, op } => t(x).map(|tx| op.apply_blocks(tx)),
                Op::MatMul { x, w } => t(x).map(|tx| gemm(tx, false, self.value(*w), false)),
                Op::AddBias { x, .. } => t(x).cloned(),
                Op::Add { a, b } => match (t(a), t(b)) {
                    (Some(ta), Some(tb)) => Some(ta.add(tb)?),
                    (Some(ta), None) => Some(ta.clone()),
                    (None, Some(tb)) => Some(tb.clone()),
                    (None, None) => None,
                },
                Op::Gelu { x } => {
                    t(x).map(|tx| tiled_product(tx, &self.value(*x).map(gelu_derivative)))
                }
                Op::MeanPool { x, block } => t(x).map(|tx| mean_pool(tx, *block)),
                Op::PadRows { x, block, extra } => t(x).map(|tx| pad_rows(tx, *block, *extra)),
                Op::TakeRows { x, block, keep } => t(x).map(|tx| take_rows(tx, *block, *keep)),
                Op::SquaredError { .. } => {
                    return Err(Error::Unsupported("forward sweep through a loss".into()))
                }
            };
            tan[id] = value;
        }
        Ok(tan[output].take().unwrap_or_else(|| {
            Matrix::zeros(k * self.value(output).rows(), self.value(output).cols())
        }))
    }
}
