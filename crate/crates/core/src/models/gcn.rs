//! Graph convolutional networks built on the tape.
//!
//! Layer rule `H ← act([H +] Â H W)` between linear input and output
//! projections. A virtual node, when enabled, is appended to every graph
//! block after the input projection (with zero hidden state) and removed
//! again before the head, so it never appears among the Jacobian's nodes.

use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::tape::{NodeId, Tape};
use crate::error::{Error, Result};
use crate::estimator::MaskSet;
use crate::graphs::{sym_norm_adjacency_sparse, with_virtual_node, Graph};
use crate::linalg::{Matrix, SparseMatrix};
use crate::range::{HessianTensor, JacobianTensor};
use crate::rng::{seeded, stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Activation {
    Identity,
    Gelu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Head {
    /// Per-node outputs.
    NodeRegression,
    /// Mean over nodes, then `head_layers` GeLU layers and an affine map.
    MeanPoolMlp,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub depth: usize,
    pub hidden_dim: usize,
    pub activation: Activation,
    pub residual: bool,
    pub virtual_node: bool,
    pub head: Head,
    pub self_loops: bool,
    #[serde(default = "one")]
    pub in_dim: usize,
    #[serde(default = "one")]
    pub out_dim: usize,
    #[serde(default)]
    pub head_layers: usize,
}

fn one() -> usize {
    1
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            depth: 5,
            hidden_dim: 64,
            activation: Activation::Identity,
            residual: true,
            virtual_node: false,
            head: Head::NodeRegression,
            self_loops: true,
            in_dim: 1,
            out_dim: 1,
            head_layers: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::Config("model depth must be at least 1".into()));
        }
        if self.hidden_dim == 0 || self.in_dim == 0 || self.out_dim == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        if self.head == Head::NodeRegression && self.head_layers > 0 {
            return Err(Error::Config("head layers need the mean-pool head".into()));
        }
        Ok(())
    }

    /// `(name, rows, cols)` for every parameter slot, in slot order.
    pub fn parameter_shapes(&self) -> Vec<(String, usize, usize)> {
        let h = self.hidden_dim;
        let mut shapes = vec![
            ("in.weight".to_string(), self.in_dim, h),
            ("in.bias".to_string(), 1, h),
        ];
        for l in 0..self.depth {
            shapes.push((format!("layer{l}.weight"), h, h));
        }
        if self.head == Head::MeanPoolMlp {
            for i in 0..self.head_layers {
                shapes.push((format!("head{i}.weight"), h, h));
                shapes.push((format!("head{i}.bias"), 1, h));
            }
        }
        shapes.push(("out.weight".to_string(), h, self.out_dim));
        shapes.push(("out.bias".to_string(), 1, self.out_dim));
        shapes
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub value: Matrix,
}

/// Model weights with the configuration and seed that produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub config: ModelConfig,
    pub seed: u64,
    pub tensors: Vec<NamedTensor>,
}

impl Parameters {
    /// Weights `U(±1/√fan_in)`, biases zero.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = seeded(seed, stream::INIT);
        let tensors = cfg
            .parameter_shapes()
            .into_iter()
            .map(|(name, rows, cols)| {
                let value = if name.ends_with(".bias") {
                    Matrix::zeros(rows, cols)
                } else {
                    let bound = 1.0 / (rows as f64).sqrt();
                    let data = (0..rows * cols)
                        .map(|_| rng.random_range(-bound..bound))
                        .collect();
                    Matrix::from_vec(rows, cols, data).expect("shape from config")
                };
                NamedTensor { name, value }
            })
            .collect();
        Ok(Parameters {
            config: cfg.clone(),
            seed,
            tensors,
        })
    }

    /// All-zero weights for hand-set models.
    pub fn zeros(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let tensors = cfg
            .parameter_shapes()
            .into_iter()
            .map(|(name, rows, cols)| NamedTensor {
                name,
                value: Matrix::zeros(rows, cols),
            })
            .collect();
        Ok(Parameters {
            config: cfg.clone(),
            seed: 0,
            tensors,
        })
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn slot(&self, name: &str) -> Option<usize> {
        self.tensors.iter().position(|t| t.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.slot(name).map(|i| &self.tensors[i].value)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Matrix> {
        self.slot(name).map(move |i| &mut self.tensors[i].value)
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.value.is_finite())
    }

    /// Checks names and shapes against the stored configuration.
    pub fn validate(&self) -> Result<()> {
        let shapes = self.config.parameter_shapes();
        if shapes.len() != self.tensors.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} tensors, found {}",
                shapes.len(),
                self.tensors.len()
            )));
        }
        for ((name, rows, cols), t) in shapes.iter().zip(&self.tensors) {
            if *name != t.name || *rows != t.value.rows() || *cols != t.value.cols() {
                return Err(Error::DimensionMismatch(format!(
                    "tensor `{}` is {}x{}, expected `{name}` {rows}x{cols}",
                    t.name,
                    t.value.rows(),
                    t.value.cols()
                )));
            }
        }
        if !self.is_finite() {
            return Err(Error::InvalidArgument("parameters are not finite".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("parameters serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Parameters = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        p.validate()?;
        Ok(p)
    }
}

/// Propagation operator for one graph under a given configuration.
#[derive(Clone, Debug)]
pub struct GraphOperator {
    /// Nodes of the original graph.
    pub n: usize,
    /// Rows per graph block inside the network (`n + 1` with a virtual node).
    pub block: usize,
    pub op: Arc<SparseMatrix>,
}

impl GraphOperator {
    pub fn new(cfg: &ModelConfig, g: &Graph) -> Result<Self> {
        let n = g.node_count();
        let (op, block) = if cfg.virtual_node {
            (
                sym_norm_adjacency_sparse(&with_virtual_node(g), cfg.self_loops)?,
                n + 1,
            )
        } else {
            (sym_norm_adjacency_sparse(g, cfg.self_loops)?, n)
        };
        Ok(GraphOperator {
            n,
            block,
            op: Arc::new(op),
        })
    }
}

/// A recorded forward pass over a batch of graphs.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    pub tape: Tape,
    pub input: NodeId,
    /// Final node representation before any pooling head.
    pub prepool: NodeId,
    pub output: NodeId,
    pub batch: usize,
}

impl ForwardPass {
    pub fn output(&self) -> &Matrix {
        self.tape.value(self.output)
    }

    pub fn prepool(&self) -> &Matrix {
        self.tape.value(self.prepool)
    }
}

/// Runs the network on `B` stacked graphs (`x` has `B · n` rows).
pub fn forward_batch(params: &Parameters, gop: &GraphOperator, x: Matrix) -> Result<ForwardPass> {
    let cfg = &params.config;
    if x.cols() != cfg.in_dim || x.rows() == 0 || x.rows() % gop.n != 0 {
        return Err(Error::DimensionMismatch(format!(
            "features are {}x{}, model expects blocks of {}x{}",
            x.rows(),
            x.cols(),
            gop.n,
            cfg.in_dim
        )));
    }
    let batch = x.rows() / gop.n;
    let mut t = Tape::new();
    let slots: Vec<NodeId> = params
        .tensors
        .iter()
        .enumerate()
        .map(|(i, p)| t.param(i, p.value.clone()))
        .collect();
    let slot = |name: &str| {
        params
            .slot(name)
            .map(|i| slots[i])
            .expect("slot from config")
    };

    let input = t.input(x);
    let mut h = t.matmul(input, slot("in.weight"))?;
    h = t.add_bias(h, slot("in.bias"))?;
    if cfg.virtual_node {
        h = t.pad_rows(h, gop.n, gop.block - gop.n)?;
    }
    for l in 0..cfg.depth {
        let p = t.propagate(h, gop.op.clone())?;
        let m = t.matmul(p, slot(&format!("layer{l}.weight")))?;
        let pre = if cfg.residual { t.add(h, m)? } else { m };
        h = match cfg.activation {
            Activation::Identity => pre,
            Activation::Gelu => t.gelu(pre),
        };
    }
    if cfg.virtual_node {
        h = t.take_rows(h, gop.block, gop.n)?;
    }
    let prepool = h;
    let mut z = match cfg.head {
        Head::NodeRegression => h,
        Head::MeanPoolMlp => t.mean_pool(h, gop.n)?,
    };
    for i in 0..cfg.head_layers {
        let m = t.matmul(z, slot(&format!("head{i}.weight")))?;
        let m = t.add_bias(m, slot(&format!("head{i}.bias")))?;
        z = t.gelu(m);
    }
    let out = t.matmul(z, slot("out.weight"))?;
    let output = t.add_bias(out, slot("out.bias"))?;
    Ok(ForwardPass {
        tape: t,
        input,
        prepool,
        output,
        batch,
    })
}

/// Single-graph forward pass.
pub fn forward(params: &Parameters, g: &Graph, x: &Matrix) -> Result<ForwardPass> {
    params.validate()?;
    let gop = GraphOperator::new(&params.config, g)?;
    if x.rows() != gop.n {
        return Err(Error::DimensionMismatch(format!(
            "{} feature rows for {} nodes",
            x.rows(),
            gop.n
        )));
    }
    forward_batch(params, &gop, x.clone())
}

/// How a Jacobian was extracted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JacobianMode {
    /// One stacked reverse sweep per selected output entry.
    Reverse,
    /// One stacked forward sweep per selected input entry.
    Forward,
}

const MAX_STACK_ROWS: usize = 1 << 14;

/// Jacobian of the node outputs (node head) or the pre-pooling features
/// (graph head) with respect to the input features. Entries outside the
/// masks are left at zero and the masks are recorded on the tensor.
pub fn model_jacobian(
    params: &Parameters,
    g: &Graph,
    x: &Matrix,
    masks: Option<&MaskSet>,
) -> Result<JacobianTensor> {
    let pass = forward(params, g, x)?;
    jacobian_from_pass(&pass, params.config.head, masks).map(|(j, _)| j)
}

pub fn jacobian_from_pass(
    pass: &ForwardPass,
    head: Head,
    masks: Option<&MaskSet>,
) -> Result<(JacobianTensor, JacobianMode)> {
    if pass.batch != 1 {
        return Err(Error::Unsupported(
            "jacobians are taken one graph at a time".into(),
        ));
    }
    let target = match head {
        Head::NodeRegression => pass.output,
        Head::MeanPoolMlp => pass.prepool,
    };
    let t = &pass.tape;
    let (n_out, c) = (t.value(target).rows(), t.value(target).cols());
    let (n_in, d) = (t.value(pass.input).rows(), t.value(pass.input).cols());
    let mut j = JacobianTensor::zeros(n_out, c, n_in, d);
    if let Some(m) = masks {
        m.check(n_out, n_in, d, c)?;
        j.out_node_mask = m.out_nodes.clone();
        j.in_node_mask = m.in_nodes.clone();
        j.in_channel_mask = m.in_channels.clone();
        j.out_channel_mask = m.out_channels.clone();
    }
    let outs: Vec<(usize, usize)> = (0..n_out)
        .filter(|&u| j.out_node_mask[u])
        .flat_map(|u| (0..c).map(move |a| (u, a)))
        .filter(|&(_, a)| j.out_channel_mask[a])
        .collect();
    let ins: Vec<(usize, usize)> = (0..n_in)
        .filter(|&v| j.in_node_mask[v])
        .flat_map(|v| (0..d).map(move |b| (v, b)))
        .filter(|&(_, b)| j.in_channel_mask[b])
        .collect();

    let mode = if outs.len() <= ins.len() {
        JacobianMode::Reverse
    } else {
        JacobianMode::Forward
    };
    match mode {
        JacobianMode::Reverse => {
            let chunk = (MAX_STACK_ROWS / n_out.max(n_in)).max(1);
            for group in outs.chunks(chunk) {
                let mut seeds = Matrix::zeros(group.len() * n_out, c);
                for (k, &(u, a)) in group.iter().enumerate() {
                    seeds[(k * n_out + u, a)] = 1.0;
                }
                let grads = t.vjp(target, pass.input, &seeds)?;
                for (k, &(u, a)) in group.iter().enumerate() {
                    for &(v, b) in &ins {
                        j.set(u, a, v, b, grads[(k * n_in + v, b)]);
                    }
                }
            }
        }
        JacobianMode::Forward => {
            let chunk = (MAX_STACK_ROWS / n_out.max(n_in)).max(1);
            for group in ins.chunks(chunk) {
                let mut tangents = Matrix::zeros(group.len() * n_in, d);
                for (k, &(v, b)) in group.iter().enumerate() {
                    tangents[(k * n_in + v, b)] = 1.0;
                }
                let outs_t = t.jvp(pass.input, target, &tangents)?;
                for (k, &(v, b)) in group.iter().enumerate() {
                    for &(u, a) in &outs {
                        j.set(u, a, v, b, outs_t[(k * n_out + u, a)]);
                    }
                }
            }
        }
    }
    Ok((j, mode))
}

/// Exact gradients of each graph-level output channel for a batch of inputs:
/// returns one `(B · n) × d` matrix per output channel.
fn batch_input_gradients(
    params: &Parameters,
    gop: &GraphOperator,
    x: Matrix,
) -> Result<Vec<Matrix>> {
    let pass = forward_batch(params, gop, x)?;
    let out = pass.output();
    (0..out.cols())
        .map(|gamma| {
            let mut seeds = Matrix::zeros(out.rows(), out.cols());
            for b in 0..out.rows() {
                seeds[(b, gamma)] = 1.0;
            }
            pass.tape.vjp(pass.output, pass.input, &seeds)
        })
        .collect()
}

/// Input gradient of each graph-level output channel.
pub fn model_gradient(params: &Parameters, g: &Graph, x: &Matrix) -> Result<Vec<Matrix>> {
    require_scalar_head(&params.config)?;
    let gop = GraphOperator::new(&params.config, g)?;
    batch_input_gradients(params, &gop, x.clone())
}

fn require_scalar_head(cfg: &ModelConfig) -> Result<()> {
    if cfg.head != Head::MeanPoolMlp {
        return Err(Error::Unsupported(
            "hessians need a graph-level head".into(),
        ));
    }
    Ok(())
}

const HESSIAN_CHUNK: usize = 16;

/// Hessian by central differences of exact gradients, before symmetrization.
pub fn model_hessian_raw(params: &Parameters, g: &Graph, x: &Matrix) -> Result<HessianTensor> {
    params.validate()?;
    require_scalar_head(&params.config)?;
    let gop = GraphOperator::new(&params.config, g)?;
    let (n, d, c) = (gop.n, params.config.in_dim, params.config.out_dim);
    if x.rows() != n || x.cols() != d {
        return Err(Error::DimensionMismatch(format!(
            "features are {}x{}, expected {n}x{d}",
            x.rows(),
            x.cols()
        )));
    }
    let h = 1e-4 * x.max_abs().max(1.0);
    let positions: Vec<(usize, usize)> = (0..n).flat_map(|v| (0..d).map(move |b| (v, b))).collect();
    let mut hess = HessianTensor::zeros(n, d, c);
    for group in positions.chunks(HESSIAN_CHUNK) {
        // Blocks 2k and 2k+1 hold X + h e_vb and X − h e_vb.
        let mut stacked = Vec::with_capacity(2 * group.len() * n * d);
        for &(v, b) in group {
            for sign in [1.0, -1.0] {
                let mut xp = x.clone();
                xp[(v, b)] += sign * h;
                stacked.extend_from_slice(xp.as_slice());
            }
        }
        let batch = Matrix::from_vec(2 * group.len() * n, d, stacked)?;
        let grads = batch_input_gradients(params, &gop, batch)?;
        for (gamma, grad) in grads.iter().enumerate() {
            for (k, &(v, b)) in group.iter().enumerate() {
                for u in 0..n {
                    for a in 0..d {
                        let plus = grad[((2 * k) * n + u, a)];
                        let minus = grad[((2 * k + 1) * n + u, a)];
                        hess.set(u, a, v, b, gamma, (plus - minus) / (2.0 * h));
                    }
                }
            }
        }
    }
    Ok(hess)
}

/// Symmetrized finite-difference Hessian of a graph-level model.
pub fn model_hessian_scalar(params: &Parameters, g: &Graph, x: &Matrix) -> Result<HessianTensor> {
    let mut h = model_hessian_raw(params, g, x)?;
    h.symmetrize();
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distances::spd_all_pairs;
    use crate::graphs::{build_cycle, build_line};
    use crate::range::hessian_node_range;
    use crate::tasks::{pairwise_graph_task, PairwiseTaskSpec};

    fn cfg(depth: usize, hidden: usize) -> ModelConfig {
        ModelConfig {
            depth,
            hidden_dim: hidden,
            ..ModelConfig::default()
        }
    }

    fn col(xs: &[f64]) -> Matrix {
        Matrix::from_vec(xs.len(), 1, xs.to_vec()).unwrap()
    }

    #[test]
    fn zero_layers_with_residual_are_identity() {
        let c = cfg(3, 4);
        let mut p = Parameters::init(&c, 1).unwrap();
        for l in 0..3 {
            *p.get_mut(&format!("layer{l}.weight")).unwrap() = Matrix::zeros(4, 4);
        }
        let x = col(&[0.5, -1.0, 2.0]);
        let g = build_line(3).unwrap();
        let pass = forward(&p, &g, &x).unwrap();
        let proj = crate::linalg::gemm(&x, false, p.get("in.weight").unwrap(), false);
        assert!(pass.prepool().max_abs_diff(&proj) < 1e-15);
    }

    #[test]
    fn single_propagation_on_path() {
        let c = ModelConfig {
            depth: 1,
            hidden_dim: 1,
            residual: false,
            self_loops: false,
            ..ModelConfig::default()
        };
        let mut p = Parameters::zeros(&c).unwrap();
        for name in ["in.weight", "layer0.weight", "out.weight"] {
            *p.get_mut(name).unwrap() = Matrix::identity(1);
        }
        let pass = forward(&p, &build_line(3).unwrap(), &col(&[1.0, 5.0, 2.0])).unwrap();
        assert!((pass.output()[(1, 0)] - 3.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn virtual_node_crosses_components() {
        let g = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap().0;
        let base = ModelConfig {
            depth: 2,
            hidden_dim: 3,
            residual: false,
            ..ModelConfig::default()
        };
        let with_vn = ModelConfig {
            virtual_node: true,
            ..base.clone()
        };
        let x = col(&[1.0, -0.5, 0.25, 2.0]);
        let j0 = model_jacobian(&Parameters::init(&base, 4).unwrap(), &g, &x, None).unwrap();
        let j1 = model_jacobian(&Parameters::init(&with_vn, 4).unwrap(), &g, &x, None).unwrap();
        assert_eq!(j0.get(0, 0, 3, 0), 0.0);
        assert!(j1.get(0, 0, 3, 0).abs() > 1e-8);
        assert_eq!(j1.shape(), (4, 1, 4, 1));
    }

    #[test]
    fn forward_and_reverse_modes_agree() {
        let c = ModelConfig {
            depth: 2,
            hidden_dim: 3,
            activation: Activation::Gelu,
            in_dim: 2,
            out_dim: 4,
            ..ModelConfig::default()
        };
        let p = Parameters::init(&c, 9).unwrap();
        let g = build_line(5).unwrap();
        let x = Matrix::from_vec(5, 2, (0..10).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        let pass = forward(&p, &g, &x).unwrap();
        let (jf, mode) = jacobian_from_pass(&pass, Head::NodeRegression, None).unwrap();
        assert_eq!(mode, JacobianMode::Forward);
        // Masking every other output node flips the cost comparison.
        let mut masks = MaskSet::full(5, 5, 2, 4);
        masks.out_nodes = vec![true, false, false, false, false];
        let (jr, mode) = jacobian_from_pass(&pass, Head::NodeRegression, Some(&masks)).unwrap();
        assert_eq!(mode, JacobianMode::Reverse);
        for a in 0..4 {
            for v in 0..5 {
                for b in 0..2 {
                    assert!((jf.get(0, a, v, b) - jr.get(0, a, v, b)).abs() < 1e-14);
                }
            }
        }
    }

    /// Depth-1 residual GeLU network reproducing the pooled squared
    /// difference over 1-hop neighborhoods of a cycle, using
    /// `GeLU(t) + GeLU(−t) ≈ √(2/π) t²` for small `t`.
    fn quadratic_model(n: usize) -> (ModelConfig, Parameters) {
        let c = ModelConfig {
            depth: 1,
            hidden_dim: 6,
            activation: Activation::Gelu,
            residual: true,
            self_loops: false,
            head: Head::MeanPoolMlp,
            ..ModelConfig::default()
        };
        let mut p = Parameters::zeros(&c).unwrap();
        let eps = 1e-3;
        *p.get_mut("in.weight").unwrap() =
            Matrix::from_rows(&[[eps, -eps, eps, -eps, 0.0, 0.0]]).unwrap();
        let mut w = Matrix::zeros(6, 6);
        for (i, j) in [(0, 2), (1, 3), (0, 4), (1, 5)] {
            w[(i, j)] = 1.0;
        }
        *p.get_mut("layer0.weight").unwrap() = w;
        // y = (2/n) Σ_u [3x² − (x + b)² + b²] with b = Âx, whose mean-pool
        // form needs the per-channel coefficients below.
        let s = (std::f64::consts::PI / 2.0).sqrt() / (eps * eps);
        let coeffs = [6.0, 6.0, -2.0, -2.0, 2.0, 2.0];
        *p.get_mut("out.weight").unwrap() =
            Matrix::from_vec(6, 1, coeffs.iter().map(|c| c * s).collect()).unwrap();
        let _ = n;
        (c, p)
    }

    #[test]
    fn hand_set_model_matches_exact_hessian() {
        let n = 8;
        let g = build_cycle(n).unwrap();
        let (_, p) = quadratic_model(n);
        let x = col(&[0.3, -1.2, 0.8, 0.1, -0.5, 1.7, -0.9, 0.4]);
        let spec = PairwiseTaskSpec::squared_difference_graph(&g, 1).unwrap();
        let (y, exact) = pairwise_graph_task(&spec, &x).unwrap();
        let pass = forward(&p, &g, &x).unwrap();
        assert!((pass.output()[(0, 0)] - y[0]).abs() < 1e-4 * y[0].abs());
        let raw = model_hessian_raw(&p, &g, &x).unwrap();
        assert!(raw.max_asymmetry() / raw.max_abs() < 1e-4);
        let h = model_hessian_scalar(&p, &g, &x).unwrap();
        let worst = h
            .values()
            .iter()
            .zip(exact.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-4 * exact.max_abs(), "max deviation {worst}");
        let d = spd_all_pairs(&g);
        let r_model = hessian_node_range(&h, &d, true).unwrap().graph_range;
        let r_exact = hessian_node_range(&exact, &d, true).unwrap().graph_range;
        assert!((r_model - r_exact).abs() < 1e-4);
    }

    #[test]
    fn linear_model_hessian_vanishes() {
        let c = ModelConfig {
            depth: 2,
            hidden_dim: 4,
            head: Head::MeanPoolMlp,
            ..ModelConfig::default()
        };
        let p = Parameters::init(&c, 5).unwrap();
        let g = build_line(6).unwrap();
        let x = col(&[0.1, 0.2, -0.3, 0.4, 1.5, -2.0]);
        assert!(model_hessian_scalar(&p, &g, &x).unwrap().max_abs() < 1e-6);
    }

    #[test]
    fn hessian_requires_graph_head() {
        let p = Parameters::init(&cfg(1, 2), 0).unwrap();
        assert!(matches!(
            model_hessian_scalar(&p, &build_line(3).unwrap(), &col(&[0.0; 3])),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn checkpoint_round_trip() {
        let p = Parameters::init(&cfg(2, 3), 17).unwrap();
        let back = Parameters::from_json(&p.to_json()).unwrap();
        assert_eq!(back, p);
        let mut broken = p.clone();
        broken.tensors.pop();
        assert!(Parameters::from_json(&broken.to_json()).is_err());
    }

    #[test]
    fn init_is_seeded() {
        let a = Parameters::init(&cfg(2, 3), 1).unwrap();
        assert_eq!(a, Parameters::init(&cfg(2, 3), 1).unwrap());
        assert_ne!(a, Parameters::init(&cfg(2, 3), 2).unwrap());
        let w = a.get("layer0.weight").unwrap();
        assert!(w.max_abs() <= 1.0 / 3f64.sqrt());
        assert_eq!(a.get("in.bias").unwrap().max_abs(), 0.0);
    }
}
