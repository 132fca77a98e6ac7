//! Synthetic tasks with known range.
//!
//! Linear tasks are plain matrices `L` acting as `Y = L X`. Pairwise tasks
//! combine a weight matrix `W` (the inverse "distance" between nodes) with an
//! interaction on feature pairs, aggregate per node, and optionally aggregate
//! once more into a graph-level output. Their first and second derivatives are
//! available in closed form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{khop_neighborhood, khop_shells, sym_norm_adjacency, Graph};
use crate::linalg::{matpow, Matrix};
use crate::range::{HessianTensor, JacobianTensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskFamily {
    KPower,
    KRectangle,
    KDirac,
    Custom,
}

impl std::str::FromStr for TaskFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "k_power" | "power" => Ok(TaskFamily::KPower),
            "k_rectangle" | "rectangle" => Ok(TaskFamily::KRectangle),
            "k_dirac" | "dirac" => Ok(TaskFamily::KDirac),
            "custom" => Ok(TaskFamily::Custom),
            other => Err(Error::InvalidArgument(format!(
                "unknown task family `{other}`"
            ))),
        }
    }
}

impl std::fmt::Display for TaskFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TaskFamily::KPower => "k_power",
            TaskFamily::KRectangle => "k_rectangle",
            TaskFamily::KDirac => "k_dirac",
            TaskFamily::Custom => "custom",
        })
    }
}

/// Descriptor written next to task outputs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskDescriptor {
    pub family: TaskFamily,
    pub k: usize,
    pub self_loops: bool,
    pub n: usize,
}

/// `Y = L X`; entry `L[u][v]` is the interaction from `v` into `u`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearTask {
    pub descriptor: TaskDescriptor,
    pub matrix: Matrix,
}

impl LinearTask {
    pub fn custom(matrix: Matrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch(
                "task matrix must be square".into(),
            ));
        }
        if !matrix.is_finite() {
            return Err(Error::InvalidArgument(
                "task matrix has non-finite entries".into(),
            ));
        }
        Ok(LinearTask {
            descriptor: TaskDescriptor {
                family: TaskFamily::Custom,
                k: 0,
                self_loops: false,
                n: matrix.rows(),
            },
            matrix,
        })
    }

    /// Builds a task from its descriptor on `g`.
    pub fn build(g: &Graph, family: TaskFamily, k: usize, self_loops: bool) -> Result<Self> {
        match family {
            TaskFamily::KPower => k_power(g, k, self_loops),
            TaskFamily::KRectangle => k_rectangle(g, k),
            TaskFamily::KDirac => k_dirac(g, k),
            TaskFamily::Custom => Err(Error::InvalidArgument(
                "custom tasks need an explicit matrix".into(),
            )),
        }
    }

    pub fn n(&self) -> usize {
        self.matrix.rows()
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        self.matrix.matmul(x)
    }

    pub fn jacobian(&self) -> JacobianTensor {
        JacobianTensor::from_linear(&self.matrix)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.descriptor).expect("descriptor serializes")
    }
}

/// `Â^k`, with or without self-loops; `k = 0` is the identity.
pub fn k_power(g: &Graph, k: usize, self_loops: bool) -> Result<LinearTask> {
    let a = sym_norm_adjacency(g, self_loops)?;
    let exp = u32::try_from(k).map_err(|_| Error::InvalidArgument(format!("k = {k} too large")))?;
    Ok(LinearTask {
        descriptor: TaskDescriptor {
            family: TaskFamily::KPower,
            k,
            self_loops,
            n: g.node_count(),
        },
        matrix: matpow(&a, exp)?,
    })
}

fn uniform_rows(
    g: &Graph,
    k: usize,
    family: TaskFamily,
    support: impl Fn(usize) -> Result<Vec<usize>>,
) -> Result<LinearTask> {
    if k == 0 {
        return Err(Error::InvalidArgument(format!("{family} needs k ≥ 1")));
    }
    let n = g.node_count();
    let mut m = Matrix::zeros(n, n);
    for u in 0..n {
        let nodes = support(u)?;
        if nodes.is_empty() {
            continue;
        }
        let w = 1.0 / nodes.len() as f64;
        for v in nodes {
            m[(u, v)] = w;
        }
    }
    Ok(LinearTask {
        descriptor: TaskDescriptor {
            family,
            k,
            self_loops: false,
            n,
        },
        matrix: m,
    })
}

/// Uniform average over `N̄_k(u)`, the nodes within `k` hops excluding `u`.
pub fn k_rectangle(g: &Graph, k: usize) -> Result<LinearTask> {
    uniform_rows(g, k, TaskFamily::KRectangle, |u| khop_neighborhood(g, u, k))
}

/// Uniform average over the shell at exactly `k` hops.
pub fn k_dirac(g: &Graph, k: usize) -> Result<LinearTask> {
    uniform_rows(g, k, TaskFamily::KDirac, |u| {
        Ok(khop_shells(g, u, k)?.pop().unwrap_or_default())
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Interaction {
    /// `(x_u − x_v)²`, one feature channel.
    SquaredDifference,
    /// `x_u ⊙ x_v`, channel-wise.
    Product,
    /// `x_v`.
    CopySource,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Aggregation {
    Sum,
    /// Divides by the number of nonzero weights in the row (node level) or
    /// by the node count (graph level).
    Mean,
}

/// `F(X)_u = ⊕_v W[u][v] · I(x_u, x_v)`, optionally pooled into `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairwiseTaskSpec {
    pub weights: Matrix,
    pub interaction: Interaction,
    pub node_aggregation: Aggregation,
    pub graph_aggregation: Option<Aggregation>,
}

impl PairwiseTaskSpec {
    pub fn new(
        weights: Matrix,
        interaction: Interaction,
        node_aggregation: Aggregation,
        graph_aggregation: Option<Aggregation>,
    ) -> Result<Self> {
        if !weights.is_square() {
            return Err(Error::DimensionMismatch(
                "weight matrix must be square".into(),
            ));
        }
        if !weights.is_finite() {
            return Err(Error::InvalidArgument(
                "weight matrix has non-finite entries".into(),
            ));
        }
        Ok(PairwiseTaskSpec {
            weights,
            interaction,
            node_aggregation,
            graph_aggregation,
        })
    }

    /// Indicator weights on `N̄_k(u)`.
    pub fn neighborhood(
        g: &Graph,
        k: usize,
        interaction: Interaction,
        node_aggregation: Aggregation,
        graph_aggregation: Option<Aggregation>,
    ) -> Result<Self> {
        let n = g.node_count();
        let mut w = Matrix::zeros(n, n);
        for u in 0..n {
            for v in khop_neighborhood(g, u, k)? {
                w[(u, v)] = 1.0;
            }
        }
        PairwiseTaskSpec::new(w, interaction, node_aggregation, graph_aggregation)
    }

    /// Squared difference averaged over `N̄_k(u)` at every node.
    pub fn squared_difference_node(g: &Graph, k: usize) -> Result<Self> {
        PairwiseTaskSpec::neighborhood(
            g,
            k,
            Interaction::SquaredDifference,
            Aggregation::Mean,
            None,
        )
    }

    /// `y = (1/|V|) Σ_u Σ_{v ∈ N̄_k(u)} (x_u − x_v)²`.
    pub fn squared_difference_graph(g: &Graph, k: usize) -> Result<Self> {
        PairwiseTaskSpec::neighborhood(
            g,
            k,
            Interaction::SquaredDifference,
            Aggregation::Sum,
            Some(Aggregation::Mean),
        )
    }

    /// Squared difference weighted by `(Â^k)[u][v]`, averaged over the graph.
    pub fn power_weighted_graph(g: &Graph, k: usize, self_loops: bool) -> Result<Self> {
        let w = k_power(g, k, self_loops)?.matrix;
        PairwiseTaskSpec::new(
            w,
            Interaction::SquaredDifference,
            Aggregation::Sum,
            Some(Aggregation::Mean),
        )
    }

    pub fn n(&self) -> usize {
        self.weights.rows()
    }

    /// Per-node scale `s_u` from the node aggregation.
    fn node_scales(&self) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|u| match self.node_aggregation {
                Aggregation::Sum => 1.0,
                Aggregation::Mean => {
                    let count = self.weights.row(u).iter().filter(|&&w| w != 0.0).count();
                    if count == 0 {
                        0.0
                    } else {
                        1.0 / count as f64
                    }
                }
            })
            .collect()
    }

    fn graph_scale(&self) -> Result<f64> {
        match self.graph_aggregation {
            Some(Aggregation::Sum) => Ok(1.0),
            Some(Aggregation::Mean) => Ok(1.0 / self.n() as f64),
            None => Err(Error::Unsupported("task has no graph aggregation".into())),
        }
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.rows() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "features have {} rows, task has {} nodes",
                x.rows(),
                self.n()
            )));
        }
        if self.interaction == Interaction::SquaredDifference && x.cols() != 1 {
            return Err(Error::Unsupported(format!(
                "squared difference needs one feature channel, got {}",
                x.cols()
            )));
        }
        Ok(())
    }

    /// Node outputs only.
    pub fn evaluate_nodes(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let (n, d) = (self.n(), x.cols());
        let s = self.node_scales();
        let mut y = Matrix::zeros(n, d);
        for u in 0..n {
            for v in 0..n {
                let w = self.weights[(u, v)];
                if w == 0.0 {
                    continue;
                }
                for a in 0..d {
                    let (xu, xv) = (x[(u, a)], x[(v, a)]);
                    let term = match self.interaction {
                        Interaction::SquaredDifference => (xu - xv) * (xu - xv),
                        Interaction::Product => xu * xv,
                        Interaction::CopySource => xv,
                    };
                    y[(u, a)] += s[u] * w * term;
                }
            }
        }
        Ok(y)
    }

    /// Graph output, one value per channel.
    pub fn evaluate_graph(&self, x: &Matrix) -> Result<Vec<f64>> {
        let g = self.graph_scale()?;
        let y = self.evaluate_nodes(x)?;
        Ok((0..y.cols())
            .map(|a| g * (0..y.rows()).map(|u| y[(u, a)]).sum::<f64>())
            .collect())
    }
}

/// Node outputs and their exact Jacobian.
pub fn pairwise_node_task(spec: &PairwiseTaskSpec, x: &Matrix) -> Result<(Matrix, JacobianTensor)> {
    let y = spec.evaluate_nodes(x)?;
    let (n, d) = (spec.n(), x.cols());
    let s = spec.node_scales();
    let mut j = JacobianTensor::zeros(n, d, n, d);
    for u in 0..n {
        for a in 0..d {
            let mut diag = 0.0;
            for v in 0..n {
                let c = s[u] * spec.weights[(u, v)];
                if c == 0.0 {
                    continue;
                }
                let (xu, xv) = (x[(u, a)], x[(v, a)]);
                match spec.interaction {
                    Interaction::SquaredDifference => {
                        if v != u {
                            j.set(u, a, v, a, j.get(u, a, v, a) + 2.0 * c * (xv - xu));
                            diag += 2.0 * c * (xu - xv);
                        }
                    }
                    Interaction::Product => {
                        if v == u {
                            diag += 2.0 * c * xu;
                        } else {
                            j.set(u, a, v, a, j.get(u, a, v, a) + c * xu);
                            diag += c * xv;
                        }
                    }
                    Interaction::CopySource => {
                        if v == u {
                            diag += c;
                        } else {
                            j.set(u, a, v, a, j.get(u, a, v, a) + c);
                        }
                    }
                }
            }
            j.set(u, a, u, a, j.get(u, a, u, a) + diag);
        }
    }
    Ok((y, j))
}

/// Graph output and its exact Hessian (constant in `X` for every supported
/// interaction).
pub fn pairwise_graph_task(
    spec: &PairwiseTaskSpec,
    x: &Matrix,
) -> Result<(Vec<f64>, HessianTensor)> {
    let y = spec.evaluate_graph(x)?;
    let (n, d) = (spec.n(), x.cols());
    let g = spec.graph_scale()?;
    let s = spec.node_scales();
    let mut h = HessianTensor::zeros(n, d, d);
    let mut bump = |u: usize, v: usize, a: usize, delta: f64| {
        let cur = h.get(u, a, v, a, a);
        h.set(u, a, v, a, a, cur + delta);
    };
    for (u, &su) in s.iter().enumerate() {
        for v in 0..n {
            let c = g * su * spec.weights[(u, v)];
            if c == 0.0 {
                continue;
            }
            for a in 0..d {
                match spec.interaction {
                    Interaction::SquaredDifference => {
                        if u != v {
                            bump(u, u, a, 2.0 * c);
                            bump(v, v, a, 2.0 * c);
                            bump(u, v, a, -2.0 * c);
                            bump(v, u, a, -2.0 * c);
                        }
                    }
                    Interaction::Product => {
                        if u == v {
                            bump(u, u, a, 2.0 * c);
                        } else {
                            bump(u, v, a, c);
                            bump(v, u, a, c);
                        }
                    }
                    Interaction::CopySource => {}
                }
            }
        }
    }
    Ok((y, h))
}

/// `(1/|N̄_k(u)|) Σ_{r=1}^{k} |N_r(u)| · r`.
pub fn analytic_node_range(g: &Graph, u: usize, k: usize) -> Result<f64> {
    let shells = khop_shells(g, u, k)?;
    let size: usize = shells.iter().map(Vec::len).sum();
    if size == 0 {
        return Err(Error::Degenerate(format!(
            "node {u} has no neighbors within {k} hops"
        )));
    }
    let weighted: usize = shells
        .iter()
        .enumerate()
        .map(|(i, s)| (i + 1) * s.len())
        .sum();
    Ok(weighted as f64 / size as f64)
}

/// Half of [`analytic_node_range`]: the diagonal of the pooled
/// squared-difference Hessian carries as much mass as the off-diagonal.
pub fn analytic_graph_range(g: &Graph, u: usize, k: usize) -> Result<f64> {
    Ok(0.5 * analytic_node_range(g, u, k)?)
}

/// Zeroes the `v = u` entries: the influence of a node on itself.
pub fn without_self_influence(j: &JacobianTensor) -> JacobianTensor {
    let mut out = j.clone();
    let (n_out, c, n_in, d) = j.shape();
    for u in 0..n_out.min(n_in) {
        for a in 0..c {
            for b in 0..d {
                out.set(u, a, u, b, 0.0);
            }
        }
    }
    out
}
