//! Range measures.
//!
//! The node-level range of an operator `F` at node `u` is read off its
//! Jacobian: every input node `v` is weighted by the summed absolute
//! sensitivity `Σ_{α,β} |∂F_u^α / ∂x_v^β|` and multiplied by the graph
//! distance `d(u, v)`. The unnormalized range sums these products; the
//! normalized range divides by the total weight, which makes it the expected
//! distance under the *influence distribution* `I_u`.
//!
//! Graph-level operators produce no pairwise first-order terms, so their range
//! uses second derivatives instead: the mixing weight between `u` and `v` is
//! `Σ_{α,β,γ} |∂²y^γ / ∂x_u^α ∂x_v^β|`. The diagonal term `v = u` adds to the
//! normalizer but, at distance zero, not to the numerator.
//!
//! Node ranges aggregate to graph ranges (plain mean over nodes) and graph
//! ranges to dataset ranges (plain mean over graphs).

use serde::{Deserialize, Serialize};

use crate::distances::{DistanceMatrix, Metric};
use crate::error::{Error, Result};
use crate::estimator::SamplingSummary;
use crate::linalg::Matrix;

/// Below this total influence a node is treated as receiving none.
pub const DEGENERATE_THRESHOLD: f64 = 1e-12;

/// Dense `∂F(X)_u^α / ∂x_v^β`, indexed `(u, α, v, β)`, with validity masks.
#[derive(Clone, Debug, PartialEq)]
pub struct JacobianTensor {
    out_nodes: usize,
    out_channels: usize,
    in_nodes: usize,
    in_channels: usize,
    values: Vec<f64>,
    pub out_node_mask: Vec<bool>,
    pub in_node_mask: Vec<bool>,
    pub out_channel_mask: Vec<bool>,
    pub in_channel_mask: Vec<bool>,
}

impl JacobianTensor {
    pub fn zeros(
        out_nodes: usize,
        out_channels: usize,
        in_nodes: usize,
        in_channels: usize,
    ) -> Self {
        JacobianTensor {
            out_nodes,
            out_channels,
            in_nodes,
            in_channels,
            values: vec![0.0; out_nodes * out_channels * in_nodes * in_channels],
            out_node_mask: vec![true; out_nodes],
            in_node_mask: vec![true; in_nodes],
            out_channel_mask: vec![true; out_channels],
            in_channel_mask: vec![true; in_channels],
        }
    }

    /// Single-channel Jacobian of the linear map `Y = L X`.
    pub fn from_linear(l: &Matrix) -> Self {
        let mut j = JacobianTensor::zeros(l.rows(), 1, l.cols(), 1);
        j.values.copy_from_slice(l.as_slice());
        j
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (
            self.out_nodes,
            self.out_channels,
            self.in_nodes,
            self.in_channels,
        )
    }

    #[inline]
    fn offset(&self, u: usize, a: usize, v: usize, b: usize) -> usize {
        ((u * self.out_channels + a) * self.in_nodes + v) * self.in_channels + b
    }

    #[inline]
    pub fn get(&self, u: usize, a: usize, v: usize, b: usize) -> f64 {
        self.values[self.offset(u, a, v, b)]
    }

    #[inline]
    pub fn set(&mut self, u: usize, a: usize, v: usize, b: usize, x: f64) {
        let o = self.offset(u, a, v, b);
        self.values[o] = x;
    }

    /// The `(in_nodes × in_channels)` slice for one output entry.
    pub fn output_slice_mut(&mut self, u: usize, a: usize) -> &mut [f64] {
        let start = self.offset(u, a, 0, 0);
        &mut self.values[start..start + self.in_nodes * self.in_channels]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scale(&self, alpha: f64) -> JacobianTensor {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|x| *x *= alpha);
        out
    }

    pub fn is_exact(&self) -> bool {
        [
            &self.out_node_mask,
            &self.in_node_mask,
            &self.out_channel_mask,
            &self.in_channel_mask,
        ]
        .iter()
        .all(|m| m.iter().all(|&b| b))
    }

    /// Summed absolute sensitivity of output node `u` to each input node,
    /// over unmasked channels and input nodes.
    pub fn interaction_row(&self, u: usize) -> Vec<f64> {
        let mut row = vec![0.0; self.in_nodes];
        for a in (0..self.out_channels).filter(|&a| self.out_channel_mask[a]) {
            for (v, r) in row.iter_mut().enumerate() {
                if !self.in_node_mask[v] {
                    continue;
                }
                let base = self.offset(u, a, v, 0);
                for b in 0..self.in_channels {
                    if self.in_channel_mask[b] {
                        *r += self.values[base + b].abs();
                    }
                }
            }
        }
        row
    }

    fn check_finite(&self) -> Result<()> {
        if self.values.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(
                "jacobian has non-finite entries".into(),
            ))
        }
    }
}

/// Dense `∂²y^γ / ∂x_u^α ∂x_v^β`, indexed `(u, α, v, β, γ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HessianTensor {
    nodes: usize,
    in_channels: usize,
    out_channels: usize,
    values: Vec<f64>,
}

impl HessianTensor {
    pub fn zeros(nodes: usize, in_channels: usize, out_channels: usize) -> Self {
        HessianTensor {
            nodes,
            in_channels,
            out_channels,
            values: vec![0.0; nodes * nodes * in_channels * in_channels * out_channels],
        }
    }

    /// Single-channel Hessian from an `n × n` matrix.
    pub fn from_matrix(h: &Matrix) -> Self {
        let mut t = HessianTensor::zeros(h.rows(), 1, 1);
        t.values.copy_from_slice(h.as_slice());
        t
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.nodes, self.in_channels, self.out_channels)
    }

    #[inline]
    fn offset(&self, u: usize, a: usize, v: usize, b: usize, g: usize) -> usize {
        (((u * self.in_channels + a) * self.nodes + v) * self.in_channels + b) * self.out_channels
            + g
    }

    #[inline]
    pub fn get(&self, u: usize, a: usize, v: usize, b: usize, g: usize) -> f64 {
        self.values[self.offset(u, a, v, b, g)]
    }

    #[inline]
    pub fn set(&mut self, u: usize, a: usize, v: usize, b: usize, g: usize, x: f64) {
        let o = self.offset(u, a, v, b, g);
        self.values[o] = x;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Largest `|H[(u,α),(v,β)] − H[(v,β),(u,α)]|` over all entries.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for u in 0..self.nodes {
            for a in 0..self.in_channels {
                for v in 0..self.nodes {
                    for b in 0..self.in_channels {
                        for g in 0..self.out_channels {
                            worst = worst
                                .max((self.get(u, a, v, b, g) - self.get(v, b, u, a, g)).abs());
                        }
                    }
                }
            }
        }
        worst
    }

    /// `(H + Hᵀ) / 2` over the `(node, channel)` pair indices.
    pub fn symmetrize(&mut self) {
        for u in 0..self.nodes {
            for a in 0..self.in_channels {
                for v in u..self.nodes {
                    for b in 0..self.in_channels {
                        if v == u && b < a {
                            continue;
                        }
                        for g in 0..self.out_channels {
                            let avg = 0.5 * (self.get(u, a, v, b, g) + self.get(v, b, u, a, g));
                            self.set(u, a, v, b, g, avg);
                            self.set(v, b, u, a, g, avg);
                        }
                    }
                }
            }
        }
    }

    /// Summed absolute mixing between `u` and each `v`.
    pub fn mixing_row(&self, u: usize) -> Vec<f64> {
        let mut row = vec![0.0; self.nodes];
        for a in 0..self.in_channels {
            for (v, r) in row.iter_mut().enumerate() {
                for b in 0..self.in_channels {
                    let base = self.offset(u, a, v, b, 0);
                    *r += self.values[base..base + self.out_channels]
                        .iter()
                        .map(|x| x.abs())
                        .sum::<f64>();
                }
            }
        }
        row
    }
}

/// Probability over input nodes: `I_u(v)` (Jacobian) or `J_u(v)` (Hessian).
#[derive(Clone, Debug, PartialEq)]
pub struct InfluenceDistribution {
    pub source: usize,
    pub weights: Vec<f64>,
    /// The normalizer before division.
    pub total: f64,
    /// Set when the normalizer vanished; weights are then all zero.
    pub degenerate: bool,
}

impl InfluenceDistribution {
    fn from_row(source: usize, row: Vec<f64>) -> Self {
        let total: f64 = row.iter().sum();
        if total < DEGENERATE_THRESHOLD {
            InfluenceDistribution {
                source,
                weights: vec![0.0; row.len()],
                total,
                degenerate: true,
            }
        } else {
            InfluenceDistribution {
                source,
                weights: row.into_iter().map(|w| w / total).collect(),
                total,
                degenerate: false,
            }
        }
    }

    /// `E_{v∼I_u}[d(u, v)]`; zero when degenerate.
    pub fn expected_distance(&self, d: &DistanceMatrix) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(v, w)| w * d.get(self.source, v))
            .sum()
    }
}

pub fn influence_from_jacobian(j: &JacobianTensor, u: usize) -> Result<InfluenceDistribution> {
    if u >= j.out_nodes {
        return Err(Error::InvalidNode {
            node: u,
            n: j.out_nodes,
        });
    }
    if !j.out_node_mask[u] {
        return Err(Error::MaskedNode(u));
    }
    Ok(InfluenceDistribution::from_row(u, j.interaction_row(u)))
}

pub fn influence_from_hessian(h: &HessianTensor, u: usize) -> Result<InfluenceDistribution> {
    if u >= h.nodes {
        return Err(Error::InvalidNode {
            node: u,
            n: h.nodes,
        });
    }
    Ok(InfluenceDistribution::from_row(u, h.mixing_row(u)))
}

/// Node ranges for one operator plus their graph-level mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeReport {
    pub metric: Metric,
    pub normalized: bool,
    pub node_ranges: Vec<f64>,
    pub graph_range: f64,
    pub degenerate_count: usize,
    /// Node ids of `node_ranges` when only a subset was evaluated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_ids: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingSummary>,
}

impl RangeReport {
    fn from_nodes(
        metric: Metric,
        normalized: bool,
        ids: Vec<usize>,
        ranges: Vec<f64>,
        degenerate: usize,
        all: usize,
    ) -> Self {
        let graph_range = mean(&ranges);
        let node_ids = if ids.len() == all { None } else { Some(ids) };
        RangeReport {
            metric,
            normalized,
            node_ranges: ranges,
            graph_range,
            degenerate_count: degenerate,
            node_ids,
            sampling: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn range_from_row(row: &[f64], u: usize, d: &DistanceMatrix, normalized: bool) -> (f64, bool) {
    let total: f64 = row.iter().sum();
    if total < DEGENERATE_THRESHOLD {
        return (0.0, true);
    }
    let weighted: f64 = row.iter().enumerate().map(|(v, w)| w * d.get(u, v)).sum();
    if normalized {
        (weighted / total, false)
    } else {
        (weighted, false)
    }
}

/// Jacobian-based node ranges. Degenerate nodes get range 0 and are counted;
/// masked output nodes are skipped and the report lists the evaluated ids.
pub fn node_range(j: &JacobianTensor, d: &DistanceMatrix, normalized: bool) -> Result<RangeReport> {
    if j.out_nodes != d.n() || j.in_nodes != d.n() {
        return Err(Error::DimensionMismatch(format!(
            "jacobian over {}→{} nodes, distances over {}",
            j.in_nodes,
            j.out_nodes,
            d.n()
        )));
    }
    j.check_finite()?;
    let mut ids = Vec::new();
    let mut ranges = Vec::new();
    let mut degenerate = 0;
    for u in (0..j.out_nodes).filter(|&u| j.out_node_mask[u]) {
        let (r, deg) = range_from_row(&j.interaction_row(u), u, d, normalized);
        degenerate += usize::from(deg);
        ids.push(u);
        ranges.push(r);
    }
    if ids.is_empty() {
        return Err(Error::Degenerate("every output node is masked".into()));
    }
    Ok(RangeReport::from_nodes(
        d.metric(),
        normalized,
        ids,
        ranges,
        degenerate,
        j.out_nodes,
    ))
}

/// Hessian-based node ranges.
pub fn hessian_node_range(
    h: &HessianTensor,
    d: &DistanceMatrix,
    normalized: bool,
) -> Result<RangeReport> {
    if h.nodes != d.n() {
        return Err(Error::DimensionMismatch(format!(
            "hessian over {} nodes, distances over {}",
            h.nodes,
            d.n()
        )));
    }
    if !h.values.iter().all(|x| x.is_finite()) {
        return Err(Error::InvalidArgument(
            "hessian has non-finite entries".into(),
        ));
    }
    let mut ranges = Vec::with_capacity(h.nodes);
    let mut degenerate = 0;
    for u in 0..h.nodes {
        let (r, deg) = range_from_row(&h.mixing_row(u), u, d, normalized);
        degenerate += usize::from(deg);
        ranges.push(r);
    }
    Ok(RangeReport::from_nodes(
        d.metric(),
        normalized,
        (0..h.nodes).collect(),
        ranges,
        degenerate,
        h.nodes,
    ))
}

/// Unweighted mean of graph ranges across a dataset.
pub fn dataset_range(reports: &[RangeReport]) -> Result<f64> {
    let first = reports
        .first()
        .ok_or_else(|| Error::Empty("no reports".into()))?;
    for r in reports {
        if r.metric != first.metric || r.normalized != first.normalized {
            return Err(Error::TagMismatch(format!(
                "{}/{} vs {}/{}",
                first.metric, first.normalized, r.metric, r.normalized
            )));
        }
    }
    Ok(reports.iter().map(|r| r.graph_range).sum::<f64>() / reports.len() as f64)
}

/// Fraction of each node's influence that falls on other components (and is
/// therefore counted at distance 0).
pub fn cross_component_fraction(j: &JacobianTensor, d: &DistanceMatrix) -> Vec<f64> {
    (0..j.out_nodes)
        .map(|u| {
            let row = j.interaction_row(u);
            let total: f64 = row.iter().sum();
            if total < DEGENERATE_THRESHOLD {
                return 0.0;
            }
            let cross: f64 = row
                .iter()
                .enumerate()
                .filter(|(v, _)| d.is_cross_component(u, *v))
                .map(|(_, w)| w)
                .sum();
            cross / total
        })
        .collect()
}
