//! Stochastic range estimates from sparsified Jacobians.
//!
//! Output nodes, input nodes and both channel sets are subsampled with
//! independent Bernoulli masks. The model runs on inputs whose unselected
//! nodes and channels are zeroed, and only the selected Jacobian entries are
//! computed. Because the selected output set is exchangeable, the mean over
//! selected node ranges is an unbiased estimate of the graph range whenever
//! the channel masks are full.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::distances::DistanceMatrix;
use crate::error::{Error, Result};
use crate::graphs::Graph;
use crate::linalg::Matrix;
use crate::models::gcn::{forward, jacobian_from_pass, Head, Parameters};
use crate::range::{node_range, RangeReport};
use crate::rng::{seeded, stream, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub p_node_in: f64,
    pub p_node_out: f64,
    pub p_chan_in: f64,
    pub p_chan_out: f64,
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            p_node_in: 1.0,
            p_node_out: 0.5,
            p_chan_in: 0.5,
            p_chan_out: 0.5,
            min_nodes: 16,
            max_nodes: 256,
            seed: 0,
        }
    }
}

impl SamplingConfig {
    /// Keeps everything: the estimate equals the exact range.
    pub fn exact() -> Self {
        SamplingConfig {
            p_node_in: 1.0,
            p_node_out: 1.0,
            p_chan_in: 1.0,
            p_chan_out: 1.0,
            min_nodes: 0,
            max_nodes: usize::MAX,
            seed: 0,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        SamplingConfig {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("p_node_in", self.p_node_in),
            ("p_node_out", self.p_node_out),
            ("p_chan_in", self.p_chan_in),
            ("p_chan_out", self.p_chan_out),
        ] {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::Config(format!("{name} = {p} is outside (0, 1]")));
            }
        }
        if self.min_nodes > self.max_nodes {
            return Err(Error::Config(format!(
                "min_nodes {} exceeds max_nodes {}",
                self.min_nodes, self.max_nodes
            )));
        }
        Ok(())
    }
}

/// Selection masks over the four Jacobian axes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskSet {
    pub out_nodes: Vec<bool>,
    pub in_nodes: Vec<bool>,
    pub in_channels: Vec<bool>,
    pub out_channels: Vec<bool>,
}

fn count(mask: &[bool]) -> usize {
    mask.iter().filter(|&&b| b).count()
}

impl MaskSet {
    pub fn full(n_out: usize, n_in: usize, d_in: usize, c_out: usize) -> Self {
        MaskSet {
            out_nodes: vec![true; n_out],
            in_nodes: vec![true; n_in],
            in_channels: vec![true; d_in],
            out_channels: vec![true; c_out],
        }
    }

    pub fn is_full(&self) -> bool {
        [
            &self.out_nodes,
            &self.in_nodes,
            &self.in_channels,
            &self.out_channels,
        ]
        .iter()
        .all(|m| m.iter().all(|&b| b))
    }

    pub fn check(&self, n_out: usize, n_in: usize, d_in: usize, c_out: usize) -> Result<()> {
        let dims = [
            (self.out_nodes.len(), n_out, "output node"),
            (self.in_nodes.len(), n_in, "input node"),
            (self.in_channels.len(), d_in, "input channel"),
            (self.out_channels.len(), c_out, "output channel"),
        ];
        for (got, want, what) in dims {
            if got != want {
                return Err(Error::DimensionMismatch(format!(
                    "{what} mask has {got} entries, expected {want}"
                )));
            }
        }
        for (mask, what) in [
            (&self.out_nodes, "output node"),
            (&self.in_nodes, "input node"),
            (&self.in_channels, "input channel"),
            (&self.out_channels, "output channel"),
        ] {
            if count(mask) == 0 {
                return Err(Error::Degenerate(format!("every {what} is masked")));
            }
        }
        Ok(())
    }

    /// Zeroes unselected input nodes and channels.
    pub fn apply_to_input(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for v in 0..out.rows() {
            for b in 0..out.cols() {
                if !self.in_nodes[v] || !self.in_channels[b] {
                    out[(v, b)] = 0.0;
                }
            }
        }
        out
    }
}

const MAX_REROLLS: usize = 10_000;

fn bernoulli_mask(len: usize, p: f64, rng: &mut Rng) -> Vec<bool> {
    if p >= 1.0 {
        return vec![true; len];
    }
    for _ in 0..MAX_REROLLS {
        let mask: Vec<bool> = (0..len).map(|_| rng.random::<f64>() < p).collect();
        if mask.iter().any(|&b| b) {
            return mask;
        }
    }
    // Practically unreachable for p > 0; fall back to one uniform pick.
    let mut mask = vec![false; len];
    mask[rng.random_range(0..len)] = true;
    mask
}

/// Moves a uniformly chosen surplus or deficit so the selected count lands in
/// `[lo, hi]`. Which nodes move is exchangeable, so inclusion stays uniform.
fn clamp_selection(mask: &mut [bool], lo: usize, hi: usize, rng: &mut Rng) {
    let selected = count(mask);
    if selected > hi {
        let mut chosen: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
        chosen.shuffle(rng);
        for &i in &chosen[..selected - hi] {
            mask[i] = false;
        }
    } else if selected < lo {
        let mut free: Vec<usize> = (0..mask.len()).filter(|&i| !mask[i]).collect();
        free.shuffle(rng);
        for &i in &free[..(lo - selected).min(free.len())] {
            mask[i] = true;
        }
    }
}

/// Draws masks for an `n`-node Jacobian with `d_in` input and `c_out` output
/// channels. The output-node count is clamped into `[min_nodes, max_nodes]`
/// (the lower bound capped at `n`).
pub fn draw_masks(n: usize, d_in: usize, c_out: usize, cfg: &SamplingConfig) -> Result<MaskSet> {
    cfg.validate()?;
    if n == 0 || d_in == 0 || c_out == 0 {
        return Err(Error::InvalidSize(format!(
            "cannot sample masks for n = {n}, d_in = {d_in}, c_out = {c_out}"
        )));
    }
    let mut rng = seeded(cfg.seed, stream::MASKS);
    let mut out_nodes = if cfg.min_nodes == 0 {
        bernoulli_mask(n, cfg.p_node_out, &mut rng)
    } else {
        (0..n)
            .map(|_| cfg.p_node_out >= 1.0 || rng.random::<f64>() < cfg.p_node_out)
            .collect()
    };
    clamp_selection(
        &mut out_nodes,
        cfg.min_nodes.min(n),
        cfg.max_nodes.max(1),
        &mut rng,
    );
    let in_nodes = bernoulli_mask(n, cfg.p_node_in, &mut rng);
    let in_channels = bernoulli_mask(d_in, cfg.p_chan_in, &mut rng);
    let out_channels = bernoulli_mask(c_out, cfg.p_chan_out, &mut rng);
    Ok(MaskSet {
        out_nodes,
        in_nodes,
        in_channels,
        out_channels,
    })
}

/// What a sampled estimate actually looked at.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingSummary {
    pub seed: u64,
    pub selected_out_nodes: usize,
    pub selected_in_nodes: usize,
    pub selected_in_channels: usize,
    pub selected_out_channels: usize,
    pub clamp: String,
    /// Set when input channels were dropped, which biases the estimate.
    pub input_channel_bias: bool,
}

/// Range of a model on one graph from a sparsified Jacobian.
pub fn estimate_range(
    params: &Parameters,
    g: &Graph,
    x: &Matrix,
    d: &DistanceMatrix,
    sampling: &SamplingConfig,
) -> Result<RangeReport> {
    let cfg = &params.config;
    let c_out = match cfg.head {
        Head::NodeRegression => cfg.out_dim,
        Head::MeanPoolMlp => cfg.hidden_dim,
    };
    let n = g.node_count();
    let masks = draw_masks(n, cfg.in_dim, c_out, sampling)?;
    let pass = forward(params, g, &masks.apply_to_input(x))?;
    let (j, _) = jacobian_from_pass(&pass, cfg.head, Some(&masks))?;
    let mut report = node_range(&j, d, true)?;
    report.sampling = Some(SamplingSummary {
        seed: sampling.seed,
        selected_out_nodes: count(&masks.out_nodes),
        selected_in_nodes: count(&masks.in_nodes),
        selected_in_channels: count(&masks.in_channels),
        selected_out_channels: count(&masks.out_channels),
        clamp: "exchangeable_resample".into(),
        input_channel_bias: count(&masks.in_channels) < masks.in_channels.len(),
    });
    Ok(report)
}
