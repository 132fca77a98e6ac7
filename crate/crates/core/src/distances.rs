//! All-pairs graph metrics: shortest-path distance and effective resistance.
//!
//! Pairs in different connected components get distance 0 and are flagged in
//! a cross-component mask, so their influence contributes nothing to a range
//! but can still be audited.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{bfs_distances, connected_components, Graph};
use crate::linalg::{pseudo_inverse_with_rank, Matrix, DEFAULT_RANK_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "SPD")]
    Spd,
    #[serde(rename = "RES")]
    Resistance,
}

impl Metric {
    pub fn tag(self) -> &'static str {
        match self {
            Metric::Spd => "SPD",
            Metric::Resistance => "RES",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "spd" => Ok(Metric::Spd),
            "res" | "resistance" => Ok(Metric::Resistance),
            other => Err(Error::InvalidArgument(format!("unknown metric `{other}`"))),
        }
    }
}

/// Symmetric, zero-diagonal, nonnegative `n × n` distance matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    metric: Metric,
    values: Matrix,
    cross_component: Vec<bool>,
}

impl DistanceMatrix {
    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.values[(u, v)]
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    /// True when `u` and `v` lie in different components.
    #[inline]
    pub fn is_cross_component(&self, u: usize, v: usize) -> bool {
        self.cross_component[u * self.n() + v]
    }

    pub fn cross_component_pairs(&self) -> usize {
        self.cross_component.iter().filter(|&&c| c).count() / 2
    }

    pub fn max_entry(&self) -> f64 {
        self.values.max_abs()
    }

    pub fn row_max(&self, u: usize) -> f64 {
        self.values.row(u).iter().fold(0.0, |m, &x| m.max(x))
    }

    /// Relabels node `i` as `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> DistanceMatrix {
        let n = self.n();
        let mut values = Matrix::zeros(n, n);
        let mut cross = vec![false; n * n];
        for u in 0..n {
            for v in 0..n {
                values[(perm[u], perm[v])] = self.values[(u, v)];
                cross[perm[u] * n + perm[v]] = self.cross_component[u * n + v];
            }
        }
        DistanceMatrix {
            metric: self.metric,
            values,
            cross_component: cross,
        }
    }

    /// CSV dump: header `metric=<SPD|RES> n=<n>`, then one row per node.
    pub fn to_csv(&self) -> String {
        let n = self.n();
        let mut out = format!("metric={} n={}\n", self.metric.tag(), n);
        for u in 0..n {
            let row: Vec<String> = self.values.row(u).iter().map(|x| x.to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Parses [`DistanceMatrix::to_csv`] output. The cross-component mask is
    /// not persisted; pass the graph to recover it, or `None` to leave it clear.
    pub fn from_csv(text: &str, graph: Option<&Graph>) -> Result<DistanceMatrix> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "missing header".into(),
        })?;
        let mut metric = None;
        let mut n = None;
        for field in header.split_whitespace() {
            match field.split_once('=') {
                Some(("metric", m)) => metric = Some(m.parse::<Metric>()?),
                Some(("n", v)) => {
                    n = Some(v.parse::<usize>().map_err(|e| Error::Parse {
                        line: 1,
                        message: e.to_string(),
                    })?)
                }
                _ => {
                    return Err(Error::Parse {
                        line: 1,
                        message: format!("unexpected header field `{field}`"),
                    })
                }
            }
        }
        let (metric, n) = match (metric, n) {
            (Some(m), Some(n)) => (m, n),
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    message: "header needs metric= and n=".into(),
                })
            }
        };
        let mut data = Vec::with_capacity(n * n);
        for (i, line) in lines {
            for field in line.split(',') {
                data.push(field.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })?);
            }
        }
        let values = Matrix::from_vec(n, n, data)?;
        let cross_component = match graph {
            Some(g) => cross_mask(g),
            None => vec![false; n * n],
        };
        Ok(DistanceMatrix {
            metric,
            values,
            cross_component,
        })
    }
}

fn cross_mask(g: &Graph) -> Vec<bool> {
    let labels = connected_components(g).labels;
    let n = g.node_count();
    let mut mask = vec![false; n * n];
    for u in 0..n {
        for v in 0..n {
            mask[u * n + v] = labels[u] != labels[v];
        }
    }
    mask
}

/// Hop distances by one breadth-first search per source.
pub fn spd_all_pairs(g: &Graph) -> DistanceMatrix {
    let n = g.node_count();
    let rows: Vec<Vec<Option<usize>>> = (0..n)
        .into_par_iter()
        .map(|u| bfs_distances(g, u))
        .collect();
    let mut values = Matrix::zeros(n, n);
    let mut cross = vec![false; n * n];
    for (u, row) in rows.into_iter().enumerate() {
        for (v, d) in row.into_iter().enumerate() {
            match d {
                Some(d) => values[(u, v)] = d as f64,
                None => cross[u * n + v] = true,
            }
        }
    }
    DistanceMatrix {
        metric: Metric::Spd,
        values,
        cross_component: cross,
    }
}

/// Effective resistance `L⁺_uu + L⁺_vv − 2 L⁺_uv`, computed on each
/// component's own Laplacian.
pub fn resistance_all_pairs(g: &Graph) -> Result<DistanceMatrix> {
    let n = g.node_count();
    let labeling = connected_components(g);
    let members = labeling.members();

    let blocks: Vec<Result<Matrix>> = members
        .par_iter()
        .map(|nodes| {
            let m = nodes.len();
            let mut local = vec![usize::MAX; n];
            for (i, &u) in nodes.iter().enumerate() {
                local[u] = i;
            }
            let mut lap = Matrix::zeros(m, m);
            for (i, &u) in nodes.iter().enumerate() {
                lap[(i, i)] = g.degree(u) as f64;
                for &v in g.neighbors(u) {
                    lap[(i, local[v])] = -1.0;
                }
            }
            let (pinv, rank) = pseudo_inverse_with_rank(&lap, DEFAULT_RANK_TOL)?;
            // A connected component has a one-dimensional Laplacian kernel.
            if m - rank != 1 {
                return Err(Error::RankMismatch {
                    expected: 1,
                    found: m - rank,
                });
            }
            Ok(pinv)
        })
        .collect();

    let mut values = Matrix::zeros(n, n);
    for (nodes, block) in members.iter().zip(blocks) {
        let pinv = block?;
        for (i, &u) in nodes.iter().enumerate() {
            for (j, &v) in nodes.iter().enumerate().skip(i + 1) {
                let r = (pinv[(i, i)] + pinv[(j, j)] - 2.0 * pinv[(i, j)]).max(0.0);
                values[(u, v)] = r;
                values[(v, u)] = r;
            }
        }
    }
    Ok(DistanceMatrix {
        metric: Metric::Resistance,
        values,
        cross_component: cross_mask(g),
    })
}

pub fn all_pairs(g: &Graph, metric: Metric) -> Result<DistanceMatrix> {
    match metric {
        Metric::Spd => Ok(spd_all_pairs(g)),
        Metric::Resistance => resistance_all_pairs(g),
    }
}

impl DistanceMatrix {
    /// Wraps a caller-supplied metric (used for tests and custom metrics).
    pub fn from_values(metric: Metric, values: Matrix) -> Result<DistanceMatrix> {
        if !values.is_square() {
            return Err(Error::DimensionMismatch(
                "distance matrix must be square".into(),
            ));
        }
        let n = values.rows();
        Ok(DistanceMatrix {
            metric,
            values,
            cross_component: vec![false; n * n],
        })
    }
}
