#![allow(dead_code)]

use longrange::graphs::{bfs_distances, build_erdos_renyi, Graph};
use longrange::linalg::Matrix;
use longrange::rng::{seeded, Rng};
use proptest::prelude::*;
use rand::Rng as _;

/// Random graph with 2..=max_n nodes; may be disconnected.
pub fn arb_graph(max_n: usize) -> impl Strategy<Value = Graph> {
    (2..=max_n, 0.05f64..0.9, any::<u64>())
        .prop_map(|(n, p, seed)| build_erdos_renyi(n, p, seed).unwrap())
}

pub fn rng(seed: u64) -> Rng {
    seeded(seed, 99)
}

/// Dense matrix with entries in [-1, 1], each kept with probability `density`.
pub fn random_matrix(rows: usize, cols: usize, density: f64, rng: &mut Rng) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| {
            if rng.random::<f64>() < density {
                rng.random_range(-1.0..1.0)
            } else {
                0.0
            }
        })
        .collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

pub fn random_features(n: usize, d: usize, rng: &mut Rng) -> Matrix {
    let data = (0..n * d).map(|_| rng.random_range(-1.5..1.5)).collect();
    Matrix::from_vec(n, d, data).unwrap()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// Resistance by grounding `v` and solving the reduced Laplacian system
/// with Gaussian elimination.
pub fn resistance_by_solve(g: &Graph, u: usize, v: usize) -> f64 {
    if u == v {
        return 0.0;
    }
    let comp = bfs_distances(g, v);
    let nodes: Vec<usize> = (0..g.node_count())
        .filter(|&w| w != v && comp[w].is_some())
        .collect();
    let idx = |w: usize| nodes.iter().position(|&x| x == w);
    let m = nodes.len();
    let mut a = vec![vec![0.0; m + 1]; m];
    for (i, &w) in nodes.iter().enumerate() {
        a[i][i] = g.degree(w) as f64;
        for &x in g.neighbors(w) {
            if let Some(j) = idx(x) {
                a[i][j] -= 1.0;
            }
        }
    }
    let target = idx(u).expect("u and v are connected");
    a[target][m] = 1.0;
    for col in 0..m {
        let pivot = (col..m)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        for row in 0..m {
            if row != col {
                let f = a[row][col] / a[col][col];
                let pivot_row = a[col].clone();
                for (x, p) in a[row][col..].iter_mut().zip(&pivot_row[col..]) {
                    *x -= f * p;
                }
            }
        }
    }
    a[target][m] / a[target][target]
}
