//! Defining properties of the range measures on random linear maps.

mod common;

use common::{arb_graph, close, random_matrix, rng};
use longrange::distances::{all_pairs, DistanceMatrix, Metric};
use longrange::graphs::Graph;
use longrange::linalg::Matrix;
use longrange::range::{node_range, JacobianTensor};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng as _;

fn rho(l: &Matrix, d: &DistanceMatrix, normalized: bool) -> Vec<f64> {
    node_range(&JacobianTensor::from_linear(l), d, normalized)
        .unwrap()
        .node_ranges
}

fn unit(n: usize, w: usize, v: usize) -> Matrix {
    let mut m = Matrix::zeros(n, n);
    m[(w, v)] = 1.0;
    m
}

/// Splits a random matrix into two parts with disjoint supports.
fn split(l: &Matrix, seed: u64) -> (Matrix, Matrix) {
    let mut r = rng(seed);
    let mut a = Matrix::zeros(l.rows(), l.cols());
    let mut b = Matrix::zeros(l.rows(), l.cols());
    for i in 0..l.rows() {
        for j in 0..l.cols() {
            if r.random::<bool>() {
                a[(i, j)] = l[(i, j)];
            } else {
                b[(i, j)] = l[(i, j)];
            }
        }
    }
    (a, b)
}

fn row_mass(l: &Matrix, u: usize) -> f64 {
    l.row(u).iter().map(|x| x.abs()).sum()
}

fn metrics(g: &Graph) -> Vec<DistanceMatrix> {
    [Metric::Spd, Metric::Resistance]
        .iter()
        .map(|&m| all_pairs(g, m).unwrap())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn locality_and_unit_interactions(g in arb_graph(20), picks in any::<(u64, u64, u64)>()) {
        let n = g.node_count();
        let (u, w, v) = ((picks.0 as usize) % n, (picks.1 as usize) % n, (picks.2 as usize) % n);
        for d in metrics(&g) {
            let r = rho(&unit(n, u, v), &d, false);
            prop_assert_eq!(r[u], d.get(u, v));
            prop_assert_eq!(rho(&unit(n, u, v), &d, true)[u], d.get(u, v));
            if w != u {
                prop_assert_eq!(rho(&unit(n, w, v), &d, false)[u], 0.0);
            }
        }
    }

    #[test]
    fn additivity_and_homogeneity(g in arb_graph(20), seed in any::<u64>(), alpha in -5.0f64..5.0) {
        let n = g.node_count();
        let l = random_matrix(n, n, 0.6, &mut rng(seed));
        let (a, b) = split(&l, seed ^ 0x5eed);
        for d in metrics(&g) {
            let (ra, rb, rl) = (rho(&a, &d, false), rho(&b, &d, false), rho(&l, &d, false));
            let rs = rho(&l.scale(alpha), &d, false);
            for u in 0..n {
                prop_assert!((rl[u] - ra[u] - rb[u]).abs() <= 1e-10);
                prop_assert!((rs[u] - alpha.abs() * rl[u]).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn normalized_mass_weighted_mixture(
        g in arb_graph(20),
        seed in any::<u64>(),
        alpha in prop_oneof![-3.0f64..-0.1, 0.1f64..3.0],
        beta in prop_oneof![-3.0f64..-0.1, 0.1f64..3.0],
    ) {
        let n = g.node_count();
        let l = random_matrix(n, n, 0.7, &mut rng(seed));
        let (a, b) = split(&l, seed.wrapping_add(1));
        let mix = a.scale(alpha).add(&b.scale(beta)).unwrap();
        for d in metrics(&g) {
            let (ra, rb, rm) = (rho(&a, &d, true), rho(&b, &d, true), rho(&mix, &d, true));
            for u in 0..n {
                let (m1, m2) = (row_mass(&a, u), row_mass(&b, u));
                if m1 < 1e-9 || m2 < 1e-9 {
                    continue;
                }
                let expected = (alpha.abs() * m1 * ra[u] + beta.abs() * m2 * rb[u]) / (alpha.abs() * m1 + beta.abs() * m2);
                prop_assert!((rm[u] - expected).abs() <= 1e-10, "{} vs {}", rm[u], expected);
            }
        }
    }

    #[test]
    fn equal_mass_components_average(g in arb_graph(12), seed in any::<u64>(), t in 0.0f64..1.0) {
        // With unit row masses the mixture is the plain convex combination.
        let n = g.node_count();
        let mut r = rng(seed);
        let u = r.random_range(0..n);
        let mut a = Matrix::zeros(n, n);
        let mut b = Matrix::zeros(n, n);
        let mut cols: Vec<usize> = (0..n).collect();
        cols.shuffle(&mut r);
        let half = n / 2;
        for &v in &cols[..half.max(1)] {
            a[(u, v)] = 1.0 / half.max(1) as f64;
        }
        for &v in &cols[half.max(1)..] {
            b[(u, v)] = 1.0 / (n - half.max(1)) as f64;
        }
        if n - half.max(1) == 0 {
            return Ok(());
        }
        let mix = a.scale(t).add(&b.scale(1.0 - t)).unwrap();
        for d in metrics(&g) {
            let expected = t * rho(&a, &d, true)[u] + (1.0 - t) * rho(&b, &d, true)[u];
            prop_assert!((rho(&mix, &d, true)[u] - expected).abs() <= 1e-10);
        }
    }

    #[test]
    fn normalization_invariance_and_bounds(g in arb_graph(20), seed in any::<u64>(), alpha in prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3]) {
        let n = g.node_count();
        let l = random_matrix(n, n, 0.5, &mut rng(seed));
        for d in metrics(&g) {
            let base = rho(&l, &d, true);
            let scaled = rho(&l.scale(alpha), &d, true);
            for u in 0..n {
                prop_assert!(close(base[u], scaled[u], 1e-12));
                prop_assert!(base[u] >= 0.0 && base[u] <= d.row_max(u) + 1e-12);
            }
        }
    }

    #[test]
    fn permutation_equivariance(g in arb_graph(16), seed in any::<u64>()) {
        let n = g.node_count();
        let mut r = rng(seed);
        let l = random_matrix(n, n, 0.5, &mut r);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut r);
        let mut lp = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                lp[(perm[i], perm[j])] = l[(i, j)];
            }
        }
        let gp = g.permute(&perm).unwrap();
        for metric in [Metric::Spd, Metric::Resistance] {
            let d = all_pairs(&g, metric).unwrap();
            let dp = all_pairs(&gp, metric).unwrap();
            let (a, b) = (rho(&l, &d, true), rho(&lp, &dp, true));
            for i in 0..n {
                prop_assert!(close(a[i], b[perm[i]], 1e-9));
            }
            // Relabeling the distance matrix directly gives the same answer.
            let c = rho(&lp, &d.permute(&perm), true);
            for i in 0..n {
                prop_assert!(close(a[i], c[perm[i]], 1e-12));
            }
        }
    }
}

#[test]
fn graph_range_is_mean_with_degenerate_zeros() {
    let g = longrange::graphs::build_line(5).unwrap();
    let d = all_pairs(&g, Metric::Spd).unwrap();
    let mut l = Matrix::zeros(5, 5);
    l[(0, 4)] = 2.0;
    l[(1, 2)] = -1.0;
    let report = node_range(&JacobianTensor::from_linear(&l), &d, true).unwrap();
    assert_eq!(report.node_ranges, vec![4.0, 1.0, 0.0, 0.0, 0.0]);
    assert_eq!(report.degenerate_count, 3);
    assert_eq!(report.graph_range, 1.0);
}
