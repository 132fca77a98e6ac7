//! Matrix powers, eigendecompositions and pseudoinverses.

mod common;

use common::{arb_graph, random_matrix, rng};
use longrange::linalg::{matpow, pseudo_inverse_with_rank, sym_eigen, Matrix, DEFAULT_RANK_TOL};
use proptest::prelude::*;

fn naive_power(m: &Matrix, k: u32) -> Matrix {
    let mut out = Matrix::identity(m.rows());
    for _ in 0..k {
        out = out.matmul(m).unwrap();
    }
    out
}

fn symmetric(n: usize, seed: u64) -> Matrix {
    let a = random_matrix(n, n, 1.0, &mut rng(seed));
    a.add(&a.transpose()).unwrap().scale(0.5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn matpow_matches_repeated_products(n in 1usize..12, k in 0u32..12, seed in any::<u64>()) {
        let m = random_matrix(n, n, 0.7, &mut rng(seed)).scale(0.5);
        let fast = matpow(&m, k).unwrap();
        let slow = naive_power(&m, k);
        prop_assert!(fast.max_abs_diff(&slow) <= 1e-12 * (1.0 + slow.max_abs()));
    }

    #[test]
    fn eigen_reconstructs(n in 1usize..16, seed in any::<u64>()) {
        let m = symmetric(n, seed);
        let eig = sym_eigen(&m, 1e-14).unwrap();
        let v = &eig.eigenvectors;
        let orth = v.transpose().matmul(v).unwrap();
        prop_assert!(orth.max_abs_diff(&Matrix::identity(n)) < 1e-10);
        let back = eig.reconstruct_with(|l| l);
        prop_assert!(back.max_abs_diff(&m) < 1e-10);
    }

    #[test]
    fn laplacian_pseudoinverse_is_moore_penrose(g in arb_graph(18)) {
        let l = g.laplacian();
        let (p, rank) = pseudo_inverse_with_rank(&l, DEFAULT_RANK_TOL).unwrap();
        let components = longrange::graphs::connected_components(&g).members().len();
        prop_assert_eq!(rank, g.node_count() - components);
        let lpl = l.matmul(&p).unwrap().matmul(&l).unwrap();
        let plp = p.matmul(&l).unwrap().matmul(&p).unwrap();
        let lp = l.matmul(&p).unwrap();
        let pl = p.matmul(&l).unwrap();
        let tol = 1e-9 * (1.0 + p.max_abs());
        prop_assert!(lpl.max_abs_diff(&l) < tol);
        prop_assert!(plp.max_abs_diff(&p) < tol);
        prop_assert!(lp.max_asymmetry() < tol);
        prop_assert!(pl.max_asymmetry() < tol);
    }
}

#[test]
fn indefinite_input_is_rejected() {
    let m = Matrix::from_rows(&[[1.0, 0.0], [0.0, -1.0]]).unwrap();
    assert!(matches!(
        pseudo_inverse_with_rank(&m, DEFAULT_RANK_TOL),
        Err(longrange::Error::NotPositiveSemidefinite(_))
    ));
}
