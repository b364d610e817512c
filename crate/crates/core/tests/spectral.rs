mod common;

use common::*;
use jointsbm::spectral::{
    adjacency_top_k, lanczos_top_k, population_quantities, q_star, top_k_eigen,
};
use jointsbm::{Adjacency, DuplicatePolicy, EigenOptions};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn top_k_matches_jacobi(seed in any::<u64>(), n in 1usize..40, k_frac in 0.0f64..1.0) {
        let k = 1 + ((n - 1) as f64 * k_frac) as usize;
        let m = random_symmetric(n, &mut rng(seed));
        let want = sorted(top_k_by_magnitude(jacobi_eigenvalues(&m), k));
        let got = sorted(top_k_eigen(&m, k).unwrap().values.iter().copied().collect());
        for (a, b) in want.iter().zip(&got) {
            prop_assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn lanczos_matches_dense(seed in any::<u64>(), n in 2usize..120, k in 1usize..6) {
        let k = k.min(n);
        let m = random_symmetric(n, &mut rng(seed));
        let dense = sorted(top_k_eigen(&m, k).unwrap().values.iter().copied().collect());
        let apply = |x: &[f64], y: &mut [f64]| {
            y.copy_from_slice((&m * DVector::from_column_slice(x)).as_slice());
        };
        let lz = lanczos_top_k(n, k, apply, 1e-12, 50 * n).unwrap();
        let got = sorted(lz.values.iter().copied().collect());
        for (a, b) in dense.iter().zip(&got) {
            prop_assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
        // Eigenvector residuals.
        for c in 0..k {
            let v = lz.vectors.column(c);
            let r = &m * v - v * lz.values[c];
            prop_assert!(r.norm() < 1e-6);
        }
    }

    #[test]
    fn population_identities(seed in any::<u64>()) {
        let mut r = rng(seed);
        let k = 2 + (seed % 3) as usize;
        let m = random_full_membership(1 + (seed % 4) as usize, k, 30, &mut r);
        let theta = random_theta(k, &mut r);
        let pd = population_quantities(&m, &theta).unwrap();
        prop_assert!((&pd.d - &pd.d_tilde).norm() < 1e-8);
        for n in 0..pd.n_graphs() {
            prop_assert!(pd.block_residual(n).unwrap() < 1e-8);
            prop_assert!(pd.stacked_rows_residual(n).unwrap() < 1e-8);
            prop_assert!(pd.center_identity_residual(n).unwrap() < 1e-8);
        }
    }
}

fn block_diagonal_cliques(sizes: &[usize]) -> Adjacency {
    let mut edges = Vec::new();
    let mut off = 0;
    for &s in sizes {
        for i in 0..s {
            for j in (i + 1)..s {
                edges.push((off + i, off + j));
            }
        }
        off += s;
    }
    Adjacency::new(off, edges, DuplicatePolicy::Error).unwrap()
}

#[test]
fn clique_spectrum() {
    // A clique on s nodes has leading eigenvalue s - 1 with a constant eigenvector.
    let g = block_diagonal_cliques(&[6, 4]);
    let pair = adjacency_top_k(&g, 2, &EigenOptions::default()).unwrap();
    assert!((pair.values[0] - 5.0).abs() < 1e-10);
    assert!((pair.values[1] - 3.0).abs() < 1e-10);
    let v0 = pair.vectors.column(0);
    assert!(v0.rows(0, 6).iter().all(|x| (x.abs() - 1.0 / 6f64.sqrt()).abs() < 1e-10));
    assert!(v0.rows(6, 4).iter().all(|x| x.abs() < 1e-10));
}

#[test]
fn sparse_and_dense_paths_agree() {
    let g = block_diagonal_cliques(&[7, 5, 9]);
    let dense = adjacency_top_k(&g, 3, &EigenOptions::default()).unwrap();
    let opts = EigenOptions {
        dense_threshold: 0,
        ..EigenOptions::default()
    };
    let sparse = adjacency_top_k(&g, 3, &opts).unwrap();
    assert!((&dense.values - &sparse.values).norm() < 1e-8);
    assert!((dense.reconstruct() - sparse.reconstruct()).norm() < 1e-8);
}

#[test]
fn q_star_scaling() {
    let g = block_diagonal_cliques(&[3, 3]);
    let pair = adjacency_top_k(&g, 2, &EigenOptions::default()).unwrap();
    let q = q_star(&pair, 6, 24).unwrap();
    assert!((q.scale - 2.0).abs() < 1e-15);
    assert!(q.rows.iter().all(|&x| x >= 0.0));
    let expected = DMatrix::from_fn(6, 2, |i, j| (pair.vectors[(i, j)] * pair.values[j]).abs() * 2.0);
    assert!((q.rows - expected).norm() < 1e-12);
}
