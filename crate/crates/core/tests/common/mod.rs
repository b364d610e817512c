//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use jointsbm::{Connectivity, Membership};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off < 1e-26 * (1.0 + a.norm_squared()) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[(i, i)]).collect()
}

/// The `k` eigenvalues of largest magnitude, in descending magnitude.
pub fn top_k_by_magnitude(mut values: Vec<f64>, k: usize) -> Vec<f64> {
    values.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    values.truncate(k);
    values
}

/// All permutations of `0..k` by Heap's algorithm.
pub fn heap_permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if n <= 1 {
            out.push(a.clone());
            return;
        }
        for i in 0..n - 1 {
            rec(n - 1, a, out);
            if n.is_multiple_of(2) {
                a.swap(i, n - 1);
            } else {
                a.swap(0, n - 1);
            }
        }
        rec(n - 1, a, out);
    }
    let mut a: Vec<usize> = (0..k).collect();
    let mut out = Vec::new();
    rec(k, &mut a, &mut out);
    out
}

/// Misclustering rate by trying every relabeling of `pred`.
pub fn brute_force_mcr(pred: &[usize], truth: &[usize], k: usize) -> f64 {
    let n = pred.len();
    heap_permutations(k)
        .into_iter()
        .map(|p| pred.iter().zip(truth).filter(|(a, b)| p[**a] != **b).count())
        .min()
        .unwrap() as f64
        / n as f64
}

/// Random symmetric matrix with entries in `[-1, 1]`.
pub fn random_symmetric(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = rng.random_range(-1.0..1.0);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Random symmetric `Θ` with entries in `[0.05, 0.95]` and a dominant
/// diagonal, so that `ΔΘΔ` is comfortably full rank.
pub fn random_theta(k: usize, rng: &mut impl Rng) -> Connectivity {
    let mut m = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let v = if i == j {
                rng.random_range(0.5..0.95)
            } else {
                rng.random_range(0.05..0.3)
            };
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Connectivity::new(m).unwrap()
}

/// Random memberships in which every community appears in every graph.
pub fn random_full_membership(
    n_graphs: usize,
    k: usize,
    max_size: usize,
    rng: &mut impl Rng,
) -> Membership {
    let labels = (0..n_graphs)
        .map(|_| {
            let size = rng.random_range(k..=max_size.max(k));
            let mut l: Vec<usize> = (0..size).map(|i| if i < k { i } else { rng.random_range(0..k) }).collect();
            l.shuffle(rng);
            l
        })
        .collect();
    Membership::new(labels, k).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Exact sign test: probability of at least `wins` successes in `n` fair trials.
pub fn sign_test_p(wins: usize, n: usize) -> f64 {
    let total = 2f64.powi(n as i32);
    (wins..=n).map(|w| binomial(n, w)).sum::<f64>() / total
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
