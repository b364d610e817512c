use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{select_leading, SpectralPair};
use crate::error::{Error, Result};

const START_SEED: u64 = 0x1a2c_2050;
// Steps between Ritz-value convergence checks.
const CHECK_EVERY: usize = 5;

/// Leading-`k` eigenpairs (by `|λ|`) of the symmetric operator `apply`.
///
/// Lanczos with full reorthogonalization. On an invariant-subspace breakdown
/// the iteration continues from a fresh random vector orthogonal to the
/// current basis, so repeated eigenvalues can still be recovered, although a
/// multiplicity that only shows up after a breakdown may be missed if it is
/// not reached within `k + CHECK_EVERY` further steps.
pub fn lanczos_top_k<F>(
    n: usize,
    k: usize,
    apply: F,
    tol: f64,
    max_matvecs: usize,
) -> Result<SpectralPair>
where
    F: Fn(&[f64], &mut [f64]),
{
    if k == 0 || k > n {
        return Err(Error::InvalidK {
            k,
            reason: format!("must lie in 1..={n}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut matvecs = 0;
    let mut scale = 0.0_f64;
    let mut since_restart = 0;

    let mut v = match fresh_vector(n, &basis, &mut rng) {
        Some(v) => v,
        None => unreachable!("empty basis always admits a start vector"),
    };

    loop {
        apply(&v, &mut w);
        matvecs += 1;
        let a = dot(&v, &w);
        axpy(-a, &v, &mut w);
        if let (Some(prev), Some(&b)) = (basis.last(), beta.last()) {
            axpy(-b, prev, &mut w);
        }
        basis.push(v);
        alpha.push(a);
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                axpy(-c, q, &mut w);
            }
        }
        let b = norm(&w);
        scale = scale.max(a.abs()).max(b);
        since_restart += 1;
        let m = basis.len();

        let breakdown = b <= 1e-12 * scale.max(1.0);
        let full = m == n;
        let due = m >= k && since_restart > k && (m.is_multiple_of(CHECK_EVERY) || breakdown);
        if full || (due && !breakdown) {
            let (ritz_values, ritz_vectors) = tridiagonal_eigen(&alpha, &beta);
            let order = super::leading_order(ritz_values.as_slice());
            let thresh = tol * scale.max(1.0);
            let converged = full
                || order[..k]
                    .iter()
                    .all(|&i| (b * ritz_vectors[(m - 1, i)]).abs() <= thresh);
            if converged {
                let mut vectors = DMatrix::zeros(n, m);
                for (j, q) in basis.iter().enumerate() {
                    vectors.set_column(j, &nalgebra::DVector::from_column_slice(q));
                }
                let ritz = vectors * ritz_vectors;
                let mut pair = select_leading(&ritz, ritz_values.as_slice(), k);
                for mut col in pair.vectors.column_iter_mut() {
                    let nrm = col.norm();
                    col /= nrm;
                }
                return Ok(pair);
            }
        }
        if matvecs >= max_matvecs {
            return Err(Error::NotConverged { matvecs });
        }

        if breakdown {
            beta.push(0.0);
            since_restart = 0;
            v = match fresh_vector(n, &basis, &mut rng) {
                Some(v) => v,
                None => {
                    return Err(Error::NotConverged { matvecs });
                }
            };
        } else {
            beta.push(b);
            v = w.iter().map(|x| x / b).collect();
        }
    }
}

fn fresh_vector(n: usize, basis: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
    for _ in 0..8 {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        for _ in 0..2 {
            for q in basis {
                let c = dot(q, &v);
                axpy(-c, q, &mut v);
            }
        }
        let nrm = norm(&v);
        if nrm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= nrm);
            return Some(v);
        }
    }
    None
}

fn tridiagonal_eigen(alpha: &[f64], beta: &[f64]) -> (nalgebra::DVector<f64>, DMatrix<f64>) {
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    (eig.eigenvalues, eig.eigenvectors)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}
