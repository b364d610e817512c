//! Leading-K eigendecompositions and the spectral embeddings built from them.
//!
//! Eigenpairs are ranked by absolute eigenvalue (descending), ties broken by
//! signed value (descending) and then by original column index. Each returned
//! eigenvector is sign-normalized so that its largest-magnitude entry is
//! positive (first such entry on ties).

mod lanczos;
mod population;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Adjacency;

pub use lanczos::lanczos_top_k;
pub use population::{mixing_from_counts, population_quantities, PopulationDecomposition};

/// Absolute tolerance used to accept a matrix as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Leading eigenvectors (columns) and their eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralPair {
    pub vectors: DMatrix<f64>,
    pub values: DVector<f64>,
}

impl SpectralPair {
    pub fn n_rows(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn k(&self) -> usize {
        self.values.len()
    }

    /// `U diag(values) Uᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let scaled = scale_columns(&self.vectors, self.values.as_slice());
        scaled * self.vectors.transpose()
    }
}

/// How eigenpairs of a graph's adjacency matrix are computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenOptions {
    /// Graphs with at most this many nodes are decomposed densely.
    pub dense_threshold: usize,
    /// Residual tolerance of the iterative solver, relative to the spectral radius.
    pub tol: f64,
    /// Matrix-vector product budget of the iterative solver, as a multiple of `n`.
    pub matvec_factor: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            dense_threshold: 2048,
            tol: 1e-8,
            matvec_factor: 10,
        }
    }
}

/// The `k` eigenpairs of a symmetric matrix with largest `|eigenvalue|`.
pub fn top_k_eigen(matrix: &DMatrix<f64>, k: usize) -> Result<SpectralPair> {
    let (rows, cols) = matrix.shape();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    check_k(k, rows)?;
    let asym = max_asymmetry(matrix);
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    let eig = SymmetricEigen::new(matrix.clone());
    Ok(select_leading(&eig.eigenvectors, eig.eigenvalues.as_slice(), k))
}

/// Leading eigenpairs of a graph's adjacency matrix, densely for small graphs
/// and with Lanczos iteration above `opts.dense_threshold`.
pub fn adjacency_top_k(adj: &Adjacency, k: usize, opts: &EigenOptions) -> Result<SpectralPair> {
    let n = adj.n_nodes();
    check_k(k, n)?;
    if n <= opts.dense_threshold {
        let eig = SymmetricEigen::new(adj.to_dense());
        return Ok(select_leading(&eig.eigenvectors, eig.eigenvalues.as_slice(), k));
    }
    lanczos_top_k(
        n,
        k,
        |x, y| adj.matvec(x, y),
        opts.tol,
        opts.matvec_factor.saturating_mul(n),
    )
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::InvalidK {
            k,
            reason: format!("must lie in 1..={n}"),
        });
    }
    Ok(())
}

pub(crate) fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Order of eigen-indices by `|λ|` desc, then `λ` desc, then index.
pub(crate) fn leading_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        values[b]
            .abs()
            .total_cmp(&values[a].abs())
            .then(values[b].total_cmp(&values[a]))
            .then(a.cmp(&b))
    });
    idx
}

pub(crate) fn select_leading(vectors: &DMatrix<f64>, values: &[f64], k: usize) -> SpectralPair {
    let order = leading_order(values);
    let chosen = &order[..k];
    let mut out = DMatrix::zeros(vectors.nrows(), k);
    for (c, &src) in chosen.iter().enumerate() {
        out.set_column(c, &vectors.column(src));
    }
    canonicalize_signs(&mut out);
    SpectralPair {
        vectors: out,
        values: DVector::from_iterator(k, chosen.iter().map(|&i| values[i])),
    }
}

/// Flips each column so that its largest-magnitude entry is positive.
pub fn canonicalize_signs(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let mut best = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

pub(crate) fn scale_columns(m: &DMatrix<f64>, s: &[f64]) -> DMatrix<f64> {
    let mut out = m.clone();
    for (mut col, &f) in out.column_iter_mut().zip(s) {
        col *= f;
    }
    out
}

/// The node embedding `|U D| * sqrt(|V| / |V_n|)` clustered by the joint model.
#[derive(Debug, Clone, PartialEq)]
pub struct QStar {
    pub rows: DMatrix<f64>,
    pub scale: f64,
}

pub fn q_star(pair: &SpectralPair, n_local: usize, n_total: usize) -> Result<QStar> {
    if n_local == 0 {
        return Err(Error::invalid("q_star needs at least one node"));
    }
    if n_local != pair.n_rows() {
        return Err(Error::LengthMismatch {
            expected: pair.n_rows(),
            actual: n_local,
        });
    }
    if n_total < n_local {
        return Err(Error::invalid(format!(
            "total node count {n_total} is below the graph's {n_local}"
        )));
    }
    let scale = (n_total as f64 / n_local as f64).sqrt();
    let mut rows = scale_columns(&pair.vectors, pair.values.as_slice());
    rows.apply(|x| *x = x.abs() * scale);
    Ok(QStar { rows, scale })
}
