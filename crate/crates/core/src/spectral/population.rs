//! Exact population-level spectral quantities of a joint SBM.
//!
//! Given memberships and a connectivity matrix, the probability matrix of the
//! stacked dataset is `P = X Θ Xᵀ` and its leading eigenpairs are tied to the
//! eigendecomposition `Z D̃ Zᵀ` of `Δ Θ Δ` (with `Δ² = XᵀX`) by `D = D̃`,
//! `U = X Δ⁻¹ Z`. The same holds per graph with `Δ_n`, `Z_n`, `D_n`. These
//! identities are what the joint objective is derived from; this type makes
//! them checkable numerically.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{select_leading, top_k_eigen, SpectralPair};
use crate::error::{Error, Result};
use crate::graph::{ClusterCounts, Membership};
use crate::synth::Connectivity;

#[derive(Debug, Clone)]
pub struct PopulationDecomposition {
    labels: Vec<Vec<usize>>,
    k: usize,
    /// `P_n = X_n Θ X_nᵀ` per graph.
    pub p_blocks: Vec<DMatrix<f64>>,
    /// Leading-K eigenvectors of the stacked `P`.
    pub u: DMatrix<f64>,
    pub d: DVector<f64>,
    /// Eigenvectors and eigenvalues of `Δ Θ Δ`.
    pub z: DMatrix<f64>,
    pub d_tilde: DVector<f64>,
    /// Eigenvectors and eigenvalues of `Δ_n Θ Δ_n` per graph.
    pub z_n: Vec<DMatrix<f64>>,
    pub d_n: Vec<DVector<f64>>,
    /// Diagonals of `Δ` and `Δ_n` (square roots of community sizes).
    pub delta: DVector<f64>,
    pub delta_n: Vec<DVector<f64>>,
    pub counts: ClusterCounts,
    theta: DMatrix<f64>,
}

/// Minimum `|eigenvalue|` of `Δ Θ Δ` accepted as full rank.
pub const RANK_TOL: f64 = 1e-10;

pub fn population_quantities(
    membership: &Membership,
    theta: &Connectivity,
) -> Result<PopulationDecomposition> {
    let k = membership.k();
    let theta = theta.probs();
    if theta.nrows() != k {
        return Err(Error::LengthMismatch {
            expected: k,
            actual: theta.nrows(),
        });
    }
    let counts = membership.counts();
    if let Some(&empty) = counts.empty_clusters().first() {
        return Err(Error::EmptyCluster(empty));
    }
    let delta = sqrt_counts(&counts.global);
    let (z, d_tilde) = full_eigen(&scale_both(theta, &delta));
    let min_abs = d_tilde.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    if min_abs <= RANK_TOL {
        return Err(Error::RankDeficient(min_abs));
    }

    let labels = membership.per_graph().to_vec();
    let x = indicator(&membership.stacked(), k);
    let p = &x * theta * x.transpose();
    let SpectralPair { vectors: u, values: d } = top_k_eigen(&p, k)?;

    let mut p_blocks = Vec::with_capacity(labels.len());
    let mut z_n = Vec::with_capacity(labels.len());
    let mut d_n = Vec::with_capacity(labels.len());
    let mut delta_n = Vec::with_capacity(labels.len());
    for (l, c) in labels.iter().zip(&counts.per_graph) {
        let xn = indicator(l, k);
        p_blocks.push(&xn * theta * xn.transpose());
        let dn = sqrt_counts(c);
        let (zn, evals) = full_eigen(&scale_both(theta, &dn));
        z_n.push(zn);
        d_n.push(evals);
        delta_n.push(dn);
    }

    Ok(PopulationDecomposition {
        labels,
        k,
        p_blocks,
        u,
        d,
        z,
        d_tilde,
        z_n,
        d_n,
        delta,
        delta_n,
        counts,
        theta: theta.clone(),
    })
}

impl PopulationDecomposition {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_graphs(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self, n: usize) -> &[usize] {
        &self.labels[n]
    }

    pub fn theta(&self) -> &DMatrix<f64> {
        &self.theta
    }

    pub fn total_nodes(&self) -> usize {
        self.labels.iter().map(Vec::len).sum()
    }

    /// One-hot membership matrix `X_n`.
    pub fn membership_matrix(&self, n: usize) -> DMatrix<f64> {
        indicator(&self.labels[n], self.k)
    }

    /// Stacked `X`.
    pub fn stacked_membership_matrix(&self) -> DMatrix<f64> {
        let all: Vec<usize> = self.labels.iter().flatten().copied().collect();
        indicator(&all, self.k)
    }

    /// `X Δ⁻¹ Z`, the closed form of the stacked eigenvectors.
    pub fn u_closed_form(&self) -> DMatrix<f64> {
        self.stacked_membership_matrix() * inv_diag(&self.delta) * &self.z
    }

    /// Rows of the stacked eigenvectors belonging to graph `n` (`U_{n*}`).
    pub fn u_rows(&self, n: usize) -> DMatrix<f64> {
        let start: usize = self.labels[..n].iter().map(Vec::len).sum();
        self.u.rows(start, self.labels[n].len()).into_owned()
    }

    /// `W = Δ⁻¹ Z D`.
    pub fn global_centers(&self) -> DMatrix<f64> {
        inv_diag(&self.delta) * &self.z * DMatrix::from_diagonal(&self.d_tilde)
    }

    fn require_all_present(&self, n: usize) -> Result<()> {
        match self.counts.per_graph[n].iter().position(|&c| c == 0) {
            Some(k) => Err(Error::EmptyCluster(k)),
            None => Ok(()),
        }
    }

    /// `U_n = X_n Δ_n⁻¹ Z_n`; requires every community to be present in graph `n`.
    pub fn local_vectors(&self, n: usize) -> Result<DMatrix<f64>> {
        self.require_all_present(n)?;
        Ok(self.membership_matrix(n) * inv_diag(&self.delta_n[n]) * &self.z_n[n])
    }

    /// Signed `Q_n = U_n D_n`.
    pub fn local_q(&self, n: usize) -> Result<DMatrix<f64>> {
        Ok(self.local_vectors(n)? * DMatrix::from_diagonal(&self.d_n[n]))
    }

    /// `Z_nᵀ Δ_n⁻¹ Δ Z`, the per-graph mixing matrix.
    pub fn mixing(&self, n: usize) -> Result<DMatrix<f64>> {
        self.require_all_present(n)?;
        let ratio = DVector::from_fn(self.k, |m, _| self.delta[m] / self.delta_n[n][m]);
        Ok(self.z_n[n].transpose() * DMatrix::from_diagonal(&ratio) * &self.z)
    }

    /// `‖X_n W − Q_n Z_nᵀ Δ_n⁻¹ Δ Z‖_F`, zero on exact population quantities.
    pub fn center_identity_residual(&self, n: usize) -> Result<f64> {
        let lhs = self.membership_matrix(n) * self.global_centers();
        let rhs = self.local_q(n)? * self.mixing(n)?;
        Ok((lhs - rhs).norm())
    }

    /// `‖U_{n*} D − Q_n Z_nᵀ Δ_n⁻¹ Δ Z‖_F` using the numerically computed
    /// stacked eigenvectors; signs follow the canonical convention so `Z` is
    /// aligned to `U` first.
    pub fn stacked_rows_residual(&self, n: usize) -> Result<f64> {
        let aligned_z = self.z_aligned_to_u();
        let ratio = DVector::from_fn(self.k, |m, _| self.delta[m] / self.delta_n[n][m]);
        self.require_all_present(n)?;
        let rhs = self.local_q(n)? * self.z_n[n].transpose() * DMatrix::from_diagonal(&ratio) * aligned_z;
        let lhs = self.u_rows(n) * DMatrix::from_diagonal(&self.d);
        Ok((lhs - rhs).norm())
    }

    /// `‖(U D Uᵀ)_{n,n} − U_n D_n U_nᵀ‖_F` with `U_n` from `P_n` directly.
    pub fn block_residual(&self, n: usize) -> Result<f64> {
        let un = self.u_rows(n);
        let block = &un * DMatrix::from_diagonal(&self.d) * un.transpose();
        let local = top_k_eigen(&self.p_blocks[n], self.k)?;
        Ok((block - local.reconstruct()).norm())
    }

    // Z with column signs chosen so that X Δ⁻¹ Z matches the computed U.
    fn z_aligned_to_u(&self) -> DMatrix<f64> {
        let closed = self.u_closed_form();
        let mut z = self.z.clone();
        for c in 0..self.k {
            if closed.column(c).dot(&self.u.column(c)) < 0.0 {
                z.column_mut(c).neg_mut();
            }
        }
        z
    }
}

/// `Z_nᵀ Δ_n⁻¹ Δ Z` from community counts alone, without forming `P`.
pub fn mixing_from_counts(
    theta: &DMatrix<f64>,
    counts_n: &[usize],
    counts: &[usize],
) -> Result<DMatrix<f64>> {
    let k = theta.nrows();
    for len in [theta.ncols(), counts_n.len(), counts.len()] {
        if len != k {
            return Err(Error::LengthMismatch { expected: k, actual: len });
        }
    }
    if let Some(m) = (0..k).find(|&m| counts_n[m] == 0 || counts[m] == 0) {
        return Err(Error::EmptyCluster(m));
    }
    let delta = sqrt_counts(counts);
    let delta_n = sqrt_counts(counts_n);
    let (z, _) = full_eigen(&scale_both(theta, &delta));
    let (z_n, _) = full_eigen(&scale_both(theta, &delta_n));
    let ratio = DVector::from_fn(k, |m, _| delta[m] / delta_n[m]);
    Ok(z_n.transpose() * DMatrix::from_diagonal(&ratio) * z)
}

fn sqrt_counts(c: &[usize]) -> DVector<f64> {
    DVector::from_iterator(c.len(), c.iter().map(|&v| (v as f64).sqrt()))
}

fn scale_both(theta: &DMatrix<f64>, s: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(theta.nrows(), theta.ncols(), |i, j| s[i] * theta[(i, j)] * s[j])
}

fn inv_diag(s: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_diagonal(&s.map(|v| 1.0 / v))
}

/// Full K×K eigendecomposition in leading order with canonical signs.
fn full_eigen(m: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let k = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let pair = select_leading(&eig.eigenvectors, eig.eigenvalues.as_slice(), k);
    (pair.vectors, pair.values)
}

pub(crate) fn indicator(labels: &[usize], k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(labels.len(), k, |i, j| if labels[i] == j { 1.0 } else { 0.0 })
}
