//! Connectivity estimation from a graph and its (estimated) memberships.
//!
//! The single-graph estimator is `Θ̂ = S + Δ⁻²(I − Δ⁻²)⁻¹ diag(S)` with
//! `S = Δ⁻² Xᵀ A X Δ⁻²`. Off the diagonal this is the edge count between two
//! communities over `g_k g_l`; on the diagonal the correction turns the
//! double-counted, self-loop-including ratio into edges over `C(g_k, 2)`.
//!
//! Cells that cannot be estimated are `NaN`: every cell touching an empty
//! community, and the diagonal cell of a singleton community.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{tally, Adjacency, GraphDataset, Membership};

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaEstimate {
    /// Unclamped estimates; `NaN` marks a missing cell.
    pub probs: DMatrix<f64>,
    /// `probs` clamped to `[0, 1]`, missing cells kept as `NaN`.
    pub clamped: DMatrix<f64>,
    /// Plug-in variance `θ̂(1 − θ̂) / pairs` per cell (single-graph estimates),
    /// or the mean of contributing per-graph variances over their count
    /// squared (pooled estimates).
    pub variance: DMatrix<f64>,
}

impl ThetaEstimate {
    fn from_probs(probs: DMatrix<f64>, variance: DMatrix<f64>) -> Self {
        let clamped = probs.map(|p| if p.is_nan() { p } else { p.clamp(0.0, 1.0) });
        ThetaEstimate {
            probs,
            clamped,
            variance,
        }
    }

    pub fn k(&self) -> usize {
        self.probs.nrows()
    }

    /// `(k, l)` cells with `k ≤ l` that could not be estimated.
    pub fn missing(&self) -> Vec<(usize, usize)> {
        let k = self.k();
        (0..k)
            .flat_map(|a| (a..k).map(move |b| (a, b)))
            .filter(|&(a, b)| self.probs[(a, b)].is_nan())
            .collect()
    }

    pub fn is_complete(&self) -> bool {
        self.probs.iter().all(|p| !p.is_nan())
    }

    /// Applies a relabeling: new label `perm[old]`.
    pub fn permuted(&self, perm: &[usize]) -> ThetaEstimate {
        let k = self.k();
        let mut inv = vec![0; k];
        for (old, &new) in perm.iter().enumerate() {
            inv[new] = old;
        }
        let re = |m: &DMatrix<f64>| DMatrix::from_fn(k, k, |i, j| m[(inv[i], inv[j])]);
        ThetaEstimate {
            probs: re(&self.probs),
            clamped: re(&self.clamped),
            variance: re(&self.variance),
        }
    }
}

/// Number of possible edges per cell: `g_k g_l` off the diagonal, `C(g_k, 2)` on it.
pub fn possible_pairs(counts: &[usize]) -> DMatrix<f64> {
    let k = counts.len();
    DMatrix::from_fn(k, k, |a, b| {
        let (ga, gb) = (counts[a] as f64, counts[b] as f64);
        if a == b {
            ga * (ga - 1.0) / 2.0
        } else {
            ga * gb
        }
    })
}

/// Sampling variance of the single-graph estimator under the true `θ`.
pub fn theta_variance(theta: &DMatrix<f64>, counts: &[usize]) -> Result<DMatrix<f64>> {
    if theta.nrows() != counts.len() || theta.ncols() != counts.len() {
        return Err(Error::LengthMismatch {
            expected: counts.len(),
            actual: theta.nrows(),
        });
    }
    let pairs = possible_pairs(counts);
    Ok(DMatrix::from_fn(theta.nrows(), theta.ncols(), |a, b| {
        let t = theta[(a, b)];
        if pairs[(a, b)] > 0.0 {
            t * (1.0 - t) / pairs[(a, b)]
        } else {
            f64::NAN
        }
    }))
}

/// `Xᵀ A X` for one graph, accumulated over its edge list.
fn block_edge_matrix(adj: &Adjacency, labels: &[usize], k: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(k, k);
    for &(u, v) in adj.edges() {
        let (a, b) = (labels[u], labels[v]);
        m[(a, b)] += 1.0;
        m[(b, a)] += 1.0;
    }
    m
}

pub fn estimate_theta_single(adj: &Adjacency, labels: &[usize], k: usize) -> Result<ThetaEstimate> {
    if labels.len() != adj.n_nodes() {
        return Err(Error::LengthMismatch {
            expected: adj.n_nodes(),
            actual: labels.len(),
        });
    }
    if k == 0 {
        return Err(Error::InvalidK {
            k,
            reason: "must be positive".into(),
        });
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::LabelOutOfRange { label, k });
    }
    let counts = tally(labels, k);
    let g: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let xax = block_edge_matrix(adj, labels, k);

    // S = Δ⁻² XᵀAX Δ⁻², then add Δ⁻²(I − Δ⁻²)⁻¹ diag(S) on the diagonal.
    let mut probs = DMatrix::from_fn(k, k, |a, b| {
        if g[a] > 0.0 && g[b] > 0.0 {
            xax[(a, b)] / (g[a] * g[b])
        } else {
            f64::NAN
        }
    });
    for a in 0..k {
        probs[(a, a)] = if g[a] >= 2.0 {
            let s = probs[(a, a)];
            let inv = 1.0 / g[a];
            s + inv / (1.0 - inv) * s
        } else {
            f64::NAN
        };
    }
    let pairs = possible_pairs(&counts);
    let variance = DMatrix::from_fn(k, k, |a, b| {
        let p = probs[(a, b)];
        if p.is_nan() {
            f64::NAN
        } else {
            let c = p.clamp(0.0, 1.0);
            c * (1.0 - c) / pairs[(a, b)]
        }
    });
    Ok(ThetaEstimate::from_probs(probs, variance))
}

/// Per-graph estimates, computed in parallel.
pub fn estimate_theta_per_graph(
    dataset: &GraphDataset,
    membership: &Membership,
) -> Result<Vec<ThetaEstimate>> {
    membership.check_shape(dataset)?;
    dataset
        .graphs()
        .par_iter()
        .zip(membership.per_graph())
        .map(|(g, l)| estimate_theta_single(g, l, membership.k()))
        .collect()
}

/// Cell-wise mean of per-graph estimates over the graphs where the cell is defined.
pub fn pool_estimates(estimates: &[ThetaEstimate]) -> Result<ThetaEstimate> {
    let first = estimates.first().ok_or(Error::EmptyDataset)?;
    let k = first.k();
    if let Some(e) = estimates.iter().find(|e| e.k() != k) {
        return Err(Error::LengthMismatch {
            expected: k,
            actual: e.k(),
        });
    }
    let mut sum = DMatrix::<f64>::zeros(k, k);
    let mut var = DMatrix::<f64>::zeros(k, k);
    let mut n = DMatrix::<f64>::zeros(k, k);
    for e in estimates {
        for a in 0..k {
            for b in 0..k {
                let p = e.probs[(a, b)];
                if !p.is_nan() {
                    sum[(a, b)] += p;
                    var[(a, b)] += e.variance[(a, b)];
                    n[(a, b)] += 1.0;
                }
            }
        }
    }
    let probs = DMatrix::from_fn(k, k, |a, b| {
        if n[(a, b)] > 0.0 {
            sum[(a, b)] / n[(a, b)]
        } else {
            f64::NAN
        }
    });
    let variance = DMatrix::from_fn(k, k, |a, b| {
        if n[(a, b)] > 0.0 {
            var[(a, b)] / (n[(a, b)] * n[(a, b)])
        } else {
            f64::NAN
        }
    });
    Ok(ThetaEstimate::from_probs(probs, variance))
}

/// Unweighted mean of the per-graph estimates.
pub fn estimate_theta_pooled(dataset: &GraphDataset, membership: &Membership) -> Result<ThetaEstimate> {
    pool_estimates(&estimate_theta_per_graph(dataset, membership)?)
}
