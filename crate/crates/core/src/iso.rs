//! Isolated SBM baseline: spectral clustering of each graph on its own,
//! followed by a re-alignment of community labels across graphs.
//!
//! - `Iso1` ranks each graph's communities by their estimated within-community
//!   probability, highest first.
//! - `Iso2` clusters the pooled per-graph centers into `K` meta-clusters and
//!   moves each node to the meta-cluster nearest its local center.
//! - `Iso3` relabels every graph by the permutation whose centers lie closest
//!   to those of graph 0 (exhaustive, `K ≤ 8`).

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{estimate_theta_single, ThetaEstimate};
use crate::graph::{Adjacency, GraphDataset, Membership};
use crate::kmeans::{kmeans, nearest_center, KMeansOptions};
use crate::perm::{permutations, MAX_EXHAUSTIVE_K};
use crate::seed::derive_seed;
use crate::spectral::{adjacency_top_k, EigenOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Alignment {
    Iso1,
    Iso2,
    Iso3,
}

impl std::str::FromStr for Alignment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iso1" => Ok(Alignment::Iso1),
            "iso2" => Ok(Alignment::Iso2),
            "iso3" => Ok(Alignment::Iso3),
            other => Err(Error::invalid(format!("unknown alignment '{other}'"))),
        }
    }
}

impl std::fmt::Display for Alignment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Alignment::Iso1 => "iso1",
            Alignment::Iso2 => "iso2",
            Alignment::Iso3 => "iso3",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[derive(Default)]
pub struct IsoOptions {
    pub kmeans: KMeansOptions,
    pub eigen: EigenOptions,
}


/// Spectral clustering result for one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleFit {
    pub labels: Vec<usize>,
    /// `K × K` k-means centers in eigenvector space.
    pub centers: DMatrix<f64>,
}

/// k-means on the rows of the leading-`k` eigenvectors of `adj`.
pub fn fit_single(adj: &Adjacency, k: usize, opts: &IsoOptions) -> Result<SingleFit> {
    let pair = adjacency_top_k(adj, k, &opts.eigen)?;
    let km = kmeans(&pair.vectors, k, &opts.kmeans)?;
    Ok(SingleFit {
        labels: km.labels,
        centers: km.centers,
    })
}

#[derive(Debug, Clone)]
pub struct IsoFit {
    pub memberships_raw: Membership,
    pub memberships_aligned: Membership,
    /// Per-graph estimates in the aligned label space.
    pub thetas: Vec<ThetaEstimate>,
    /// Per-graph centers, rows in raw label order.
    pub centers: Vec<DMatrix<f64>>,
    pub alignment: Alignment,
    /// Per-graph relabeling `new = perm[raw]` (Iso1, Iso3 only).
    pub permutations: Option<Vec<Vec<usize>>>,
}

/// Per-graph fits before alignment.
#[derive(Debug, Clone)]
pub struct RawIsoFit {
    pub memberships: Membership,
    pub centers: Vec<DMatrix<f64>>,
    pub thetas: Vec<ThetaEstimate>,
}

/// Fits every graph independently (in parallel). Graph `n`'s k-means seed is
/// derived from `opts.kmeans.seed` and `n`.
pub fn fit_raw(dataset: &GraphDataset, k: usize, opts: &IsoOptions) -> Result<RawIsoFit> {
    if k < 2 {
        return Err(Error::InvalidK {
            k,
            reason: "need at least two communities".into(),
        });
    }
    let min = dataset.min_size();
    if k > min {
        return Err(Error::InvalidK {
            k,
            reason: format!("exceeds the smallest graph ({min} nodes)"),
        });
    }
    let fits: Vec<SingleFit> = dataset
        .graphs()
        .par_iter()
        .enumerate()
        .map(|(n, g)| {
            let mut o = *opts;
            o.kmeans.seed = derive_seed(opts.kmeans.seed, n as u64);
            fit_single(g, k, &o)
        })
        .collect::<Result<_>>()?;
    let mut labels = Vec::with_capacity(fits.len());
    let mut centers = Vec::with_capacity(fits.len());
    for f in fits {
        labels.push(f.labels);
        centers.push(f.centers);
    }
    let memberships = Membership::new(labels, k)?;
    let thetas = thetas_for(dataset, &memberships)?;
    Ok(RawIsoFit {
        memberships,
        centers,
        thetas,
    })
}

fn thetas_for(dataset: &GraphDataset, m: &Membership) -> Result<Vec<ThetaEstimate>> {
    dataset
        .graphs()
        .par_iter()
        .zip(m.per_graph())
        .map(|(g, l)| estimate_theta_single(g, l, m.k()))
        .collect()
}

/// Relabels communities by descending estimated within-community probability;
/// missing diagonal cells go last, ties keep the lower raw label first.
pub fn iso1_permutation(theta: &ThetaEstimate) -> Vec<usize> {
    let k = theta.k();
    let diag: Vec<f64> = (0..k).map(|c| theta.probs[(c, c)]).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| match (diag[a].is_nan(), diag[b].is_nan()) {
        (false, false) => diag[b].total_cmp(&diag[a]).then(a.cmp(&b)),
        (true, false) => std::cmp::Ordering::Greater,
        (false, true) => std::cmp::Ordering::Less,
        (true, true) => a.cmp(&b),
    });
    let mut perm = vec![0; k];
    for (rank, &c) in order.iter().enumerate() {
        perm[c] = rank;
    }
    perm
}

/// Permutation `p` minimizing `Σ_c ‖centers[c] − anchor[p[c]]‖²`; the first
/// minimum in lexicographic order wins.
pub fn iso3_permutation(centers: &DMatrix<f64>, anchor: &DMatrix<f64>) -> Result<Vec<usize>> {
    let k = centers.nrows();
    if k > MAX_EXHAUSTIVE_K {
        return Err(Error::PermutationSearchTooLarge {
            k,
            max: MAX_EXHAUSTIVE_K,
        });
    }
    if anchor.shape() != centers.shape() {
        return Err(Error::LengthMismatch {
            expected: anchor.nrows(),
            actual: k,
        });
    }
    let cost = DMatrix::from_fn(k, k, |c, a| (centers.row(c) - anchor.row(a)).norm_squared());
    let mut best = (f64::INFINITY, Vec::new());
    for p in permutations(k) {
        let s: f64 = p.iter().enumerate().map(|(c, &a)| cost[(c, a)]).sum();
        if s < best.0 {
            best = (s, p);
        }
    }
    Ok(best.1)
}

fn relabel(labels: &[usize], perm: &[usize]) -> Vec<usize> {
    labels.iter().map(|&l| perm[l]).collect()
}

/// Aligns per-graph fits. A single graph is returned unchanged.
pub fn align(
    dataset: &GraphDataset,
    raw: RawIsoFit,
    method: Alignment,
    kmeans_opts: &KMeansOptions,
) -> Result<IsoFit> {
    let k = raw.memberships.k();
    if method == Alignment::Iso3 && k > MAX_EXHAUSTIVE_K {
        return Err(Error::PermutationSearchTooLarge {
            k,
            max: MAX_EXHAUSTIVE_K,
        });
    }
    raw.memberships.check_shape(dataset)?;
    let n_graphs = raw.memberships.n_graphs();
    if n_graphs == 1 {
        return Ok(IsoFit {
            memberships_aligned: raw.memberships.clone(),
            memberships_raw: raw.memberships,
            thetas: raw.thetas,
            centers: raw.centers,
            alignment: method,
            permutations: Some(vec![(0..k).collect()]),
        });
    }
    let (aligned, perms) = match method {
        Alignment::Iso1 => {
            let perms: Vec<Vec<usize>> = raw.thetas.iter().map(iso1_permutation).collect();
            let labels = raw
                .memberships
                .per_graph()
                .iter()
                .zip(&perms)
                .map(|(l, p)| relabel(l, p))
                .collect();
            (labels, Some(perms))
        }
        Alignment::Iso3 => {
            let anchor = &raw.centers[0];
            let perms = raw
                .centers
                .iter()
                .map(|c| iso3_permutation(c, anchor))
                .collect::<Result<Vec<_>>>()?;
            let labels = raw
                .memberships
                .per_graph()
                .iter()
                .zip(&perms)
                .map(|(l, p)| relabel(l, p))
                .collect();
            (labels, Some(perms))
        }
        Alignment::Iso2 => {
            let d = raw.centers[0].ncols();
            let pooled = DMatrix::from_fn(n_graphs * k, d, |r, j| raw.centers[r / k][(r % k, j)]);
            let meta = kmeans(&pooled, k, kmeans_opts)?;
            let labels = raw
                .memberships
                .per_graph()
                .iter()
                .zip(&raw.centers)
                .map(|(l, centers)| {
                    let map: Vec<usize> = (0..k)
                        .map(|c| {
                            let row: Vec<f64> = centers.row(c).iter().copied().collect();
                            nearest_center(&row, &meta.centers)
                        })
                        .collect();
                    relabel(l, &map)
                })
                .collect();
            (labels, None)
        }
    };
    let memberships_aligned = Membership::new(aligned, k)?;
    let thetas = thetas_for(dataset, &memberships_aligned)?;
    Ok(IsoFit {
        memberships_raw: raw.memberships,
        memberships_aligned,
        thetas,
        centers: raw.centers,
        alignment: method,
        permutations: perms,
    })
}

/// Per-graph spectral clustering plus alignment.
pub fn fit_isolated(
    dataset: &GraphDataset,
    k: usize,
    method: Alignment,
    opts: &IsoOptions,
) -> Result<IsoFit> {
    if method == Alignment::Iso3 && k > MAX_EXHAUSTIVE_K {
        return Err(Error::PermutationSearchTooLarge {
            k,
            max: MAX_EXHAUSTIVE_K,
        });
    }
    let raw = fit_raw(dataset, k, opts)?;
    align(dataset, raw, method, &opts.kmeans)
}
