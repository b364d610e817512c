//! Joint SBM: one set of global centers `W` shared by all graphs, fitted by a
//! Lloyd-style alternation on the upper bound `Σ_n η_n`.
//!
//! Each graph is decomposed once; its rows `Q*_n = |U_n D_n| √(|V|/|V_n|)`
//! are then clustered jointly. An outer iteration
//!
//! 1. computes `γ_n = Σ_m |G_nm| / |G_·m|` and the weighted means `W`,
//! 2. sweeps the nodes of each graph in index order, moving each node to the
//!    cluster minimizing `ω`, then refreshes that graph's counts,
//! 3. refreshes the global counts and records the loss.
//!
//! Within a pass the global counts are those of the previous pass, and a
//! graph's own counts are those from before its sweep. Graph sweeps therefore
//! depend only on `W`, the global counts and the graph itself, so the
//! parallel mode gives exactly the sequential result.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{random_membership, tally, ClusterCounts, GraphDataset, Membership};
use crate::seed::derive_seed;
use crate::spectral::{adjacency_top_k, q_star, EigenOptions, PopulationDecomposition};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub k: usize,
    /// Absolute loss-change tolerance.
    pub epsilon: f64,
    pub max_iter: usize,
    pub n_restarts: usize,
    pub seed: u64,
    pub eigen: EigenOptions,
    /// Sweep graphs concurrently within a pass.
    pub parallel: bool,
}

impl FitOptions {
    pub fn new(k: usize) -> Self {
        FitOptions {
            k,
            epsilon: 1e-6,
            max_iter: 100,
            n_restarts: 5,
            seed: 0,
            eigen: EigenOptions::default(),
            parallel: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidK {
                k: self.k,
                reason: "need at least two communities".into(),
            });
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_iter == 0 || self.n_restarts == 0 {
            return Err(Error::invalid("max_iter and n_restarts must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointFit {
    pub membership: Membership,
    /// `K × K` global centers.
    pub w: DMatrix<f64>,
    /// `Σ_n η_n` after each pass.
    pub loss_trace: Vec<f64>,
    pub gammas: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Seed of the returned restart.
    pub seed: u64,
    pub restart_losses: Vec<f64>,
    pub best_restart: usize,
    /// Nodes moved into emptied clusters over the returned run.
    pub reseeds: usize,
}

#[derive(Serialize)]
struct FitJson<'a> {
    k: usize,
    w: Vec<Vec<f64>>,
    loss_trace: &'a [f64],
    converged: bool,
    iterations: usize,
    seed: u64,
    gammas: &'a [f64],
    restart_losses: &'a [f64],
    best_restart: usize,
    reseeds: usize,
}

impl JointFit {
    /// Model summary; memberships are written separately as CSV.
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&FitJson {
            k: self.membership.k(),
            w: crate::io::matrix_rows(&self.w),
            loss_trace: &self.loss_trace,
            converged: self.converged,
            iterations: self.iterations,
            seed: self.seed,
            gammas: &self.gammas,
            restart_losses: &self.restart_losses,
            best_restart: self.best_restart,
            reseeds: self.reseeds,
        })
        .map_err(|e| Error::invalid(e.to_string()))
    }

    pub fn final_loss(&self) -> f64 {
        *self.loss_trace.last().expect("a fit runs at least one pass")
    }
}

/// `γ_n = Σ_m counts_n[m] / counts_global[m]`.
pub fn gamma(counts_n: &[usize], counts_global: &[usize]) -> Result<f64> {
    check_len(counts_global.len(), counts_n.len())?;
    let mut g = 0.0;
    for (m, (&cn, &c)) in counts_n.iter().zip(counts_global).enumerate() {
        if c == 0 {
            return Err(Error::EmptyCluster(m));
        }
        g += cn as f64 / c as f64;
    }
    Ok(g)
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::LengthMismatch { expected, actual });
    }
    Ok(())
}

/// `W = [Σ_n γ_n X_nᵀX_n]⁻¹ Σ_n γ_n X_nᵀQ*_n`: row `k` is the γ-weighted mean
/// of the rows currently assigned to cluster `k`.
pub fn update_w(
    labels: &[Vec<usize>],
    q_stars: &[DMatrix<f64>],
    gammas: &[f64],
    k: usize,
) -> Result<DMatrix<f64>> {
    check_len(labels.len(), q_stars.len())?;
    check_len(labels.len(), gammas.len())?;
    let mut weight = vec![0.0; k];
    let mut sums = DMatrix::<f64>::zeros(k, k);
    for ((l, q), &g) in labels.iter().zip(q_stars).zip(gammas) {
        check_len(q.nrows(), l.len())?;
        check_len(k, q.ncols())?;
        for (i, &c) in l.iter().enumerate() {
            if c >= k {
                return Err(Error::LabelOutOfRange { label: c, k });
            }
            weight[c] += g;
            for j in 0..k {
                sums[(c, j)] += g * q[(i, j)];
            }
        }
    }
    if let Some(empty) = weight.iter().position(|&w| w <= 0.0) {
        return Err(Error::EmptyCluster(empty));
    }
    for c in 0..k {
        for j in 0..k {
            sums[(c, j)] /= weight[c];
        }
    }
    Ok(sums)
}

/// `√(a / b)` with the `0/0` of a sole member leaving its cluster read as 0.
fn ratio_sqrt(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        (a / b).sqrt()
    }
}

/// Diagonal of `Δ⁻¹Δ_n` after moving one node of graph `n` from `from` to `to`.
pub fn delta_tilde(
    counts_global: &[usize],
    counts_n: &[usize],
    from: usize,
    to: usize,
) -> Result<Vec<f64>> {
    check_len(counts_global.len(), counts_n.len())?;
    let k = counts_n.len();
    if from >= k || to >= k {
        return Err(Error::LabelOutOfRange {
            label: from.max(to),
            k,
        });
    }
    if counts_n[from] == 0 || counts_global[from] == 0 {
        return Err(Error::invalid(format!(
            "cannot move a node out of cluster {from}: it has no members"
        )));
    }
    let mut out = Vec::with_capacity(k);
    for m in 0..k {
        let shift = |c: usize| {
            let mut v = c as f64;
            if m == from {
                v -= 1.0;
            }
            if m == to {
                v += 1.0;
            }
            v
        };
        let (a, b) = (shift(counts_n[m]), shift(counts_global[m]));
        if a < 0.0 || b < 0.0 || a > b {
            return Err(Error::invalid(format!(
                "inconsistent counts in cluster {m}: {a} local, {b} global"
            )));
        }
        out.push(ratio_sqrt(a, b));
    }
    Ok(out)
}

/// Distance of a node with embedding `q_row` to a cluster with center `w_row`,
/// given the post-move diagonal `dt` and `size_ratio = √(|V_n|/|V|)`.
pub fn omega(w_row: &[f64], q_row: &[f64], dt: &[f64], size_ratio: f64) -> f64 {
    let dist: f64 = w_row.iter().zip(q_row).map(|(w, q)| (w - q).powi(2)).sum();
    let trace: f64 = dt.iter().map(|d| d * d).sum();
    let penalty: f64 = q_row
        .iter()
        .zip(dt)
        .map(|(q, d)| (q.abs() * (d + size_ratio)).powi(2))
        .sum();
    dist * trace + penalty
}

/// `η_n = ‖X_nW − Q*_n‖²γ_n + ‖|Q*_n|(Δ⁻¹Δ_n + √(|V_n|/|V|) I)‖²`.
pub fn eta(
    labels_n: &[usize],
    w: &DMatrix<f64>,
    q_star_n: &DMatrix<f64>,
    counts_n: &[usize],
    counts_global: &[usize],
    size_ratio: f64,
) -> Result<f64> {
    let k = w.nrows();
    check_len(k, counts_n.len())?;
    check_len(k, counts_global.len())?;
    check_len(labels_n.len(), q_star_n.nrows())?;
    check_len(k, q_star_n.ncols())?;
    let g = gamma(counts_n, counts_global)?;
    let scale: Vec<f64> = (0..k)
        .map(|m| ratio_sqrt(counts_n[m] as f64, counts_global[m] as f64) + size_ratio)
        .collect();
    let mut fit = 0.0;
    let mut penalty = 0.0;
    for (i, &c) in labels_n.iter().enumerate() {
        if c >= k {
            return Err(Error::LabelOutOfRange { label: c, k });
        }
        for j in 0..k {
            let q = q_star_n[(i, j)];
            fit += (w[(c, j)] - q).powi(2);
            penalty += (q.abs() * scale[j]).powi(2);
        }
    }
    Ok(fit * g + penalty)
}

/// `Q*_n` for every graph, decomposed in parallel.
pub fn embeddings(dataset: &GraphDataset, k: usize, eigen: &EigenOptions) -> Result<Vec<DMatrix<f64>>> {
    let total = dataset.total_nodes();
    dataset
        .graphs()
        .par_iter()
        .map(|g| {
            let pair = adjacency_top_k(g, k, eigen)?;
            Ok(q_star(&pair, g.n_nodes(), total)?.rows)
        })
        .collect()
}

/// Fits the joint model, keeping the restart with the lowest final loss
/// (earliest restart on ties).
pub fn fit(dataset: &GraphDataset, options: &FitOptions) -> Result<JointFit> {
    options.validate()?;
    check_k_fits(dataset, options.k)?;
    let q = embeddings(dataset, options.k, &options.eigen)?;
    fit_embeddings(&q, options)
}

fn check_k_fits(dataset: &GraphDataset, k: usize) -> Result<()> {
    let min = dataset.min_size();
    if k > min {
        return Err(Error::InvalidK {
            k,
            reason: format!("exceeds the smallest graph ({min} nodes)"),
        });
    }
    Ok(())
}

/// Runs the restarts on precomputed embeddings.
pub fn fit_embeddings(q: &[DMatrix<f64>], options: &FitOptions) -> Result<JointFit> {
    options.validate()?;
    let sizes: Vec<usize> = q.iter().map(DMatrix::nrows).collect();
    let mut best: Option<JointFit> = None;
    let mut losses = Vec::with_capacity(options.n_restarts);
    for r in 0..options.n_restarts {
        let seed = derive_seed(options.seed, r as u64);
        let init = initial_membership(&sizes, options.k, seed)?;
        let mut run = run_from(q, init, options)?;
        run.seed = seed;
        run.best_restart = r;
        losses.push(run.final_loss());
        if best.as_ref().is_none_or(|b| run.final_loss() < b.final_loss()) {
            best = Some(run);
        }
    }
    let mut best = best.expect("at least one restart");
    best.restart_losses = losses;
    Ok(best)
}

fn initial_membership(sizes: &[usize], k: usize, seed: u64) -> Result<Membership> {
    let graphs = sizes
        .iter()
        .map(|&n| crate::graph::Adjacency::from_sorted_unchecked(n.max(1), Vec::new()))
        .collect();
    let shape = GraphDataset::new(graphs)?;
    let mut m = random_membership(&shape, k, seed)?.into_per_graph();
    // Random labels on tiny inputs can miss a cluster; fill from clusters
    // with at least two members.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut global = ClusterCounts::from_labels(&m, k).global;
    while let Some(empty) = global.iter().position(|&c| c == 0) {
        let eligible: Vec<(usize, usize)> = m
            .iter()
            .enumerate()
            .flat_map(|(n, l)| l.iter().enumerate().map(move |(i, &c)| (n, i, c)))
            .filter(|&(_, _, c)| global[c] >= 2)
            .map(|(n, i, _)| (n, i))
            .collect();
        if eligible.is_empty() {
            return Err(Error::InvalidK {
                k,
                reason: "more clusters than nodes".into(),
            });
        }
        let (n, i) = eligible[rng.random_range(0..eligible.len())];
        global[m[n][i]] -= 1;
        global[empty] += 1;
        m[n][i] = empty;
    }
    Membership::new(m, k)
}

struct State<'a> {
    q: &'a [DMatrix<f64>],
    labels: Vec<Vec<usize>>,
    counts: ClusterCounts,
    ratios: Vec<f64>,
    k: usize,
}

impl State<'_> {
    fn gammas(&self) -> Result<Vec<f64>> {
        self.counts
            .per_graph
            .iter()
            .map(|c| gamma(c, &self.counts.global))
            .collect()
    }

    fn loss(&self, w: &DMatrix<f64>) -> Result<f64> {
        (0..self.labels.len())
            .map(|n| {
                eta(
                    &self.labels[n],
                    w,
                    &self.q[n],
                    &self.counts.per_graph[n],
                    &self.counts.global,
                    self.ratios[n],
                )
            })
            .sum()
    }

    fn refresh_counts(&mut self) {
        self.counts = ClusterCounts::from_labels(&self.labels, self.k);
    }

    /// Moves the worst-fitting node of a cluster with ≥ 2 members into each
    /// empty cluster. Returns the number of moves.
    fn reseed(&mut self, w: &DMatrix<f64>) -> usize {
        let mut moves = 0;
        while let Some(empty) = self.counts.global.iter().position(|&c| c == 0) {
            let mut worst: Option<(f64, usize, usize)> = None;
            for (n, labels) in self.labels.iter().enumerate() {
                let c_n = &self.counts.per_graph[n];
                let dt: Vec<f64> = (0..self.k)
                    .map(|m| ratio_sqrt(c_n[m] as f64, self.counts.global[m] as f64))
                    .collect();
                for (i, &l) in labels.iter().enumerate() {
                    if self.counts.global[l] < 2 {
                        continue;
                    }
                    let q_row: Vec<f64> = self.q[n].row(i).iter().copied().collect();
                    let w_row: Vec<f64> = w.row(l).iter().copied().collect();
                    let score = omega(&w_row, &q_row, &dt, self.ratios[n]);
                    if worst.is_none_or(|(s, _, _)| score > s) {
                        worst = Some((score, n, i));
                    }
                }
            }
            let (_, n, i) = worst.expect("k <= total nodes leaves a cluster with two members");
            let from = self.labels[n][i];
            self.labels[n][i] = empty;
            self.counts.per_graph[n][from] -= 1;
            self.counts.per_graph[n][empty] += 1;
            self.counts.global[from] -= 1;
            self.counts.global[empty] += 1;
            moves += 1;
        }
        moves
    }
}

/// Assigns every node of one graph in index order; `counts_n` and
/// `counts_global` stay fixed during the sweep.
pub fn sweep_graph(
    labels: &mut [usize],
    q: &DMatrix<f64>,
    w: &DMatrix<f64>,
    counts_n: &[usize],
    counts_global: &[usize],
    size_ratio: f64,
) {
    let k = w.nrows();
    let base: Vec<f64> = (0..k)
        .map(|m| ratio_sqrt(counts_n[m] as f64, counts_global[m] as f64))
        .collect();
    let mut dt = base.clone();
    let mut q_row = vec![0.0; k];
    let mut w_row = vec![0.0; k];
    for (i, label) in labels.iter_mut().enumerate() {
        let l = *label;
        for j in 0..k {
            q_row[j] = q[(i, j)];
        }
        let mut best = (f64::INFINITY, l);
        for c in 0..k {
            dt.copy_from_slice(&base);
            if c != l {
                dt[l] = ratio_sqrt(counts_n[l] as f64 - 1.0, counts_global[l] as f64 - 1.0);
                dt[c] = ratio_sqrt(counts_n[c] as f64 + 1.0, counts_global[c] as f64 + 1.0);
            }
            for j in 0..k {
                w_row[j] = w[(c, j)];
            }
            let score = omega(&w_row, &q_row, &dt, size_ratio);
            if score < best.0 {
                best = (score, c);
            }
        }
        *label = best.1;
    }
}

/// A single run from a given initial membership.
pub fn run_from(q: &[DMatrix<f64>], init: Membership, options: &FitOptions) -> Result<JointFit> {
    options.validate()?;
    let k = options.k;
    if init.k() != k {
        return Err(Error::LengthMismatch {
            expected: k,
            actual: init.k(),
        });
    }
    check_len(q.len(), init.n_graphs())?;
    for (qn, l) in q.iter().zip(init.per_graph()) {
        check_len(qn.nrows(), l.len())?;
        check_len(k, qn.ncols())?;
    }
    let total: usize = q.iter().map(DMatrix::nrows).sum();
    let ratios = q
        .iter()
        .map(|qn| (qn.nrows() as f64 / total as f64).sqrt())
        .collect();
    let counts = init.counts();
    if let Some(&empty) = counts.empty_clusters().first() {
        return Err(Error::EmptyCluster(empty));
    }
    let mut state = State {
        q,
        labels: init.into_per_graph(),
        counts,
        ratios,
        k,
    };

    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut reseeds = 0;
    let mut w = DMatrix::zeros(k, k);
    let mut gammas = Vec::new();
    while trace.len() < options.max_iter {
        gammas = state.gammas()?;
        w = update_w(&state.labels, q, &gammas, k)?;
        let global = state.counts.global.clone();
        let per_graph = state.counts.per_graph.clone();
        let ratios = state.ratios.clone();
        let sweep = |(n, labels): (usize, &mut Vec<usize>)| {
            sweep_graph(labels, &q[n], &w, &per_graph[n], &global, ratios[n]);
        };
        if options.parallel {
            state.labels.par_iter_mut().enumerate().for_each(sweep);
        } else {
            state.labels.iter_mut().enumerate().for_each(sweep);
        }
        state.refresh_counts();
        let moved = state.reseed(&w);
        if moved > 0 {
            log::debug!("re-seeded {moved} empty cluster(s)");
            reseeds += moved;
        }
        let loss = state.loss(&w)?;
        if let Some(&prev) = trace.last() {
            if loss > prev {
                log::debug!("loss increased from {prev} to {loss}");
            }
            trace.push(loss);
            if (loss - prev).abs() <= options.epsilon {
                converged = true;
                break;
            }
        } else {
            trace.push(loss);
        }
    }
    let iterations = trace.len();
    let counts = &state.counts;
    let final_gammas = counts
        .per_graph
        .iter()
        .map(|c| gamma(c, &counts.global))
        .collect::<Result<Vec<_>>>()
        .unwrap_or(gammas);
    Ok(JointFit {
        membership: Membership::new(state.labels, k)?,
        w,
        loss_trace: trace,
        gammas: final_gammas,
        iterations,
        converged,
        seed: options.seed,
        restart_losses: Vec::new(),
        best_restart: 0,
        reseeds,
    })
}

/// Both sides of the upper bound on one graph's term of the joint objective:
/// `(½‖a_n + b_n‖_F², η_n)`, using the signed population `Q_n` and the given
/// centers `w`.
pub fn bound_terms(pd: &PopulationDecomposition, n: usize, w: &DMatrix<f64>) -> Result<(f64, f64)> {
    let k = pd.k();
    let total = pd.total_nodes() as f64;
    let local = pd.labels(n).len() as f64;
    let q_star = pd.local_q(n)? * (total / local).sqrt();
    let s = (local / total).sqrt();
    let ratio = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            pd.delta_n[n][i] / pd.delta[i]
        } else {
            0.0
        }
    });
    // Zᵀ Δ⁻¹ Δ_n Z_n
    let m = pd.z.transpose() * ratio * &pd.z_n[n];
    let a = (pd.membership_matrix(n) * w - &q_star) * &m;
    let b = &q_star * (m - DMatrix::<f64>::identity(k, k) * s);
    let lhs = 0.5 * (a + b).norm_squared();
    let rhs = eta(
        pd.labels(n),
        w,
        &q_star,
        &pd.counts.per_graph[n],
        &pd.counts.global,
        s,
    )?;
    Ok((lhs, rhs))
}

/// Counts of one graph's labels.
pub fn graph_counts(labels: &[usize], k: usize) -> Vec<usize> {
    tally(labels, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Adjacency, DuplicatePolicy};

    #[test]
    fn gamma_examples() {
        assert!((gamma(&[2, 3], &[4, 6]).unwrap() - 1.0).abs() < 1e-15);
        assert!((gamma(&[2, 3], &[2, 3]).unwrap() - 2.0).abs() < 1e-15);
        assert!((gamma(&[2, 3], &[6, 9]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(matches!(gamma(&[0, 1], &[0, 1]), Err(Error::EmptyCluster(0))));
    }

    #[test]
    fn update_w_means() {
        let q = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 3.0, 0.0, 5.0, 5.0]);
        let w = update_w(&[vec![0, 0, 1]], &[q], &[2.0], 2).unwrap();
        assert_eq!(w.row(0).iter().copied().collect::<Vec<_>>(), vec![2.0, 0.0]);
        assert_eq!(w.row(1).iter().copied().collect::<Vec<_>>(), vec![5.0, 5.0]);
    }

    #[test]
    fn update_w_two_graphs() {
        let q1 = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let q2 = DMatrix::from_row_slice(1, 2, &[5.0, 6.0]);
        let labels = vec![vec![0, 1], vec![0]];
        let gammas = [0.5, 2.0];
        let w = update_w(&labels, &[q1.clone(), q2.clone()], &gammas, 2).unwrap();
        // Direct [Σ γ XᵀX]⁻¹ Σ γ XᵀQ*.
        let x1 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let x2 = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let lhs = x1.transpose() * &x1 * 0.5 + x2.transpose() * &x2 * 2.0;
        let rhs = x1.transpose() * q1 * 0.5 + x2.transpose() * q2 * 2.0;
        let direct = lhs.try_inverse().unwrap() * rhs;
        assert!((w - direct).norm() < 1e-12);
    }

    #[test]
    fn delta_tilde_examples() {
        let dt = delta_tilde(&[2, 2], &[1, 0], 0, 1).unwrap();
        assert_eq!(dt[0], 0.0);
        assert!((dt[1] - (1.0_f64 / 3.0).sqrt()).abs() < 1e-15);
        let same = delta_tilde(&[4, 6], &[2, 3], 1, 1).unwrap();
        assert!((same[0] - 0.5_f64.sqrt()).abs() < 1e-15);
        assert!((same[1] - 0.5_f64.sqrt()).abs() < 1e-15);
        assert_eq!(delta_tilde(&[3, 2], &[3, 2], 0, 1).unwrap(), vec![1.0, 1.0]);
        assert!(delta_tilde(&[2, 2], &[0, 2], 0, 1).is_err());
    }

    #[test]
    fn omega_examples() {
        assert_eq!(omega(&[1.0, 2.0], &[1.0, 2.0], &[0.0, 0.0], 0.0), 0.0);
        assert_eq!(omega(&[1.0, 0.0], &[0.0, 0.0], &[1.0, 1.0], 0.0), 2.0);
        let base = omega(&[1.0, 0.0], &[0.0, 0.0], &[0.5, 0.5], 0.0);
        let doubled = omega(&[1.0, 0.0], &[0.0, 0.0], &[1.0, 1.0], 0.0);
        assert!((doubled - 4.0 * base).abs() < 1e-15);
    }

    #[test]
    fn eta_examples() {
        let zero = DMatrix::zeros(2, 2);
        assert_eq!(eta(&[0, 1], &zero, &zero, &[1, 1], &[1, 1], 1.0).unwrap(), 0.0);
        // Hand instance: labels [0, 1], counts_n = [1, 1], global = [2, 2].
        let w = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 2.0]);
        let s = 0.5_f64;
        let gamma = 1.0;
        let fit = 1.0 + 1.0;
        let d = 0.5_f64.sqrt() + s;
        let penalty = (1.0 + 1.0 + 0.0 + 4.0) * d * d;
        let got = eta(&[0, 1], &w, &q, &[1, 1], &[2, 2], s).unwrap();
        assert!((got - (fit * gamma + penalty)).abs() < 1e-12);
        assert!(got >= fit * gamma);
    }

    fn cliques(m: usize, parts: usize) -> Adjacency {
        let mut edges = Vec::new();
        for p in 0..parts {
            for i in 0..m {
                for j in (i + 1)..m {
                    edges.push((p * m + i, p * m + j));
                }
            }
        }
        Adjacency::new(parts * m, edges, DuplicatePolicy::Error).unwrap()
    }

    #[test]
    fn recovers_disjoint_cliques() {
        let ds = GraphDataset::new(vec![cliques(6, 2), cliques(8, 2), cliques(5, 2)]).unwrap();
        let fit = fit(&ds, &FitOptions::new(2)).unwrap();
        let truth = Membership::new(
            ds.sizes().iter().map(|&n| (0..n).map(|i| i * 2 / n).collect()).collect(),
            2,
        )
        .unwrap();
        let nmi = crate::metrics::overall_nmi(&fit.membership, &truth).unwrap();
        assert!((nmi - 1.0).abs() < 1e-12, "nmi {nmi}");
    }

    #[test]
    fn deterministic_and_best_restart() {
        let ds = GraphDataset::new(vec![cliques(6, 3), cliques(7, 3)]).unwrap();
        let mut opts = FitOptions::new(3);
        opts.seed = 11;
        let a = fit(&ds, &opts).unwrap();
        let b = fit(&ds, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.restart_losses.len(), opts.n_restarts);
        assert!(a.restart_losses.iter().all(|&l| a.final_loss() <= l));
        assert_eq!(a.loss_trace.len(), a.iterations);
    }

    #[test]
    fn parallel_matches_sequential() {
        let ds = GraphDataset::new(vec![cliques(6, 3), cliques(7, 3), cliques(9, 3)]).unwrap();
        let mut opts = FitOptions::new(3);
        opts.seed = 3;
        let seq = fit(&ds, &opts).unwrap();
        opts.parallel = true;
        assert_eq!(seq, fit(&ds, &opts).unwrap());
    }

    #[test]
    fn json_fields() {
        let ds = GraphDataset::new(vec![cliques(5, 2)]).unwrap();
        let fit = fit(&ds, &FitOptions::new(2)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&fit.to_json().unwrap()).unwrap();
        for key in ["w", "loss_trace", "converged", "iterations", "seed"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["w"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn rejects_k_above_smallest_graph() {
        let ds = GraphDataset::new(vec![cliques(2, 1), cliques(5, 2)]).unwrap();
        assert!(matches!(fit(&ds, &FitOptions::new(3)), Err(Error::InvalidK { .. })));
        let mut bad = FitOptions::new(2);
        bad.epsilon = 0.0;
        assert!(fit(&ds, &bad).is_err());
    }

    #[test]
    fn sweep_picks_argmin() {
        let q = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.9, 0.1, 0.0, 1.0, 0.1, 0.8]);
        let w = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let mut labels = vec![1, 1, 0, 0];
        let counts = vec![2, 2];
        sweep_graph(&mut labels, &q, &w, &counts, &counts, 1.0);
        assert_eq!(labels, vec![0, 0, 1, 1]);
    }

    #[test]
    fn bound_holds_on_population_quantities() {
        use crate::spectral::population_quantities;
        use crate::synth::Connectivity;
        let theta = Connectivity::new(DMatrix::from_row_slice(2, 2, &[0.6, 0.1, 0.1, 0.3])).unwrap();
        let m = Membership::new(vec![vec![0, 1, 1, 0, 1], vec![1, 0, 0, 0]], 2).unwrap();
        let pd = population_quantities(&m, &theta).unwrap();
        let w = pd.global_centers();
        for n in 0..2 {
            let (lhs, rhs) = bound_terms(&pd, n, &w).unwrap();
            assert!(lhs < 1e-20, "a_n + b_n vanishes at the population optimum");
            assert!(lhs <= rhs + 1e-10);
        }
    }

    #[test]
    fn initial_membership_fills_clusters() {
        let m = initial_membership(&[2, 1], 3, 5).unwrap();
        assert!(m.counts().empty_clusters().is_empty());
        assert!(initial_membership(&[1, 1], 3, 5).is_err());
    }
}
