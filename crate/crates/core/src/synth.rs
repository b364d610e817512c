//! Synthetic joint-SBM datasets.
//!
//! Each graph draws community proportions `π_n ~ Dir(K, 1/(αK))`, labels
//! `X_ni ~ Mult(π_n)` and edges `a_nij ~ Bern(θ[X_ni, X_nj])` for `i < j`.
//! Note the inverse parametrization: the Dirichlet concentration is
//! `1/(αK)`, so larger `α` gives more heterogeneous community proportions
//! and `α → 0` gives nearly uniform ones.
//!
//! Randomness comes from ChaCha8 seeded with the config seed. Stream 0 feeds
//! graph sizes; graph `n` uses its own stream `n + 1`, which makes generation
//! order-independent and lets graphs be built in parallel.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Adjacency, GraphDataset, Membership};

/// Symmetric K×K matrix of edge probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Connectivity {
    probs: DMatrix<f64>,
}

impl Connectivity {
    pub fn new(probs: DMatrix<f64>) -> Result<Self> {
        let (r, c) = probs.shape();
        if r != c || r == 0 {
            return Err(Error::NotSquare { rows: r, cols: c });
        }
        if let Some(bad) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::invalid(format!(
                "connectivity entry {bad} outside [0, 1]"
            )));
        }
        let asym = crate::spectral::max_asymmetry(&probs);
        if asym > crate::spectral::SYMMETRY_TOL {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(Connectivity { probs })
    }

    /// `θ_in` on the diagonal, `θ_out` elsewhere.
    pub fn planted(k: usize, theta_in: f64, theta_out: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidK {
                k,
                reason: "must be positive".into(),
            });
        }
        Connectivity::new(DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                theta_in
            } else {
                theta_out
            }
        }))
    }

    pub fn k(&self) -> usize {
        self.probs.nrows()
    }

    pub fn probs(&self) -> &DMatrix<f64> {
        &self.probs
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.probs[(k, l)]
    }
}

/// How graph sizes are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeSpec {
    Fixed(usize),
    Explicit(Vec<usize>),
    /// Mean `mu`, dispersion `r` (variance `mu + mu²/r`).
    NegativeBinomial { mu: f64, r: f64 },
}

#[derive(Debug, Clone)]
pub struct GeneratorConfig {
    pub n_graphs: usize,
    pub sizes: SizeSpec,
    pub alpha: f64,
    pub theta: Connectivity,
    pub seed: u64,
}

/// A generated dataset with its ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub dataset: GraphDataset,
    pub truth: Membership,
    pub theta: Connectivity,
    pub proportions: Vec<Vec<f64>>,
}

/// Draws `π ~ Dir(K, 1/(αK))`.
///
/// Gamma variates with tiny shape underflow in linear space, so each is drawn
/// as `log G = log Gamma(a + 1) + log(U) / a` and normalized with log-sum-exp.
pub fn sample_pi<R: Rng + ?Sized>(alpha: f64, k: usize, rng: &mut R) -> Result<Vec<f64>> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    if k < 2 {
        return Err(Error::InvalidK {
            k,
            reason: "need at least two communities".into(),
        });
    }
    let a = 1.0 / (alpha * k as f64);
    let shifted = Gamma::new(a + 1.0, 1.0).map_err(|e| Error::invalid(e.to_string()))?;
    let logs: Vec<f64> = (0..k)
        .map(|_| {
            let g: f64 = shifted.sample(rng);
            // random::<f64>() lies in [0, 1); map to (0, 1].
            let u = 1.0 - rng.random::<f64>();
            g.ln() + u.ln() / a
        })
        .collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Draws `n` labels iid from the categorical distribution `pi`.
pub fn sample_labels<R: Rng + ?Sized>(pi: &[f64], n: usize, rng: &mut R) -> Vec<usize> {
    let last = pi.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    (0..n)
        .map(|_| {
            let u = rng.random::<f64>();
            let mut acc = 0.0;
            for (k, &p) in pi.iter().enumerate() {
                acc += p;
                if u < acc {
                    return k;
                }
            }
            last
        })
        .collect()
}

/// Samples every unordered pair once with probability `θ[label_i, label_j]`.
pub fn sample_graph<R: Rng + ?Sized>(
    labels: &[usize],
    theta: &Connectivity,
    rng: &mut R,
) -> Result<Adjacency> {
    let n = labels.len();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= theta.k()) {
        return Err(Error::LabelOutOfRange {
            label,
            k: theta.k(),
        });
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < theta.get(labels[i], labels[j]) {
                edges.push((i, j));
            }
        }
    }
    Ok(Adjacency::from_sorted_unchecked(n, edges))
}

/// Negative-binomial graph sizes as a Gamma–Poisson mixture, floored at 1.
pub fn sample_sizes<R: Rng + ?Sized>(
    n_graphs: usize,
    mu: f64,
    r: f64,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if !(mu > 0.0 && r > 0.0) || !mu.is_finite() || !r.is_finite() {
        return Err(Error::invalid(format!(
            "negative binomial needs mu > 0 and r > 0, got mu = {mu}, r = {r}"
        )));
    }
    let gamma = Gamma::new(r, mu / r).map_err(|e| Error::invalid(e.to_string()))?;
    Ok((0..n_graphs)
        .map(|_| {
            let lambda: f64 = gamma.sample(rng);
            let draw = if lambda > 0.0 {
                Poisson::new(lambda)
                    .map(|p| p.sample(rng))
                    .unwrap_or(0.0)
            } else {
                0.0
            };
            (draw as usize).max(1)
        })
        .collect())
}

/// Runs the full generative pipeline.
pub fn generate(config: &GeneratorConfig) -> Result<SyntheticData> {
    if config.n_graphs == 0 {
        return Err(Error::EmptyDataset);
    }
    let k = config.theta.k();
    let mut master = ChaCha8Rng::seed_from_u64(config.seed);
    let sizes = match &config.sizes {
        SizeSpec::Fixed(s) => vec![*s; config.n_graphs],
        SizeSpec::Explicit(v) => {
            if v.len() != config.n_graphs {
                return Err(Error::LengthMismatch {
                    expected: config.n_graphs,
                    actual: v.len(),
                });
            }
            v.clone()
        }
        SizeSpec::NegativeBinomial { mu, r } => {
            sample_sizes(config.n_graphs, *mu, *r, &mut master)?
        }
    };
    if sizes.contains(&0) {
        return Err(Error::EmptyGraph);
    }
    // Validate alpha and k before spawning work.
    sample_pi(config.alpha, k, &mut ChaCha8Rng::seed_from_u64(0))?;

    let per_graph: Vec<(Vec<f64>, Vec<usize>, Adjacency)> = sizes
        .par_iter()
        .enumerate()
        .map(|(n, &size)| {
            let mut rng = graph_stream(config.seed, n);
            let pi = sample_pi(config.alpha, k, &mut rng)?;
            let labels = sample_labels(&pi, size, &mut rng);
            let adj = sample_graph(&labels, &config.theta, &mut rng)?;
            Ok((pi, labels, adj))
        })
        .collect::<Result<_>>()?;

    let mut proportions = Vec::with_capacity(per_graph.len());
    let mut labels = Vec::with_capacity(per_graph.len());
    let mut graphs = Vec::with_capacity(per_graph.len());
    for (pi, l, g) in per_graph {
        proportions.push(pi);
        labels.push(l);
        graphs.push(g);
    }
    Ok(SyntheticData {
        dataset: GraphDataset::new(graphs)?,
        truth: Membership::new(labels, k)?,
        theta: config.theta.clone(),
        proportions,
    })
}

/// Samples graphs for fixed, caller-supplied memberships.
pub fn generate_with_labels(
    labels: &Membership,
    theta: &Connectivity,
    seed: u64,
) -> Result<GraphDataset> {
    if labels.k() != theta.k() {
        return Err(Error::LengthMismatch {
            expected: theta.k(),
            actual: labels.k(),
        });
    }
    let graphs = labels
        .per_graph()
        .par_iter()
        .enumerate()
        .map(|(n, l)| sample_graph(l, theta, &mut graph_stream(seed, n)))
        .collect::<Result<Vec<_>>>()?;
    GraphDataset::new(graphs)
}

/// Independent random stream for graph `n` under `seed`.
pub fn graph_stream(seed: u64, n: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(n as u64 + 1);
    rng
}
