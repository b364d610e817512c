//! Graph and membership data model.
//!
//! Adjacency structures are undirected, binary and hollow. They are stored as
//! a sorted list of canonical `(u, v)` pairs with `u < v`; dense matrices are
//! only materialized inside the eigensolver.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What to do when an edge appears more than once in the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DuplicatePolicy {
    /// Drop repeats, logging a warning.
    #[default]
    Dedupe,
    Error,
}

/// An undirected simple graph on nodes `0..n_nodes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    n_nodes: usize,
    edges: Vec<(usize, usize)>,
}

impl Adjacency {
    /// Builds an adjacency from arbitrary (possibly non-canonical) pairs.
    pub fn new(
        n_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        policy: DuplicatePolicy,
    ) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut canonical = Vec::new();
        for (u, v) in edges {
            if u >= n_nodes || v >= n_nodes {
                return Err(Error::EndpointOutOfRange { u, v, n_nodes });
            }
            if u == v {
                return Err(Error::SelfLoop(u));
            }
            canonical.push((u.min(v), u.max(v)));
        }
        canonical.sort_unstable();
        let before = canonical.len();
        if policy == DuplicatePolicy::Error {
            if let Some(w) = canonical.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::DuplicateEdge(w[0].0, w[0].1));
            }
        }
        canonical.dedup();
        if canonical.len() != before {
            log::warn!(
                "dropped {} duplicate edge(s) in a graph of {} nodes",
                before - canonical.len(),
                n_nodes
            );
        }
        Ok(Adjacency {
            n_nodes,
            edges: canonical,
        })
    }

    /// Builds from pairs already known to be canonical, sorted and unique.
    pub(crate) fn from_sorted_unchecked(n_nodes: usize, edges: Vec<(usize, usize)>) -> Self {
        debug_assert!(edges.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(edges.iter().all(|&(u, v)| u < v && v < n_nodes));
        Adjacency { n_nodes, edges }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n_nodes];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_nodes, self.n_nodes);
        for &(u, v) in &self.edges {
            m[(u, v)] = 1.0;
            m[(v, u)] = 1.0;
        }
        m
    }

    /// `out = A x`.
    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for &(u, v) in &self.edges {
            out[u] += x[v];
            out[v] += x[u];
        }
    }
}

/// An ordered, non-empty collection of graphs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphDataset {
    graphs: Vec<Adjacency>,
    total_nodes: usize,
}

impl GraphDataset {
    pub fn new(graphs: Vec<Adjacency>) -> Result<Self> {
        if graphs.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let total_nodes = graphs.iter().map(Adjacency::n_nodes).sum();
        Ok(GraphDataset {
            graphs,
            total_nodes,
        })
    }

    pub fn graphs(&self) -> &[Adjacency] {
        &self.graphs
    }

    pub fn graph(&self, n: usize) -> &Adjacency {
        &self.graphs[n]
    }

    pub fn n_graphs(&self) -> usize {
        self.graphs.len()
    }

    /// `|V|`, the number of nodes summed over all graphs.
    pub fn total_nodes(&self) -> usize {
        self.total_nodes
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.graphs.iter().map(Adjacency::n_nodes).collect()
    }

    pub fn min_size(&self) -> usize {
        self.graphs.iter().map(Adjacency::n_nodes).min().unwrap_or(0)
    }
}

/// Hard community assignment, one label in `0..k` per node of every graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Membership {
    labels: Vec<Vec<usize>>,
    k: usize,
}

impl Membership {
    pub fn new(labels: Vec<Vec<usize>>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidK {
                k,
                reason: "must be positive".into(),
            });
        }
        if labels.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if let Some(&label) = labels.iter().flatten().find(|&&l| l >= k) {
            return Err(Error::LabelOutOfRange { label, k });
        }
        Ok(Membership { labels, k })
    }

    /// Checks that the membership covers `dataset` node for node.
    pub fn check_shape(&self, dataset: &GraphDataset) -> Result<()> {
        if self.labels.len() != dataset.n_graphs() {
            return Err(Error::LengthMismatch {
                expected: dataset.n_graphs(),
                actual: self.labels.len(),
            });
        }
        for (labels, g) in self.labels.iter().zip(dataset.graphs()) {
            if labels.len() != g.n_nodes() {
                return Err(Error::LengthMismatch {
                    expected: g.n_nodes(),
                    actual: labels.len(),
                });
            }
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_graphs(&self) -> usize {
        self.labels.len()
    }

    pub fn graph(&self, n: usize) -> &[usize] {
        &self.labels[n]
    }

    pub fn per_graph(&self) -> &[Vec<usize>] {
        &self.labels
    }

    pub fn into_per_graph(self) -> Vec<Vec<usize>> {
        self.labels
    }

    /// All labels concatenated in graph order.
    pub fn stacked(&self) -> Vec<usize> {
        self.labels.iter().flatten().copied().collect()
    }

    pub fn counts(&self) -> ClusterCounts {
        counts(self)
    }
}

/// Per-graph and global community sizes, `|G_nk|` and `|G_.k|`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClusterCounts {
    pub per_graph: Vec<Vec<usize>>,
    pub global: Vec<usize>,
}

impl ClusterCounts {
    pub fn from_labels(labels: &[Vec<usize>], k: usize) -> Self {
        let per_graph: Vec<Vec<usize>> = labels.iter().map(|l| tally(l, k)).collect();
        let mut global = vec![0; k];
        for row in &per_graph {
            for (g, c) in global.iter_mut().zip(row) {
                *g += c;
            }
        }
        ClusterCounts { per_graph, global }
    }

    pub fn empty_clusters(&self) -> Vec<usize> {
        (0..self.global.len()).filter(|&k| self.global[k] == 0).collect()
    }
}

/// Per-cluster node counts of one labeling.
pub fn tally(labels: &[usize], k: usize) -> Vec<usize> {
    let mut c = vec![0; k];
    for &l in labels {
        c[l] += 1;
    }
    c
}

pub fn counts(membership: &Membership) -> ClusterCounts {
    ClusterCounts::from_labels(&membership.labels, membership.k)
}

/// Uniform iid labels for every node, deterministic in `seed`.
pub fn random_membership(dataset: &GraphDataset, k: usize, seed: u64) -> Result<Membership> {
    if k < 2 {
        return Err(Error::InvalidK {
            k,
            reason: "need at least two communities".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = dataset
        .graphs()
        .iter()
        .map(|g| (0..g.n_nodes()).map(|_| rng.random_range(0..k)).collect())
        .collect();
    Membership::new(labels, k)
}

/// Exactly balanced labels: node `i` of an `n`-node graph gets `i * k / n`.
pub fn balanced_labels(n: usize, k: usize) -> Vec<usize> {
    (0..n).map(|i| i * k / n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Adjacency {
        Adjacency::new(3, [(0, 1), (2, 1)], DuplicatePolicy::Dedupe).unwrap()
    }

    #[test]
    fn canonicalizes_edges() {
        assert_eq!(path3().edges(), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn rejects_self_loop_and_out_of_range() {
        assert!(matches!(
            Adjacency::new(3, [(2, 2)], DuplicatePolicy::Dedupe),
            Err(Error::SelfLoop(2))
        ));
        assert!(matches!(
            Adjacency::new(3, [(0, 3)], DuplicatePolicy::Dedupe),
            Err(Error::EndpointOutOfRange { .. })
        ));
        assert!(matches!(
            Adjacency::new(0, [], DuplicatePolicy::Dedupe),
            Err(Error::EmptyGraph)
        ));
    }

    #[test]
    fn duplicate_policy() {
        let g = Adjacency::new(3, [(0, 1), (1, 0)], DuplicatePolicy::Dedupe).unwrap();
        assert_eq!(g.n_edges(), 1);
        assert!(matches!(
            Adjacency::new(3, [(0, 1), (1, 0)], DuplicatePolicy::Error),
            Err(Error::DuplicateEdge(0, 1))
        ));
    }

    #[test]
    fn matvec_matches_dense() {
        let g = path3();
        let x = [1.0, 2.0, 3.0];
        let mut out = [0.0; 3];
        g.matvec(&x, &mut out);
        let dense = g.to_dense() * nalgebra::DVector::from_column_slice(&x);
        assert_eq!(out.to_vec(), dense.as_slice().to_vec());
    }

    #[test]
    fn dataset_totals() {
        let a = Adjacency::new(4, [], DuplicatePolicy::Dedupe).unwrap();
        let b = Adjacency::new(5, [], DuplicatePolicy::Dedupe).unwrap();
        let ds = GraphDataset::new(vec![a, b]).unwrap();
        assert_eq!(ds.total_nodes(), 9);
        assert!(matches!(GraphDataset::new(vec![]), Err(Error::EmptyDataset)));
    }

    #[test]
    fn counts_examples() {
        let m = Membership::new(vec![vec![0, 0, 1]], 2).unwrap();
        let c = m.counts();
        assert_eq!(c.per_graph, vec![vec![2, 1]]);
        assert_eq!(c.global, vec![2, 1]);

        let m = Membership::new(vec![vec![0, 1], vec![1, 1]], 2).unwrap();
        assert_eq!(m.counts().global, vec![1, 3]);

        let m = Membership::new(vec![vec![0, 0]], 2).unwrap();
        assert_eq!(m.counts().per_graph, vec![vec![2, 0]]);
        assert_eq!(m.counts().empty_clusters(), vec![1]);
    }

    #[test]
    fn membership_rejects_bad_label() {
        assert!(matches!(
            Membership::new(vec![vec![0, 2]], 2),
            Err(Error::LabelOutOfRange { label: 2, k: 2 })
        ));
    }

    #[test]
    fn random_membership_is_deterministic() {
        let ds = GraphDataset::new(vec![path3(), path3()]).unwrap();
        let a = random_membership(&ds, 3, 7).unwrap();
        let b = random_membership(&ds, 3, 7).unwrap();
        assert_eq!(a, b);
        assert!(random_membership(&ds, 1, 7).is_err());
    }

    #[test]
    fn random_membership_single_node() {
        let g = Adjacency::new(1, [], DuplicatePolicy::Dedupe).unwrap();
        let ds = GraphDataset::new(vec![g]).unwrap();
        let m = random_membership(&ds, 2, 0).unwrap();
        assert_eq!(m.graph(0).len(), 1);
        assert!(m.graph(0)[0] < 2);
    }

    #[test]
    fn random_membership_frequencies() {
        // Binomial(10^4, 1/4): sd = sqrt(n p (1-p)) ~ 43.3; allow 5 sd.
        let g = Adjacency::new(10_000, [], DuplicatePolicy::Dedupe).unwrap();
        let ds = GraphDataset::new(vec![g]).unwrap();
        let m = random_membership(&ds, 4, 99).unwrap();
        let n = 10_000.0_f64;
        let sd = (n * 0.25 * 0.75).sqrt();
        for c in m.counts().global {
            assert!((c as f64 - n / 4.0).abs() <= 5.0 * sd, "count {c}");
        }
    }

    #[test]
    fn balanced_labels_are_balanced() {
        assert_eq!(balanced_labels(6, 2), vec![0, 0, 0, 1, 1, 1]);
        assert_eq!(tally(&balanced_labels(100, 4), 4), vec![25; 4]);
    }
}
