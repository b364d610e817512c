//! Fixed synthetic workloads for the benchmarks.

use jointsbm::synth::{generate, SyntheticData};
use jointsbm::{Connectivity, GeneratorConfig, SizeSpec};

/// `n_graphs` planted-partition graphs of `size` nodes with `k` communities.
pub fn planted(n_graphs: usize, size: usize, k: usize, seed: u64) -> SyntheticData {
    generate(&GeneratorConfig {
        n_graphs,
        sizes: SizeSpec::Fixed(size),
        alpha: 1.0,
        theta: Connectivity::planted(k, 0.4, 0.05).expect("valid planted connectivity"),
        seed,
    })
    .expect("valid generator config")
}
