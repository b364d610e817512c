use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use jointsbm::iso::fit_isolated;
use jointsbm::joint::{embeddings, fit, fit_embeddings};
use jointsbm::spectral::adjacency_top_k;
use jointsbm::{Alignment, EigenOptions, FitOptions, IsoOptions};
use jointsbm_bench::planted;
use std::hint::black_box;

fn eigensolver(c: &mut Criterion) {
    let mut group = c.benchmark_group("top_k");
    for n in [100, 500, 2000] {
        let g = planted(1, n, 6, 7).dataset.graph(0).clone();
        let dense = EigenOptions::default();
        let sparse = EigenOptions {
            dense_threshold: 0,
            ..EigenOptions::default()
        };
        group.bench_with_input(BenchmarkId::new("dense", n), &g, |b, g| {
            b.iter(|| adjacency_top_k(black_box(g), 6, &dense).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("lanczos", n), &g, |b, g| {
            b.iter(|| adjacency_top_k(black_box(g), 6, &sparse).unwrap())
        });
    }
    group.finish();
}

fn joint(c: &mut Criterion) {
    let data = planted(20, 100, 6, 3);
    let mut opts = FitOptions::new(6);
    opts.n_restarts = 1;
    c.bench_function("joint/end_to_end/20x100", |b| b.iter(|| fit(black_box(&data.dataset), &opts).unwrap()));
    let q = embeddings(&data.dataset, 6, &opts.eigen).unwrap();
    let mut group = c.benchmark_group("joint/iterations/20x100");
    for parallel in [false, true] {
        let o = FitOptions { parallel, ..opts };
        group.bench_with_input(BenchmarkId::from_parameter(parallel), &o, |b, o| {
            b.iter(|| fit_embeddings(black_box(&q), o).unwrap())
        });
    }
    group.finish();
}

fn isolated(c: &mut Criterion) {
    let data = planted(20, 100, 6, 3);
    let mut group = c.benchmark_group("iso/20x100");
    for method in [Alignment::Iso1, Alignment::Iso2, Alignment::Iso3] {
        group.bench_with_input(BenchmarkId::from_parameter(method), &method, |b, &m| {
            b.iter(|| fit_isolated(black_box(&data.dataset), 6, m, &IsoOptions::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, eigensolver, joint, isolated);
criterion_main!(benches);
