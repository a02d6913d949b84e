use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mnl_bench::{dissimilarities, noisy_corpus, ratio_points};
use mnl_core::fitting::fit_negexp;
use mnl_core::numberline::{mds_1d, smacof_1d};
use mnl_core::pipeline::{analyze_corpus, AnalysisOptions};

fn analyze(c: &mut Criterion) {
    let mut group = c.benchmark_group("analyze_corpus");
    for dims in [64, 768] {
        let corpus = noisy_corpus(dims);
        let opts = AnalysisOptions::default();
        group.bench_with_input(BenchmarkId::from_parameter(dims), &corpus, |b, corpus| {
            b.iter(|| analyze_corpus(black_box(corpus), &opts).unwrap())
        });
    }
    group.finish();
}

fn fits(c: &mut Criterion) {
    let points = ratio_points(&noisy_corpus(64));
    c.bench_function("fit_negexp", |b| {
        b.iter(|| fit_negexp(black_box(&points)).unwrap())
    });
}

fn mds(c: &mut Criterion) {
    let d = dissimilarities(&noisy_corpus(64));
    c.bench_function("mds_1d", |b| b.iter(|| mds_1d(black_box(&d)).unwrap()));
    let init = mds_1d(&d).unwrap();
    c.bench_function("smacof_1d", |b| b.iter(|| smacof_1d(black_box(&d), &init)));
}

criterion_group!(benches, analyze, fits, mds);
criterion_main!(benches);
