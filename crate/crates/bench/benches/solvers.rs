//! Criterion micro-benchmarks for the solver stack.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lazy_spectra::*;
use nalgebra::DVector;

fn bench_conjugate_gradient(c: &mut Criterion) {
    let mut group = c.benchmark_group("conjugate_gradient");
    for &d in &[50usize, 200] {
        let b = synth::tridiagonal_metric(d, 4.0);
        let rhs = DVector::from_fn(d, |i, _| ((i * 13) as f64 * 0.37).sin());
        group.bench_with_input(BenchmarkId::from_parameter(d), &d, |bench, _| {
            bench.iter(|| conjugate_gradient(&b, &rhs, 1e-12).unwrap())
        });
    }
    group.finish();
}

fn bench_agd(c: &mut Criterion) {
    let mut group = c.benchmark_group("agd_inexact");
    for &kappa in &[10.0f64, 100.0] {
        let d = 50usize;
        let diag: Vec<f64> = (0..d)
            .map(|i| 1.0 + (kappa - 1.0) * i as f64 / (d - 1) as f64)
            .collect();
        let x0 = DVector::from_element(d, 1.0);
        group.bench_with_input(
            BenchmarkId::from_parameter(kappa as u64),
            &kappa,
            |bench, &kappa| {
                bench.iter(|| {
                    let diag = diag.clone();
                    let mut oracle = QuadraticOracle::new(
                        move |x: &DVector<f64>| DVector::from_fn(d, |i, _| diag[i] * x[i]),
                        kappa,
                        1.0,
                    )
                    .unwrap();
                    agd_inexact(&mut oracle, &x0, 200).unwrap()
                })
            },
        );
    }
    group.finish();
}

fn bench_leading_eigenvector(c: &mut Criterion) {
    let mut group = c.benchmark_group("appx_pca_pm");
    group.sample_size(10);
    for &gap in &[0.4f64, 0.1] {
        let d = 60usize;
        let spectrum = synth::spectrum_with_gap(d, 1, gap, 5);
        let (a, b, _) = synth::planted_genev(d, &spectrum, 3.0, 5);
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("gap_{gap}")),
            &gap,
            |bench, &gap| {
                bench.iter(|| genev_gap_dependent(&a, &b, 1, gap, 0.1, 0.05, 11).unwrap())
            },
        );
    }
    group.finish();
}

fn bench_cca(c: &mut Criterion) {
    let mut group = c.benchmark_group("lazy_cca");
    group.sample_size(10);
    let (x, y) = synth::planted_cca(120, 8, 6, &[0.9, 0.5], 0.2, 9);
    let problem = build_cca_problem(x, y, 0.0, 0.0).unwrap();
    for (name, backend) in [
        ("cg", InnerBackend::Nested),
        ("svrg", InnerBackend::Stochastic),
    ] {
        group.bench_with_input(BenchmarkId::from_parameter(name), &backend, |bench, &be| {
            bench.iter(|| cca_gap_free(&problem, 1, 0.2, 0.05, be, 13).unwrap())
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_conjugate_gradient,
    bench_agd,
    bench_leading_eigenvector,
    bench_cca
);
criterion_main!(benches);
