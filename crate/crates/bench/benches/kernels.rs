use std::hint::black_box;

use bracketflow::dimer::{evolve_blocks, reconstruct_kernel};
use bracketflow::fermion::{imaginary_time_terms, integrate_flow};
use bracketflow::locality::locality_upper;
use bracketflow::series::{jk_recursive, radius_estimate, Convention};
use bracketflow::spin::dense::{dense_flow, DenseFlowOptions};
use bracketflow::spin::series::power_series_coefficients;
use bracketflow::{double_bracket_rhs, IntegratorConfig, Symmetry};
use bracketflow_bench::{banded_pair, transverse_chain};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn single_particle(c: &mut Criterion) {
    let mut g = c.benchmark_group("single-particle");
    for n in [64, 256] {
        let (lat, h, v) = banded_pair(n, 2, Symmetry::Antisymmetric, 1);
        g.bench_with_input(BenchmarkId::new("double_bracket_rhs", n), &n, |b, _| {
            b.iter(|| double_bracket_rhs(black_box(&v), black_box(&h), 4.0).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("locality_upper", n), &n, |b, _| {
            b.iter(|| locality_upper(black_box(&h), &lat, 7.0).unwrap())
        });
    }
    let (_, h, v) = banded_pair(64, 2, Symmetry::Antisymmetric, 2);
    g.sample_size(10);
    g.bench_function("integrate_flow/64", |b| {
        b.iter(|| integrate_flow(&h, &v, &[0.0, 1.0], &IntegratorConfig::adaptive(1e-10)).unwrap())
    });
    let (_, h, _) = banded_pair(128, 2, Symmetry::Antisymmetric, 3);
    g.bench_function("imaginary_time_terms/128", |b| b.iter(|| imaginary_time_terms(&h, 1.0, 40).unwrap()));
    g.finish();
}

fn dimer(c: &mut Criterion) {
    let mut g = c.benchmark_group("dimer");
    g.sample_size(10);
    g.bench_function("evolve_blocks/2048", |b| b.iter(|| evolve_blocks(0.5, 2048, black_box(2.0))));
    g.bench_function("reconstruct_profile/2048", |b| {
        b.iter(|| {
            let k = reconstruct_kernel(0.5, 2048, 2.0, 1024).unwrap();
            k.profile(&[1.0, 16.0, 256.0])
        })
    });
    g.finish();
}

fn spin(c: &mut Criterion) {
    let mut g = c.benchmark_group("spin");
    g.sample_size(10);
    let (h, v) = transverse_chain(6, 0.1);
    g.bench_function("dense_flow/6", |b| {
        b.iter(|| dense_flow(&h, &v, &[0.0, 1.0], &DenseFlowOptions::default()).unwrap())
    });
    g.bench_function("power_series/6/k4", |b| b.iter(|| power_series_coefficients(&h, &v, 4, 1_000_000).unwrap()));
    g.finish();
}

fn series(c: &mut Criterion) {
    c.bench_function("series/jk_radius/200", |b| {
        b.iter(|| radius_estimate(&jk_recursive(1.0, black_box(1.0), 200, Convention::KSquared).unwrap()).unwrap())
    });
}

criterion_group!(benches, single_particle, dimer, spin, series);
criterion_main!(benches);
