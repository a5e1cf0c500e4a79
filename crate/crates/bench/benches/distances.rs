use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gwd_bench::{balanced_gaussians, block, gaussians};
use gwd_core::{
    arz_step, fg_distance, ghk_solve, lwr_step, pr_distance, w1_cdf, w1_lp, ArzParams,
    BoundarySpec, GhkOptions, GhkParams, PrParams,
};
use std::hint::black_box;

fn classical(c: &mut Criterion) {
    let mut g = c.benchmark_group("w1");
    for n in [25, 50, 100] {
        let (ms, md) = balanced_gaussians(n);
        g.bench_with_input(BenchmarkId::new("cdf", n), &n, |b, _| b.iter(|| w1_cdf(black_box(&ms), &md, 1e-9).unwrap()));
        g.bench_with_input(BenchmarkId::new("lp", n), &n, |b, _| b.iter(|| w1_lp(black_box(&ms), &md).unwrap()));
    }
    g.finish();
}

fn unbalanced(c: &mut Criterion) {
    let mut g = c.benchmark_group("unbalanced");
    g.sample_size(10);
    for n in [25, 50, 100] {
        let (ms, md) = gaussians(n);
        g.bench_with_input(BenchmarkId::new("fg", n), &n, |b, _| b.iter(|| fg_distance(black_box(&ms), &md, 1.0).unwrap()));
        g.bench_with_input(BenchmarkId::new("pr", n), &n, |b, _| {
            b.iter(|| pr_distance(black_box(&ms), &md, PrParams::default()).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("ghk", n), &n, |b, _| {
            b.iter(|| ghk_solve(black_box(&ms), &md, GhkParams::default(), GhkOptions::default()).unwrap())
        });
    }
    g.finish();
}

fn traffic(c: &mut Criterion) {
    let mut g = c.benchmark_group("traffic_step");
    let bc = BoundarySpec::dirichlet(0.0, 0.0);
    for n in [200, 1000] {
        let (grid, state) = block(n);
        let dt = 0.5 * grid.dx();
        g.bench_with_input(BenchmarkId::new("lwr", n), &n, |b, _| {
            b.iter(|| lwr_step(&grid, black_box(&state), &bc, dt, 0, &[]).unwrap())
        });
        let params = ArzParams::default();
        g.bench_with_input(BenchmarkId::new("arz", n), &n, |b, _| {
            b.iter(|| arz_step(&grid, black_box(&state), &params, &bc, dt, 0, &[]).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, classical, unbalanced, traffic);
criterion_main!(benches);
