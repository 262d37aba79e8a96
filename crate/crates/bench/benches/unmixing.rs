use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sdsomp_bench::{fcls_problem, scene};
use sdsomp_core::noise::estimate_noise;
use sdsomp_core::oracle::solve_sdmmv_bruteforce;
use sdsomp_core::{run_sd_somp, solve_simplex_ls, unmix, FclsOptions, SompConfig, Stopping, UnmixOptions};

fn greedy(c: &mut Criterion) {
    let inst = scene(5, 500, 50, f64::INFINITY, 1);
    let mut g = c.benchmark_group("greedy_selection");
    for q in [2.0, f64::INFINITY] {
        let cfg = SompConfig::new(q, Stopping::FixedIterations(5), 0.0);
        g.bench_with_input(BenchmarkId::new("q", q), &cfg, |b, cfg| {
            b.iter(|| run_sd_somp(&inst.pixels, cfg).unwrap())
        });
    }
    g.finish();
}

fn stopping_rules(c: &mut Criterion) {
    let inst = scene(5, 500, 50, 35.0, 2);
    let mut g = c.benchmark_group("unmix_35db");
    for (name, stopping) in [("rule1", Stopping::Rule1), ("rule2", Stopping::Rule2)] {
        let opts = UnmixOptions { stopping, ..UnmixOptions::default() };
        g.bench_function(name, |b| b.iter(|| unmix(&inst.pixels, &opts).unwrap()));
    }
    g.finish();
}

fn fcls(c: &mut Criterion) {
    let mut g = c.benchmark_group("simplex_ls");
    for k in [3, 10, 30] {
        let (dict, x) = fcls_problem(50, k);
        g.bench_with_input(BenchmarkId::new("atoms", k), &k, |b, _| {
            b.iter(|| solve_simplex_ls(x.as_view(), &dict, 1e-9, 10_000).unwrap())
        });
    }
    g.finish();
}

fn noise(c: &mut Criterion) {
    let inst = scene(5, 1000, 50, 30.0, 3);
    c.bench_function("noise_estimation_50x1000", |b| b.iter(|| estimate_noise(&inst.pixels).unwrap()));
}

fn oracle(c: &mut Criterion) {
    let inst = scene(3, 10, 8, f64::INFINITY, 4);
    c.bench_function("bruteforce_10_pixels", |b| {
        b.iter(|| solve_sdmmv_bruteforce(&inst.pixels, 0.0, FclsOptions::default()).unwrap())
    });
}

criterion_group!(benches, greedy, stopping_rules, fcls, noise, oracle);
criterion_main!(benches);
