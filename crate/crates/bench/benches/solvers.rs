use adoption_bench::cohort_ladder;
use adoption_core::benchmark::{integrate_transparent, solve_transparent};
use adoption_core::verify::{grid_search, simulate, GridSpec};
use adoption_core::{optimal_policy, solve_equilibrium, DisclosurePolicy, Market, SimConfig};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn transparent(c: &mut Criterion) {
    let mut group = c.benchmark_group("transparent");
    for n in [2, 4, 8] {
        let m = cohort_ladder(n);
        group.bench_with_input(BenchmarkId::new("closed_form", n), &m, |b, m| b.iter(|| solve_transparent(black_box(m))));
    }
    let m = Market::two_cohort();
    group.bench_function("rk4_1e-4", |b| b.iter(|| integrate_transparent(black_box(&m), 1e-4)));
    group.finish();
}

fn designer(c: &mut Criterion) {
    let mut group = c.benchmark_group("designer");
    for n in [2, 4, 8] {
        let m = cohort_ladder(n);
        group.bench_with_input(BenchmarkId::new("optimal_policy", n), &m, |b, m| b.iter(|| optimal_policy(black_box(m))));
    }
    let m = Market::two_cohort();
    let plan = optimal_policy(&m).unwrap();
    group.bench_function("equilibrium", |b| b.iter(|| solve_equilibrium(black_box(&m), &plan.policy, 1e3)));
    group.finish();
}

fn verification(c: &mut Criterion) {
    let m = Market::two_cohort();
    let policy = DisclosurePolicy::transparent();
    let path = solve_equilibrium(&m, &policy, 1e3).unwrap();
    let mut group = c.benchmark_group("verification");
    group.sample_size(10);
    group.bench_function("simulate_10k", |b| b.iter(|| simulate(&m, &policy, &path, &SimConfig::new(10_000, 1))));
    group.bench_function("grid_dt_0.02", |b| b.iter(|| grid_search(&m, &GridSpec::new(0.02, 0.15, 0.25))));
    group.finish();
}

criterion_group!(benches, transparent, designer, verification);
criterion_main!(benches);
