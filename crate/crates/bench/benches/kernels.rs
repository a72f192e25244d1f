use std::hint::black_box;

use augcat_core::cat::{simulate_batch, CatConfig, CatMode};
use augcat_core::data::{default_channels, fixture_bank, generate_synthetic, SyntheticCohort};
use augcat_core::estimation::{eap, eap_all, fit_2pl_mml, FitConfig, QuadratureGrid};
use augcat_core::scoring::standard_tasks;
use criterion::{criterion_group, criterion_main, Criterion};

fn cohort(n: usize) -> SyntheticCohort {
    let channels = default_channels(&standard_tasks(), (1.0, 2.0), 1);
    generate_synthetic(n, &fixture_bank(42), &channels, 1).unwrap()
}

fn estimation(c: &mut Criterion) {
    let data = cohort(2000);
    let bank = fixture_bank(42);
    let grid = QuadratureGrid::default();
    c.bench_function("eap_single_pattern", |b| {
        b.iter(|| eap(black_box(data.responses.row(0)), bank.items(), &grid).unwrap())
    });
    c.bench_function("eap_all_2000", |b| {
        b.iter(|| eap_all(black_box(&data.responses), &bank, &grid).unwrap())
    });
    let mut group = c.benchmark_group("calibration");
    group.sample_size(10);
    group.bench_function("fit_2pl_mml_2000x19", |b| {
        b.iter(|| fit_2pl_mml(black_box(&data.responses), &FitConfig::default()).unwrap())
    });
    group.finish();
}

fn cat(c: &mut Criterion) {
    let data = cohort(1000);
    let config = CatConfig::new(
        fixture_bank(42).into_frozen(),
        QuadratureGrid::default(),
        CatMode::Baseline,
    )
    .unwrap();
    let mut group = c.benchmark_group("cat");
    group.sample_size(20);
    group.bench_function("baseline_batch_1000", |b| {
        b.iter(|| simulate_batch(&config, black_box(&data.responses)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, estimation, cat);
criterion_main!(benches);
