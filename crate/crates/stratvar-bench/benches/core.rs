use criterion::{black_box, criterion_group, criterion_main, Criterion};
use stratvar::{
    enumerate_distributions, estimate, minimax_value, var_strat_without, worst_nature, Allocation,
    AllocationClass, EstimatorKind, SimConfig, StratifiedPopulation, DEFAULT_SEARCH_CAP,
};
use stratvar_bench::fixture_scenario;

fn variance_eval(c: &mut Criterion) {
    let scenario = fixture_scenario();
    c.bench_function("var_strat_without/3x200", |b| {
        b.iter(|| var_strat_without(black_box(&scenario)))
    });
}

fn distribution_enumeration(c: &mut Criterion) {
    let pop = StratifiedPopulation::new(vec![10, 10, 10]).expect("valid sizes");
    c.bench_function("enumerate_distributions/30choose15", |b| {
        b.iter(|| {
            enumerate_distributions(black_box(&pop), 15, DEFAULT_SEARCH_CAP)
                .expect("within cap")
                .count()
        })
    });
}

fn worst_nature_search(c: &mut Criterion) {
    let pop = StratifiedPopulation::new(vec![20, 20]).expect("valid sizes");
    let alloc = Allocation::new(&pop, vec![5, 5]).expect("valid allocation");
    c.bench_function("worst_nature/N40_R20", |b| {
        b.iter(|| worst_nature(black_box(&pop), &alloc, 20, DEFAULT_SEARCH_CAP).expect("within cap"))
    });
}

fn minimax_game(c: &mut Criterion) {
    let pop = StratifiedPopulation::new(vec![8, 12]).expect("valid sizes");
    c.bench_function("minimax/N20_n10_admissible", |b| {
        b.iter(|| {
            minimax_value(
                black_box(&pop),
                10,
                10,
                AllocationClass::Admissible,
                DEFAULT_SEARCH_CAP,
            )
            .expect("within cap")
        })
    });
}

fn simulation_throughput(c: &mut Criterion) {
    let scenario = fixture_scenario();
    let config = SimConfig::new(scenario, EstimatorKind::StratWithout, 10_000, 7, 1)
        .expect("valid config");
    c.bench_function("simulate/10k_trials", |b| b.iter(|| estimate(black_box(&config))));
}

criterion_group!(
    benches,
    variance_eval,
    distribution_enumeration,
    worst_nature_search,
    minimax_game,
    simulation_throughput
);
criterion_main!(benches);
