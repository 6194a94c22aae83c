use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use sublab_core::pide::{solve_to, DiscreteOperator, ValueField};
use sublab_core::scenarios::{get_scenario, Params};

fn solver(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    for name in ["g_brownian", "poisson_band", "mixed_jump_diffusion"] {
        let sc = get_scenario(name, &Params::new()).unwrap();
        let psi = ValueField::from_payoff(&sc.grid, &sc.payoff).unwrap();
        group.bench_function(name, |b| {
            b.iter(|| solve_to(black_box(&psi), &sc.field, sc.horizon, &sc.scheme).unwrap())
        });
    }
    let sc = get_scenario(
        "g_brownian",
        &Params::from([("dim".into(), 2.0), ("rho".into(), 0.3)]),
    )
    .unwrap();
    let psi = ValueField::from_payoff(&sc.grid, &sc.payoff).unwrap();
    group.bench_function("g_brownian_2d", |b| {
        b.iter(|| solve_to(black_box(&psi), &sc.field, sc.horizon, &sc.scheme).unwrap())
    });
    group.finish();

    let sc = get_scenario("linear_levy", &Params::new()).unwrap();
    c.bench_function("assemble/linear_levy", |b| {
        b.iter(|| DiscreteOperator::assemble(black_box(&sc.field), &sc.grid).unwrap())
    });
}

criterion_group!(benches, solver);
criterion_main!(benches);
