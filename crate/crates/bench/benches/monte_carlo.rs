use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use sublab_core::mc::{estimate_value, MarkovPolicy};
use sublab_core::scenarios::{get_scenario, Params};

fn monte_carlo(c: &mut Criterion) {
    let mut group = c.benchmark_group("estimate_value");
    group.sample_size(10);
    for name in ["g_brownian", "poisson_band", "mixed_jump_diffusion"] {
        let sc = get_scenario(name, &Params::new()).unwrap();
        let policy = MarkovPolicy::constant(0, sc.field.n_controls(), sc.horizon, 100).unwrap();
        let psi = sc.payoff;
        let payoff = move |x: &[f64]| psi.eval(x);
        group.bench_function(name, |b| {
            b.iter(|| {
                estimate_value(
                    &sc.field,
                    &policy,
                    &payoff,
                    black_box(&sc.x0),
                    sc.horizon,
                    10_000,
                    1,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, monte_carlo);
criterion_main!(benches);
