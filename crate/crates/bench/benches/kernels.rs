use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nls_bnf_bench::{lie_inputs, polynomial_pair};
use nls_bnf_core::algebra::{bracket_truncated, poisson_bracket};
use nls_bnf_core::divisor::{monte_carlo_violation, EnvelopeParams, EnvelopeVariant, MonteCarloConfig};
use nls_bnf_core::flow::{initial_state, SimConfig, Stepper};
use nls_bnf_core::normal_form::lie_transform;
use nls_bnf_core::{PotentialParams, RandomPotential};
use std::hint::black_box;

fn bracket(c: &mut Criterion) {
    let mut g = c.benchmark_group("bracket");
    for terms in [8, 32, 128] {
        let (f, h) = polynomial_pair(1, terms, 8);
        g.bench_with_input(BenchmarkId::new("full", terms), &terms, |b, _| {
            b.iter(|| poisson_bracket(black_box(&f), black_box(&h)))
        });
        g.bench_with_input(BenchmarkId::new("truncated_deg8", terms), &terms, |b, _| {
            b.iter(|| bracket_truncated(black_box(&f), black_box(&h), 8))
        });
    }
    g.finish();
}

fn lie(c: &mut Criterion) {
    let (h, f) = lie_inputs(2, 3, 6);
    let mut g = c.benchmark_group("lie_transform");
    for order in [2, 4] {
        g.bench_with_input(BenchmarkId::from_parameter(order), &order, |b, &o| {
            b.iter(|| lie_transform(black_box(&h), black_box(&f), o).unwrap())
        });
    }
    g.finish();
}

fn nls_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("nls_step");
    for k in [32u32, 128] {
        let pot = RandomPotential::sample(PotentialParams { dim: 1, r: 1.0, m: 2, cutoff: k, seed: 3 }).unwrap();
        let cfg = SimConfig { k, ..Default::default() };
        let mut st = Stepper::new(&cfg, &pot).unwrap();
        st.load(&initial_state(&cfg)).unwrap();
        g.bench_with_input(BenchmarkId::new("strang_1d", k), &k, |b, _| b.iter(|| st.step().unwrap()));
    }
    g.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let cfg = MonteCarloConfig {
        r_max: 2,
        k_max: 4,
        envelope: EnvelopeParams::from_gamma(0.2, EnvelopeVariant::MuExponent).unwrap(),
        potential: PotentialParams { dim: 1, r: 1.0, m: 2, cutoff: 4, seed: 0 },
        trials: 200,
        enumeration_limit: 10_000_000,
    };
    c.bench_function("monte_carlo_d1_200_trials", |b| {
        b.iter(|| monte_carlo_violation(black_box(&cfg)).unwrap())
    });
}

criterion_group! {
    name = kernels;
    config = Criterion::default().sample_size(20);
    targets = bracket, lie, nls_step, monte_carlo
}
criterion_main!(kernels);
