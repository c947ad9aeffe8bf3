use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use feedbin_core::count::Count;
use feedbin_core::dynamics::{sample_binomial, step_in_place, SamplerConfig};
use feedbin_core::floorexp::floor_b_pow_exp;
use feedbin_core::montecarlo::replication_rng;
use feedbin_core::sequences::{check_identity_1101, GrowthSequence};
use feedbin_core::{classify_sequence, run_replications, ClassifyOptions, Kernel, ModelParams, ProcessState, RunOptions};
use std::hint::black_box;
use std::sync::Arc;

fn exact_floor(c: &mut Criterion) {
    let mut g = c.benchmark_group("floor_b_pow_exp");
    g.sample_size(10);
    for n in [10u32, 16, 19] {
        g.bench_function(format!("b=2,n={n}"), |b| b.iter(|| floor_b_pow_exp(2.0, black_box(n), 1.0, 2.0)));
    }
    g.finish();
}

fn identity(c: &mut Criterion) {
    let seq = GrowthSequence::factorial(2).unwrap();
    seq.table(1000).unwrap();
    c.bench_function("identity/factorial n=1000", |b| b.iter(|| check_identity_1101(&seq, 1000).unwrap()));
}

fn binomial(c: &mut Criterion) {
    let cfg = SamplerConfig::default();
    let mut rng = replication_rng(1, 0);
    let cases = [
        ("exact 1e3", Count::from_u64(1000), 0.3f64.ln()),
        ("poisson 1e9", Count::from_u64(1_000_000_000), -16.0),
        ("gaussian 1e9", Count::from_u64(1_000_000_000), 0.3f64.ln()),
        ("gaussian e^1000", Count::Approx(1000.0), 0.3f64.ln()),
    ];
    let mut g = c.benchmark_group("sample_binomial");
    for (name, size, ln_p) in cases {
        g.bench_function(name, |b| b.iter(|| sample_binomial(&size, ln_p, &mut rng, &cfg).unwrap()));
    }
    g.finish();
}

fn steps(c: &mut Criterion) {
    let seq = Arc::new(GrowthSequence::constant(1, 2).unwrap());
    let params = ModelParams::new(2.0, 1, seq.clone(), Kernel::IndependentBinomial).unwrap();
    let table = seq.table(10_001).unwrap();
    c.bench_function("trajectory/α=2 σ≡1 10⁴ steps", |b| {
        b.iter_batched(
            || (ProcessState::initial(&params), replication_rng(2, 0)),
            |(mut state, mut rng)| {
                for _ in 0..10_000 {
                    step_in_place(&mut state, &params, &table, &mut rng).unwrap();
                }
                state
            },
            BatchSize::SmallInput,
        )
    });
}

fn ensemble(c: &mut Criterion) {
    let seq = Arc::new(GrowthSequence::doubly_exponential_tau(1.0, 1.0, 3.0, 26).unwrap());
    let params = ModelParams::new(2.0, 1, seq, Kernel::IndependentBinomial).unwrap();
    let mut opts = RunOptions::new(25, 100, 3);
    opts.threads = 1;
    let mut g = c.benchmark_group("ensemble");
    g.sample_size(10);
    g.bench_function("supercritical 100×25", |b| b.iter(|| run_replications(&params, &opts).unwrap()));
    g.finish();
}

fn classifier(c: &mut Criterion) {
    let seq = GrowthSequence::polynomial(1, 2, 2).unwrap().without_analytic();
    seq.table(65).unwrap();
    c.bench_function("classify/numeric polynomial", |b| {
        b.iter(|| classify_sequence(&seq, 2.0, 64, ClassifyOptions::default()).unwrap())
    });
}

criterion_group!(benches, exact_floor, identity, binomial, steps, ensemble, classifier);
criterion_main!(benches);
