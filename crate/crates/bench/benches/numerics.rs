use std::hint::black_box;

use consensus_lab::consensus::{self, Target};
use consensus_lab::generate::{self, ModelShape};
use consensus_lab::market::{DrawMode, GeneratingDistribution, Market, MarketConfig};
use consensus_lab::{fixtures, game, interaction, spectral, trade, StationaryMethod};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn instance(agents: usize, signals: usize) -> (consensus_lab::ModelSpec, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let spec = generate::random_irreducible_model(&mut rng, &ModelShape::dense(agents, 3, signals));
    let y = generate::random_y(&mut rng, 3).values;
    (spec, y)
}

fn stationary(c: &mut Criterion) {
    let mut g = c.benchmark_group("stationary");
    for (agents, signals) in [(3, 4), (6, 6), (10, 8)] {
        let (spec, _) = instance(agents, signals);
        let b = interaction::build_b(&spec).unwrap().b;
        let n = b.nrows();
        g.bench_with_input(BenchmarkId::new("direct", n), &b, |bn, b| {
            bn.iter(|| spectral::stationary_distribution(black_box(b), StationaryMethod::Direct).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("power", n), &b, |bn, b| {
            bn.iter(|| spectral::stationary_distribution(black_box(b), StationaryMethod::Power).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("mfpt", n), &b, |bn, b| bn.iter(|| spectral::mfpt(black_box(b)).unwrap()));
    }
    g.finish();
}

fn consensus_and_game(c: &mut Criterion) {
    let (spec, y) = instance(6, 6);
    c.bench_function("consensus_expectation", |bn| {
        bn.iter(|| consensus::consensus_expectation(black_box(&spec), Target::State(&y)).unwrap())
    });
    c.bench_function("solve_beta_game", |bn| bn.iter(|| game::solve_beta_game(black_box(&spec), &y, 0.9).unwrap()));
    let b = interaction::build_b(&spec).unwrap().b;
    c.bench_function("no_trade_test", |bn| bn.iter(|| trade::no_trade_test(black_box(&b)).unwrap()));
}

fn market(c: &mut Criterion) {
    let spec = fixtures::common_prior_pair(0.8, consensus_lab::Network::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]));
    let y = spec.y.clone().unwrap().values;
    let draw = DrawMode::Nature(GeneratingDistribution::from_agent_view(&spec, 0).unwrap());
    let m = Market::new(&spec, &y, MarketConfig::new(0.99), draw).unwrap();
    c.bench_function("market_1000_runs", |bn| bn.iter(|| m.simulate_batch(black_box(1), 1000)));
}

criterion_group!(benches, stationary, consensus_and_game, market);
criterion_main!(benches);
