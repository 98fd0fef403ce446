use criterion::{criterion_group, criterion_main, Criterion};
use newsrank_core::eval::{mape, ndcg_at_k};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pairs(n: usize) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    (0..n)
        .map(|_| {
            let actual = rng.random_range(1.0..500.0);
            (actual, actual * rng.random_range(0.5..1.5))
        })
        .collect()
}

fn metrics(c: &mut Criterion) {
    let data = pairs(2000);
    c.bench_function("mape 2000", |b| b.iter(|| mape(&data).unwrap()));
    c.bench_function("ndcg_at_k 2000", |b| b.iter(|| ndcg_at_k(&data, 2000).unwrap()));
}

criterion_group!(benches, metrics);
criterion_main!(benches);
