use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use gridner_bench::{features, sentences};
use gridner_core::triplet::{
    build_candidates, mine, triplet_loss, FeatureSource, MiningConfig, MiningStrategy,
};

fn bench_build_candidates(c: &mut Criterion) {
    let batch = sentences(64, 20);
    c.bench_function("mining/build_candidates_w5", |b| {
        b.iter(|| {
            for s in &batch {
                black_box(build_candidates(black_box(s), Some(5), true));
            }
        })
    });
}

fn bench_strategies(c: &mut Criterion) {
    let batch = sentences(16, 16);
    let prepared: Vec<_> = batch
        .iter()
        .map(|s| (build_candidates(s, Some(5), true), features(s.len(), 8, 7)))
        .collect();
    for (name, strategy) in [
        ("hn", MiningStrategy::HardNegative),
        ("sn", MiningStrategy::SemiHardNegative),
        ("ce", MiningStrategy::Centroid),
        ("nc", MiningStrategy::NegativeCentroid),
    ] {
        let cfg = MiningConfig {
            strategy,
            window: Some(5),
            margin: 1.0,
            unique_pairs: true,
            source: FeatureSource::Logits,
        };
        c.bench_function(&format!("mining/mine_and_loss_{name}"), |b| {
            b.iter(|| {
                for (candidates, feats) in &prepared {
                    let triplets = mine(black_box(candidates), feats, &cfg).unwrap();
                    black_box(triplet_loss(&triplets, cfg.margin).unwrap());
                }
            })
        });
    }
}

criterion_group!(benches, bench_build_candidates, bench_strategies);
criterion_main!(benches);
