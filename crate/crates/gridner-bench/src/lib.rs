//! Shared inputs for the criterion benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gridner_core::corpus::Sentence;
use gridner_core::synth::{random_sentence, SynthConfig};
use gridner_core::tensor::Grid3;

/// A deterministic batch of synthetic sentences.
pub fn sentences(count: usize, max_tokens: usize) -> Vec<Sentence> {
    let cfg = SynthConfig {
        max_tokens,
        ..SynthConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    (0..count)
        .map(|_| random_sentence(&mut rng, &cfg))
        .collect()
}

/// Random feature grid for a sentence of `n` tokens.
pub fn features(n: usize, depth: usize, seed: u64) -> Grid3 {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = n + 2;
    let mut grid = Grid3::zeros(side, side, depth);
    for v in grid.data.iter_mut() {
        *v = rng.random_range(-1.0..1.0);
    }
    grid
}
