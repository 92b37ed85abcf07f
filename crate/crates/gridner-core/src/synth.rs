//! Synthetic sentence generation for round-trip and mining tests.
//!
//! Entities come from families whose grid encoding decodes back to
//! exactly the gold set: pairwise token-disjoint entities, full
//! head x middle x tail product families (overlapping discontinuous
//! mentions sharing a middle chain), and shared-chain variants (shortcut
//! paths or swapped heads). Arbitrary overlap can be inherently ambiguous
//! under the tagging scheme, so the generator sticks to these shapes.

use rand::Rng;

use crate::corpus::{Entity, Sentence};

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub max_tokens: usize,
    pub max_entities: usize,
    pub max_entity_tokens: usize,
    pub max_fragments: usize,
    pub labels: Vec<String>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            max_tokens: 20,
            max_entities: 4,
            max_entity_tokens: 8,
            max_fragments: 3,
            labels: vec!["ADR".to_string(), "Disorder".to_string()],
        }
    }
}

impl SynthConfig {
    fn label<R: Rng>(&self, rng: &mut R) -> String {
        self.labels[rng.random_range(0..self.labels.len())].clone()
    }
}

/// Draws one sentence with entities from a round-trip-exact family.
pub fn random_sentence<R: Rng>(rng: &mut R, cfg: &SynthConfig) -> Sentence {
    let n = rng.random_range(1..=cfg.max_tokens);
    let tokens: Vec<String> = (0..n)
        .map(|_| format!("w{:02}", rng.random_range(0..30)))
        .collect();
    let entities = match rng.random_range(0..10) {
        0 => Vec::new(),
        1..=4 => disjoint_entities(rng, cfg, n),
        5..=7 => product_family(rng, cfg, n),
        _ => shared_chain_family(rng, cfg, n),
    };
    Sentence::new(tokens, entities).expect("generated entities are in range")
}

/// Non-overlapping entities laid out left to right; each is built from
/// 1..=max_fragments runs separated by gaps, or is a single token.
fn disjoint_entities<R: Rng>(rng: &mut R, cfg: &SynthConfig, n: usize) -> Vec<Entity> {
    let mut entities = Vec::new();
    let want = rng.random_range(1..=cfg.max_entities);
    let mut cursor = 0usize;
    while entities.len() < want && cursor < n {
        if rng.random_range(0..10) < 3 {
            // single token
            let t = cursor + rng.random_range(0..2.min(n - cursor));
            if t >= n {
                break;
            }
            entities.push(Entity::new(vec![t], cfg.label(rng)).unwrap());
            cursor = t + 2;
            continue;
        }
        let frags = rng.random_range(1..=cfg.max_fragments);
        let mut budget = rng.random_range(frags.max(2)..=cfg.max_entity_tokens);
        let mut indices = Vec::new();
        let mut pos = cursor;
        for f in 0..frags {
            if pos >= n || budget == 0 {
                break;
            }
            let remaining_frags = frags - f - 1;
            let max_run = budget.saturating_sub(remaining_frags).max(1);
            let run = rng.random_range(1..=max_run).min(n - pos);
            indices.extend(pos..pos + run);
            budget -= run;
            pos += run + 1 + rng.random_range(0..2); // gap >= 1 between runs
        }
        if !indices.is_empty() {
            entities.push(Entity::new(indices, cfg.label(rng)).unwrap());
        }
        cursor = pos + rng.random_range(0..2);
    }
    entities
}

/// Every combination of head block x middle chain x tail block, all
/// sharing the middle; distinct boundary cells, so labels may vary.
fn product_family<R: Rng>(rng: &mut R, cfg: &SynthConfig, n: usize) -> Vec<Entity> {
    let heads = rng.random_range(1..=2usize);
    let tails = if heads == 2 && cfg.max_entities < 4 {
        1
    } else {
        rng.random_range(1..=2usize)
    };
    // block lengths kept small so every combo stays within the cap
    let head_len = rng.random_range(1..=2usize);
    let mid_len = rng.random_range(1..=3usize);
    let tail_len = rng.random_range(1..=2usize);
    if head_len + mid_len + tail_len > cfg.max_entity_tokens {
        return disjoint_entities(rng, cfg, n);
    }
    // blocks laid out with at least one gap token between them
    let blocks = heads + 1 + tails;
    let span = heads * head_len + mid_len + tails * tail_len + (blocks - 1);
    if span > n {
        return disjoint_entities(rng, cfg, n);
    }
    let mut start = rng.random_range(0..=(n - span));
    let mut head_runs = Vec::new();
    for _ in 0..heads {
        head_runs.push((start..start + head_len).collect::<Vec<_>>());
        start += head_len + 1;
    }
    let mid: Vec<usize> = (start..start + mid_len).collect();
    start += mid_len + 1;
    let mut tail_runs = Vec::new();
    for _ in 0..tails {
        tail_runs.push((start..start + tail_len).collect::<Vec<_>>());
        start += tail_len + 1;
    }

    let mut entities = Vec::new();
    for h in &head_runs {
        for t in &tail_runs {
            let mut indices = h.clone();
            indices.extend(&mid);
            indices.extend(t);
            entities.push(Entity::new(indices, cfg.label(rng)).unwrap());
        }
    }
    entities
}

/// A base chain plus either a shortcut skipping interior tokens (same
/// boundary cell, same label) or a second head feeding the same suffix.
fn shared_chain_family<R: Rng>(rng: &mut R, cfg: &SynthConfig, n: usize) -> Vec<Entity> {
    let len = rng.random_range(3..=cfg.max_entity_tokens.min(6));
    if n < len + 2 {
        return disjoint_entities(rng, cfg, n);
    }
    // chain with at most max_fragments runs
    let start = rng.random_range(1..=(n - len));
    let mut chain = Vec::with_capacity(len);
    let mut pos = start;
    let mut frags_left = cfg.max_fragments - 1;
    for _ in 0..len {
        chain.push(pos);
        if frags_left > 0 && pos + 2 < n && rng.random_range(0..4) == 0 {
            pos += 2;
            frags_left -= 1;
        } else {
            pos += 1;
        }
    }
    if *chain.last().unwrap() >= n {
        return disjoint_entities(rng, cfg, n);
    }

    let label = cfg.label(rng);
    let mut entities = vec![Entity::new(chain.clone(), label.clone()).unwrap()];
    let variant = if rng.random_range(0..2) == 0 {
        // shortcut: same head and tail, so the label must match
        let j = rng.random_range(2..chain.len());
        let mut short = vec![chain[0]];
        short.extend_from_slice(&chain[j..]);
        Entity::new(short, label).unwrap()
    } else {
        // swapped head: a fresh token before the chain's second element
        let h = rng.random_range(0..chain[0]);
        let mut swapped = vec![h];
        swapped.extend_from_slice(&chain[1..]);
        Entity::new(swapped, cfg.label(rng)).unwrap()
    };
    if variant.fragments().len() <= cfg.max_fragments && !entities.contains(&variant) {
        entities.push(variant);
    }
    entities
}
