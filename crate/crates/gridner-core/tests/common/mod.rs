//! Shared helpers for integration tests: a central-difference gradient
//! harness and small model/sentence builders.

#![allow(dead_code)]

use gridner_core::corpus::{Entity, Sentence};
use gridner_core::model::{ModelConfig, Parameters};

/// Central finite differences over every scalar parameter, compared
/// against analytic gradients. Relative error uses a small floor so
/// near-zero gradients are judged on the FD noise scale instead of
/// exploding the ratio.
pub fn max_grad_rel_error(
    params: &Parameters,
    analytic: &Parameters,
    loss: &mut dyn FnMut(&Parameters) -> f64,
    h: f64,
) -> (f64, String) {
    let mut work = params.clone();
    let mut worst = 0.0;
    let mut worst_at = String::new();
    let n_groups = params.groups().len();

    for g in 0..n_groups {
        let len = params.groups()[g].1.len();
        for i in 0..len {
            let theta = params.groups()[g].1[i];
            {
                let mut groups = work.groups_mut();
                groups[g].1[i] = theta + h;
            }
            let plus = loss(&work);
            {
                let mut groups = work.groups_mut();
                groups[g].1[i] = theta - h;
            }
            let minus = loss(&work);
            {
                let mut groups = work.groups_mut();
                groups[g].1[i] = theta;
            }
            let fd = (plus - minus) / (2.0 * h);
            let ga = analytic.groups()[g].1[i];
            let rel = (ga - fd).abs() / ga.abs().max(fd.abs()).max(1e-4);
            if rel > worst {
                worst = rel;
                worst_at = format!("{}[{}] analytic={} fd={}", params.groups()[g].0, i, ga, fd);
            }
        }
    }
    (worst, worst_at)
}

/// Five-token model small enough for exhaustive finite differences.
pub fn gradcheck_config(seed: u64) -> ModelConfig {
    ModelConfig {
        vocab_size: 9,
        d_embed: 5,
        d_context: 4,
        d_bi: 6,
        d_co: 5,
        classes: 4,
        conv_kernel: 3,
        seed,
    }
}

/// Independent brute-force reference for the mining strategies. It
/// recomputes every distance naively from the candidate sets and applies
/// the selection definitions directly; the only shared code is the data
/// types.
pub mod oracle {
    use gridner_core::tensor::Grid3;
    use gridner_core::triplet::{CandidateSet, Cell, MiningConfig, MiningStrategy};

    /// A mined triplet as (anchor cells, positive cells, negative cells)
    /// plus the three feature vectors.
    pub type Signature = (
        Vec<Cell>,
        Vec<Cell>,
        Vec<Cell>,
        Vec<f64>,
        Vec<f64>,
        Vec<f64>,
    );

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    fn mean(features: &Grid3, cells: &[Cell]) -> Vec<f64> {
        let mut acc = vec![0.0; features.depth];
        for c in cells {
            for (a, v) in acc.iter_mut().zip(features.cell(c.0, c.1).iter()) {
                *a += v;
            }
        }
        for a in acc.iter_mut() {
            *a /= cells.len() as f64;
        }
        acc
    }

    pub fn mine(
        candidates: &[CandidateSet],
        features: &Grid3,
        cfg: &MiningConfig,
    ) -> Vec<Signature> {
        let mut out = Vec::new();
        for set in candidates {
            let a_vec = features.cell(set.anchor.0, set.anchor.1).to_vec();
            let a_cells = vec![set.anchor];
            match cfg.strategy {
                MiningStrategy::HardNegative => {
                    for p in &set.positives {
                        let mut best: Option<&Cell> = None;
                        let mut best_d = f64::INFINITY;
                        for n in &set.negatives {
                            let d = dist(&a_vec, features.cell(n.0, n.1));
                            if d < best_d {
                                best_d = d;
                                best = Some(n);
                            }
                        }
                        let n = best.expect("negatives are never empty");
                        out.push((
                            a_cells.clone(),
                            vec![*p],
                            vec![*n],
                            a_vec.clone(),
                            features.cell(p.0, p.1).to_vec(),
                            features.cell(n.0, n.1).to_vec(),
                        ));
                    }
                }
                MiningStrategy::SemiHardNegative => {
                    for p in &set.positives {
                        let d_pos = dist(&a_vec, features.cell(p.0, p.1));
                        let mut best: Option<&Cell> = None;
                        let mut best_d = f64::INFINITY;
                        for n in &set.negatives {
                            let d = dist(&a_vec, features.cell(n.0, n.1));
                            if d > d_pos && d < d_pos + cfg.margin && d < best_d {
                                best_d = d;
                                best = Some(n);
                            }
                        }
                        if let Some(n) = best {
                            out.push((
                                a_cells.clone(),
                                vec![*p],
                                vec![*n],
                                a_vec.clone(),
                                features.cell(p.0, p.1).to_vec(),
                                features.cell(n.0, n.1).to_vec(),
                            ));
                        }
                    }
                }
                MiningStrategy::Centroid => {
                    out.push((
                        a_cells.clone(),
                        set.positives.clone(),
                        set.negatives.clone(),
                        a_vec.clone(),
                        mean(features, &set.positives),
                        mean(features, &set.negatives),
                    ));
                }
                MiningStrategy::NegativeCentroid => {
                    for p in &set.positives {
                        out.push((
                            a_cells.clone(),
                            vec![*p],
                            set.negatives.clone(),
                            a_vec.clone(),
                            features.cell(p.0, p.1).to_vec(),
                            mean(features, &set.negatives),
                        ));
                    }
                }
            }
        }
        out
    }
}

/// Five tokens, one discontinuous entity, one single-token entity of a
/// second type; exercises real anchors, the `[POS]` anchor and both
/// special fallback cells downstream.
pub fn gradcheck_sentence() -> (Sentence, Vec<String>, Vec<usize>) {
    let sentence = Sentence::new(
        vec![
            "pain".into(),
            "sharp".into(),
            "in".into(),
            "lower".into(),
            "legs".into(),
        ],
        vec![
            Entity::new(vec![0, 2, 3, 4], "ADR").unwrap(),
            Entity::new(vec![1], "Disorder").unwrap(),
        ],
    )
    .unwrap();
    let labels = vec!["ADR".to_string(), "Disorder".to_string()];
    let token_ids = vec![3, 1, 4, 0, 6];
    (sentence, labels, token_ids)
}
