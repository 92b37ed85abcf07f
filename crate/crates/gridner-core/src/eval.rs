//! Exact-match micro precision/recall/F1 with discontinuous subset
//! scopes. An entity counts as correct only when its full index list and
//! type both match a gold entity.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Entity;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction and gold lists differ in length: {predictions} vs {golds}")]
    LengthMismatch { predictions: usize, golds: usize },
}

/// Micro-aggregated counts and derived ratios. Zero denominators yield
/// zero, not NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub f1: f64,
    #[serde(rename = "p")]
    pub precision: f64,
    #[serde(rename = "r")]
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl MetricReport {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = if tp + fp == 0 {
            0.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let recall = if tp + fn_ == 0 {
            0.0
        } else {
            tp as f64 / (tp + fn_) as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        MetricReport {
            f1,
            precision,
            recall,
            tp,
            fp,
            fn_,
        }
    }
}

/// Overall metrics plus the two discontinuous scopes: sentences holding
/// at least one discontinuous gold entity, and discontinuous entities on
/// both sides only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetReport {
    pub overall: MetricReport,
    pub disc_sent: MetricReport,
    pub disc_ent: MetricReport,
}

/// Set-intersection counting of one sentence: (tp, fp, fn). Inputs are
/// deduplicated on (indices, label).
pub fn match_counts(predictions: &[Entity], golds: &[Entity]) -> (usize, usize, usize) {
    let pred: BTreeSet<&Entity> = predictions.iter().collect();
    let gold: BTreeSet<&Entity> = golds.iter().collect();
    let tp = pred.intersection(&gold).count();
    (tp, pred.len() - tp, gold.len() - tp)
}

/// Evaluates aligned per-sentence prediction and gold entity lists.
pub fn evaluate(
    predictions: &[Vec<Entity>],
    golds: &[Vec<Entity>],
) -> Result<SubsetReport, EvalError> {
    if predictions.len() != golds.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            golds: golds.len(),
        });
    }

    let mut overall = (0, 0, 0);
    let mut disc_sent = (0, 0, 0);
    let mut disc_ent = (0, 0, 0);
    let add = |acc: &mut (usize, usize, usize), c: (usize, usize, usize)| {
        acc.0 += c.0;
        acc.1 += c.1;
        acc.2 += c.2;
    };

    for (pred, gold) in predictions.iter().zip(golds.iter()) {
        add(&mut overall, match_counts(pred, gold));
        if gold.iter().any(Entity::is_discontinuous) {
            add(&mut disc_sent, match_counts(pred, gold));
        }
        let pred_disc: Vec<Entity> = pred
            .iter()
            .filter(|e| e.is_discontinuous())
            .cloned()
            .collect();
        let gold_disc: Vec<Entity> = gold
            .iter()
            .filter(|e| e.is_discontinuous())
            .cloned()
            .collect();
        add(&mut disc_ent, match_counts(&pred_disc, &gold_disc));
    }

    Ok(SubsetReport {
        overall: MetricReport::from_counts(overall.0, overall.1, overall.2),
        disc_sent: MetricReport::from_counts(disc_sent.0, disc_sent.1, disc_sent.2),
        disc_ent: MetricReport::from_counts(disc_ent.0, disc_ent.1, disc_ent.2),
    })
}
