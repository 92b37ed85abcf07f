//! Finite-difference verification of the analytic gradients, covering
//! every parameter group and every cotangent entry point the trainer
//! uses: task loss alone, triplet loss from either feature source, and
//! the combined objective.

mod common;

use gridner_core::grid::encode;
use gridner_core::model::{backward, forward, init_params, task_loss, task_loss_with_grad};
use gridner_core::tensor::Grid3;
use gridner_core::triplet::{
    build_candidates, mine, select_source, triplet_loss, triplet_loss_with_grad, FeatureSource,
    MiningConfig, MiningStrategy,
};

use common::{gradcheck_config, gradcheck_sentence, max_grad_rel_error};

const TOLERANCE: f64 = 1e-4;
const STEP: f64 = 1e-6;

fn mining(strategy: MiningStrategy, source: FeatureSource) -> MiningConfig {
    MiningConfig {
        strategy,
        window: None,
        margin: 1.0,
        unique_pairs: true,
        source,
    }
}

#[test]
fn task_loss_gradients_match_finite_differences() {
    let cfg = gradcheck_config(17);
    let params = init_params(&cfg).unwrap();
    let (sentence, labels, token_ids) = gradcheck_sentence();
    let gold = encode(&sentence, &labels).unwrap();

    let trace = forward(&params, &cfg, &token_ids).unwrap();
    let (_, d_y) = task_loss_with_grad(&trace, &gold).unwrap();
    let analytic = backward(&params, &cfg, &trace, Some(&d_y), None).unwrap();

    let mut loss = |p: &gridner_core::model::Parameters| {
        let t = forward(p, &cfg, &token_ids).unwrap();
        task_loss(&t, &gold).unwrap()
    };
    let (err, at) = max_grad_rel_error(&params, &analytic, &mut loss, STEP);
    assert!(err <= TOLERANCE, "task loss: rel error {err} at {at}");
}

fn triplet_scenario(strategy: MiningStrategy, source: FeatureSource, seed: u64) -> (f64, String) {
    let cfg = gradcheck_config(seed);
    let params = init_params(&cfg).unwrap();
    let (sentence, _labels, token_ids) = gradcheck_sentence();
    let candidates = build_candidates(&sentence, None, true);
    assert!(!candidates.is_empty());
    let mcfg = mining(strategy, source);

    let trace = forward(&params, &cfg, &token_ids).unwrap();
    let feats = select_source(&trace, source);
    let triplets = mine(&candidates, feats, &mcfg).unwrap();
    assert!(
        !triplets.is_empty(),
        "scenario must mine at least one triplet"
    );
    let (loss0, d_feat) =
        triplet_loss_with_grad(&triplets, mcfg.margin, feats.rows, feats.cols, feats.depth)
            .unwrap();
    assert!(loss0 > 0.0, "hinge must be active for a meaningful check");
    let (d_y, d_h_bi) = match source {
        FeatureSource::Logits => (Some(&d_feat), None),
        FeatureSource::HBi => (None, Some(&d_feat)),
    };
    let analytic = backward(&params, &cfg, &trace, d_y, d_h_bi).unwrap();

    let mut loss = |p: &gridner_core::model::Parameters| {
        let t = forward(p, &cfg, &token_ids).unwrap();
        let f = select_source(&t, source);
        let trips = mine(&candidates, f, &mcfg).unwrap();
        triplet_loss(&trips, mcfg.margin).unwrap()
    };
    max_grad_rel_error(&params, &analytic, &mut loss, STEP)
}

#[test]
fn triplet_centroid_logits_gradients_match() {
    let (err, at) = triplet_scenario(MiningStrategy::Centroid, FeatureSource::Logits, 23);
    assert!(err <= TOLERANCE, "ce/logits: rel error {err} at {at}");
}

#[test]
fn triplet_centroid_hbi_gradients_match() {
    let (err, at) = triplet_scenario(MiningStrategy::Centroid, FeatureSource::HBi, 29);
    assert!(err <= TOLERANCE, "ce/hbi: rel error {err} at {at}");
}

#[test]
fn triplet_hard_negative_logits_gradients_match() {
    let (err, at) = triplet_scenario(MiningStrategy::HardNegative, FeatureSource::Logits, 31);
    assert!(err <= TOLERANCE, "hn/logits: rel error {err} at {at}");
}

#[test]
fn triplet_negative_centroid_hbi_gradients_match() {
    let (err, at) = triplet_scenario(MiningStrategy::NegativeCentroid, FeatureSource::HBi, 37);
    assert!(err <= TOLERANCE, "nc/hbi: rel error {err} at {at}");
}

#[test]
fn combined_objective_gradients_match() {
    let cfg = gradcheck_config(41);
    let params = init_params(&cfg).unwrap();
    let (sentence, labels, token_ids) = gradcheck_sentence();
    let gold = encode(&sentence, &labels).unwrap();
    let candidates = build_candidates(&sentence, None, true);
    let cfg_logits = mining(MiningStrategy::Centroid, FeatureSource::Logits);
    let cfg_hbi = mining(MiningStrategy::Centroid, FeatureSource::HBi);

    let trace = forward(&params, &cfg, &token_ids).unwrap();
    let (_, mut d_y) = task_loss_with_grad(&trace, &gold).unwrap();
    let y = select_source(&trace, FeatureSource::Logits);
    let t_logits = mine(&candidates, y, &cfg_logits).unwrap();
    let (_, d_y_trip) =
        triplet_loss_with_grad(&t_logits, cfg_logits.margin, y.rows, y.cols, y.depth).unwrap();
    for (a, b) in d_y.data.iter_mut().zip(d_y_trip.data.iter()) {
        *a += b;
    }
    let hbi = select_source(&trace, FeatureSource::HBi);
    let t_hbi = mine(&candidates, hbi, &cfg_hbi).unwrap();
    let (_, d_h_bi): (f64, Grid3) =
        triplet_loss_with_grad(&t_hbi, cfg_hbi.margin, hbi.rows, hbi.cols, hbi.depth).unwrap();

    let analytic = backward(&params, &cfg, &trace, Some(&d_y), Some(&d_h_bi)).unwrap();

    let mut loss = |p: &gridner_core::model::Parameters| {
        let t = forward(p, &cfg, &token_ids).unwrap();
        let task = task_loss(&t, &gold).unwrap();
        let y = select_source(&t, FeatureSource::Logits);
        let lt = triplet_loss(
            &mine(&candidates, y, &cfg_logits).unwrap(),
            cfg_logits.margin,
        )
        .unwrap();
        let hb = select_source(&t, FeatureSource::HBi);
        let lh = triplet_loss(&mine(&candidates, hb, &cfg_hbi).unwrap(), cfg_hbi.margin).unwrap();
        task + lt + lh
    };
    let (err, at) = max_grad_rel_error(&params, &analytic, &mut loss, STEP);
    assert!(err <= TOLERANCE, "combined: rel error {err} at {at}");
}
