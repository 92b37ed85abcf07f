//! Acceptance suite. Each test covers one numbered criterion at its
//! stated tolerance and prints a `criterion N: PASS/FAIL` line (visible
//! with `cargo test --test acceptance -- --nocapture`).

mod common;

use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gridner_core::corpus::{compute_stats, from_json, Entity};
use gridner_core::eval::evaluate;
use gridner_core::fixtures::{case_study_gold, case_study_predictions, toy_dataset, toy_sentences};
use gridner_core::grid::{decode, encode, DecodeConfig};
use gridner_core::model::{
    backward, forward, init_params, task_loss, task_loss_with_grad, ModelConfig,
};
use gridner_core::synth::{random_sentence, SynthConfig};
use gridner_core::tensor::Grid3;
use gridner_core::trainer::{train, TrainConfig};
use gridner_core::triplet::{
    build_candidates, mine, select_source, triplet_loss, triplet_loss_with_grad, Cell,
    FeatureSource, MiningConfig, MiningStrategy, Triplet, TripletPoint,
};

use common::{gradcheck_config, gradcheck_sentence, max_grad_rel_error, oracle};

fn verdict(criterion: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn entity_set(entities: &[Entity]) -> Vec<(Vec<usize>, String)> {
    let mut v: Vec<(Vec<usize>, String)> = entities
        .iter()
        .map(|e| (e.indices().to_vec(), e.label().to_string()))
        .collect();
    v.sort();
    v.dedup();
    v
}

/// Criterion 1: decode(encode(s)) equals the entity set for every
/// bundled corpus sentence and 10,000 synthetic sentences, under 60 s.
#[test]
fn criterion_1_grid_round_trip() {
    let start = Instant::now();
    let decode_cfg = DecodeConfig::default();

    let labels = vec!["ADR".to_string()];
    for s in toy_sentences() {
        let grid = encode(&s, &labels).unwrap();
        let decoded = decode(&grid, &decode_cfg).unwrap();
        assert_eq!(entity_set(&decoded), entity_set(&s.entities));
    }

    let synth_cfg = SynthConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for case in 0..10_000 {
        let s = random_sentence(&mut rng, &synth_cfg);
        let grid = encode(&s, &synth_cfg.labels).unwrap();
        let decoded = decode(&grid, &decode_cfg).unwrap();
        assert_eq!(
            entity_set(&decoded),
            entity_set(&s.entities),
            "case {case}: tokens {:?} entities {:?}",
            s.tokens,
            s.entities
        );
    }

    let elapsed = start.elapsed();
    verdict(
        "1 (grid round-trip)",
        elapsed < Duration::from_secs(60),
        &format!("20 corpus + 10000 synthetic sentences exact in {elapsed:.2?} (limit 60s)"),
    );
}

/// Criterion 2: mine() equals the brute-force reference on 1,000 random
/// (sentence, feature) instances across strategies, windows and pairing
/// modes, under 120 s.
#[test]
fn criterion_2_mining_oracle() {
    let start = Instant::now();
    let synth_cfg = SynthConfig {
        max_tokens: 8,
        ..SynthConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce);
    let strategies = [
        MiningStrategy::HardNegative,
        MiningStrategy::SemiHardNegative,
        MiningStrategy::Centroid,
        MiningStrategy::NegativeCentroid,
    ];
    let mut compared = 0usize;

    for _ in 0..1_000 {
        let sentence = random_sentence(&mut rng, &synth_cfg);
        let side = sentence.len() + 2;
        let mut features = Grid3::zeros(side, side, 4);
        for v in features.data.iter_mut() {
            *v = rng.random_range(-2.0..2.0);
        }
        for window in [None, Some(1), Some(3)] {
            for unique_pairs in [true, false] {
                let candidates = build_candidates(&sentence, window, unique_pairs);
                for strategy in strategies {
                    let cfg = MiningConfig {
                        strategy,
                        window,
                        margin: 1.0,
                        unique_pairs,
                        source: FeatureSource::Logits,
                    };
                    let mined = mine(&candidates, &features, &cfg).unwrap();
                    let mut got: Vec<oracle::Signature> = mined
                        .iter()
                        .map(|t| {
                            (
                                t.anchor.cells.clone(),
                                t.positive.cells.clone(),
                                t.negative.cells.clone(),
                                t.anchor.vec.clone(),
                                t.positive.vec.clone(),
                                t.negative.vec.clone(),
                            )
                        })
                        .collect();
                    let mut want = oracle::mine(&candidates, &features, &cfg);
                    let key = |s: &oracle::Signature| (s.0.clone(), s.1.clone(), s.2.clone());
                    got.sort_by_key(key);
                    want.sort_by_key(key);
                    assert_eq!(got.len(), want.len(), "triplet count differs");
                    for (g, w) in got.iter().zip(want.iter()) {
                        assert_eq!((&g.0, &g.1, &g.2), (&w.0, &w.1, &w.2), "cells differ");
                        for (gv, wv) in [(&g.3, &w.3), (&g.4, &w.4), (&g.5, &w.5)] {
                            assert_eq!(gv.len(), wv.len());
                            for (a, b) in gv.iter().zip(wv.iter()) {
                                assert!((a - b).abs() <= 1e-12, "vectors differ: {a} vs {b}");
                            }
                        }
                    }
                    compared += 1;
                }
            }
        }
    }

    let elapsed = start.elapsed();
    verdict(
        "2 (mining oracle)",
        elapsed < Duration::from_secs(120),
        &format!("{compared} mining runs matched the reference in {elapsed:.2?} (limit 120s)"),
    );
}

/// Criterion 3: analytic gradients vs central finite differences on a
/// 5-token model, all parameter groups, all cotangent entry points,
/// relative error <= 1e-4, under 120 s.
#[test]
fn criterion_3_gradient_fidelity() {
    let start = Instant::now();
    let tolerance = 1e-4;
    let step = 1e-6;
    let cfg = gradcheck_config(17);
    let params = init_params(&cfg).unwrap();
    let (sentence, labels, token_ids) = gradcheck_sentence();
    let gold = encode(&sentence, &labels).unwrap();
    let candidates = build_candidates(&sentence, None, true);
    let mining_for = |source| MiningConfig {
        strategy: MiningStrategy::Centroid,
        window: None,
        margin: 1.0,
        unique_pairs: true,
        source,
    };

    let mut worst: (f64, String) = (0.0, String::new());
    let mut track = |label: &str, (err, at): (f64, String)| {
        if err > worst.0 {
            worst = (err, format!("{label}: {at}"));
        }
    };

    // task loss alone
    {
        let trace = forward(&params, &cfg, &token_ids).unwrap();
        let (_, d_y) = task_loss_with_grad(&trace, &gold).unwrap();
        let analytic = backward(&params, &cfg, &trace, Some(&d_y), None).unwrap();
        let mut loss = |p: &gridner_core::model::Parameters| {
            let t = forward(p, &cfg, &token_ids).unwrap();
            task_loss(&t, &gold).unwrap()
        };
        track(
            "task",
            max_grad_rel_error(&params, &analytic, &mut loss, step),
        );
    }

    // triplet loss through each feature source
    for source in [FeatureSource::Logits, FeatureSource::HBi] {
        let mcfg = mining_for(source);
        let trace = forward(&params, &cfg, &token_ids).unwrap();
        let feats = select_source(&trace, source);
        let triplets = mine(&candidates, feats, &mcfg).unwrap();
        let (loss0, d_feat) =
            triplet_loss_with_grad(&triplets, mcfg.margin, feats.rows, feats.cols, feats.depth)
                .unwrap();
        assert!(loss0 > 0.0);
        let (d_y, d_h_bi) = match source {
            FeatureSource::Logits => (Some(&d_feat), None),
            FeatureSource::HBi => (None, Some(&d_feat)),
        };
        let analytic = backward(&params, &cfg, &trace, d_y, d_h_bi).unwrap();
        let mut loss = |p: &gridner_core::model::Parameters| {
            let t = forward(p, &cfg, &token_ids).unwrap();
            let f = select_source(&t, source);
            triplet_loss(&mine(&candidates, f, &mcfg).unwrap(), mcfg.margin).unwrap()
        };
        let label = match source {
            FeatureSource::Logits => "triplet/logits",
            FeatureSource::HBi => "triplet/hbi",
        };
        track(
            label,
            max_grad_rel_error(&params, &analytic, &mut loss, step),
        );
    }

    // combined objective through both entry points at once
    {
        let cfg_logits = mining_for(FeatureSource::Logits);
        let cfg_hbi = mining_for(FeatureSource::HBi);
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
        let (_, d_h_bi) =
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
            let lh =
                triplet_loss(&mine(&candidates, hb, &cfg_hbi).unwrap(), cfg_hbi.margin).unwrap();
            task + lt + lh
        };
        track(
            "combined",
            max_grad_rel_error(&params, &analytic, &mut loss, step),
        );
    }

    let elapsed = start.elapsed();
    let pass = worst.0 <= tolerance && elapsed < Duration::from_secs(120);
    verdict(
        "3 (gradient fidelity)",
        pass,
        &format!(
            "max relative error {:.3e} (tolerance 1e-4) over all groups and entry points in {elapsed:.2?}; worst at {}",
            worst.0, worst.1
        ),
    );
}

/// Criterion 4: analytic loss values to 1e-12 — uniform logits give
/// ln(c); the hand-computed triplet examples match.
#[test]
fn criterion_4_analytic_loss_values() {
    let cfg = gradcheck_config(3);
    let params = init_params(&cfg).unwrap();
    let (sentence, labels, token_ids) = gradcheck_sentence();
    let gold = encode(&sentence, &labels).unwrap();
    let mut trace = forward(&params, &cfg, &token_ids).unwrap();
    trace.y.data.fill(0.7);
    let loss = task_loss(&trace, &gold).unwrap();
    let ln_c = (cfg.classes as f64).ln();
    let uniform_ok = (loss - ln_c).abs() <= 1e-12;

    let point = |v: f64| TripletPoint {
        cells: vec![Cell(2, 2)],
        vec: vec![v],
    };
    // a = p with the negative clearing the margin: contribution 0
    let inactive = Triplet {
        anchor: point(0.0),
        positive: point(0.0),
        negative: point(1.0),
    };
    // d(a,p) = 1, d(a,n) = 1, margin 1: max(1 - 1 + 1, 0) = 1
    let unit = Triplet {
        anchor: point(0.0),
        positive: point(1.0),
        negative: point(1.0),
    };
    let inactive_ok = triplet_loss(std::slice::from_ref(&inactive), 1.0)
        .unwrap()
        .abs()
        <= 1e-12;
    let unit_ok = (triplet_loss(std::slice::from_ref(&unit), 1.0).unwrap() - 1.0).abs() <= 1e-12;
    // mean reduction over the two
    let mean_ok = (triplet_loss(&[inactive, unit], 1.0).unwrap() - 0.5).abs() <= 1e-12;

    // centroid arithmetic: positives {1, 3} -> 2, negatives {-1, -3} -> -2
    let side = 6;
    let mut features = Grid3::zeros(side, side, 1);
    features.cell_mut(2, 3)[0] = 0.0;
    features.cell_mut(3, 2)[0] = 1.0;
    features.cell_mut(4, 5)[0] = 3.0;
    features.cell_mut(5, 4)[0] = -1.0;
    features.cell_mut(5, 2)[0] = -3.0;
    let sets = vec![gridner_core::triplet::CandidateSet {
        anchor: Cell(2, 3),
        positives: vec![Cell(3, 2), Cell(4, 5)],
        negatives: vec![Cell(5, 4), Cell(5, 2)],
    }];
    let ce = mine(
        &sets,
        &features,
        &MiningConfig {
            strategy: MiningStrategy::Centroid,
            ..MiningConfig::default()
        },
    )
    .unwrap();
    let centroid_ok = (ce[0].positive.vec[0] - 2.0).abs() <= 1e-12
        && (ce[0].negative.vec[0] - (-2.0)).abs() <= 1e-12
        // loss = max(|0-2| - |0-(-2)| + 1, 0) = 1
        && (triplet_loss(&ce, 1.0).unwrap() - 1.0).abs() <= 1e-12;

    let pass = uniform_ok && inactive_ok && unit_ok && mean_ok && centroid_ok;
    verdict(
        "4 (analytic loss values)",
        pass,
        &format!(
            "uniform-logits loss {loss:.15} vs ln(c) {ln_c:.15}; triplet hand values matched to 1e-12"
        ),
    );
}

/// Criterion 5: the bundled 20-sentence corpus is overfit to train
/// micro-F1 = 100% within 200 epochs (margin 1, centroid mining,
/// window 5) and the violation rate drops from its initial value;
/// runtime under 5 minutes.
#[test]
fn criterion_5_toy_overfit() {
    let start = Instant::now();
    let dataset = toy_dataset();
    let model_cfg = ModelConfig::with_dims(0, 0, 1);
    let cfg = TrainConfig {
        learning_rate: 5e-4,
        max_epochs: 200,
        // patience is a dev-set mechanism; the overfit check gets the
        // full epoch budget
        early_stop_patience: 200,
        batch_size: 6,
        seed: 42,
        mining: MiningConfig {
            strategy: MiningStrategy::Centroid,
            window: Some(5),
            margin: 1.0,
            unique_pairs: true,
            source: FeatureSource::Logits,
        },
        ..TrainConfig::default()
    };
    let outcome = train(&dataset, &model_cfg, &cfg).unwrap();
    let elapsed = start.elapsed();

    let f1_ok = outcome.history.best_val_f1 >= 1.0;
    let epochs_ok = outcome.history.best_epoch <= 200;
    let violation_ok =
        outcome.history.final_violation_rate < outcome.history.initial_violation_rate;
    let time_ok = elapsed < Duration::from_secs(300);
    verdict(
        "5 (toy overfit)",
        f1_ok && epochs_ok && violation_ok && time_ok,
        &format!(
            "train micro-F1 {:.4} at epoch {} of 200; violation rate {:.4} -> {:.4}; {elapsed:.1?} (limit 300s)",
            outcome.history.best_val_f1,
            outcome.history.best_epoch,
            outcome.history.initial_violation_rate,
            outcome.history.final_violation_rate
        ),
    );
}

/// Criterion 6: the bundled case-study prediction set against its gold
/// set gives (tp, fp, fn) = (4, 2, 0), P = 0.6667, R = 1.0, F1 = 0.8.
#[test]
fn criterion_6_metric_fixture() {
    let report = evaluate(&[case_study_predictions()], &[case_study_gold()]).unwrap();
    let m = report.overall;
    let pass = (m.tp, m.fp, m.fn_) == (4, 2, 0)
        && (m.precision - 0.6667).abs() <= 1e-4
        && m.recall == 1.0
        && (m.f1 - 0.8).abs() <= 1e-4;
    verdict(
        "6 (metric fixture)",
        pass,
        &format!(
            "tp {} fp {} fn {} P {:.4} R {:.4} F1 {:.4}",
            m.tp, m.fp, m.fn_, m.precision, m.recall, m.f1
        ),
    );
}

/// Criterion 7 (conditional): statistics of the full CADEC corpus, when
/// a converted copy is supplied via GRIDNER_CADEC_JSON.
#[test]
fn criterion_7_stats_reproduction() {
    let Ok(path) = std::env::var("GRIDNER_CADEC_JSON") else {
        println!(
            "criterion 7 (stats reproduction): SKIP — set GRIDNER_CADEC_JSON to a JSON file \
             holding all CADEC splits to enable"
        );
        return;
    };
    let json = std::fs::read_to_string(&path).expect("readable CADEC JSON");
    let sentences = from_json(&json).expect("valid corpus JSON");
    let stats = compute_stats(&sentences);
    let pass = stats.total_sentences == 7_597
        && stats.total_entities == 6_318
        && stats.discontinuous_entities == 679
        && (stats.disc_percentage - 679.0 / 6318.0).abs() < 1e-12;
    verdict(
        "7 (stats reproduction)",
        pass,
        &format!(
            "sentences {} entities {} discontinuous {} ({:.2}%)",
            stats.total_sentences,
            stats.total_entities,
            stats.discontinuous_entities,
            stats.disc_percentage * 100.0
        ),
    );
}

/// Criterion 8: full-benchmark test F1 figures need fine-tuned
/// pretrained encoders and license-gated corpora and are explicitly out
/// of scope; the substitute is criteria 1-7 plus the module invariant
/// suites, spot-checked here end to end.
#[test]
fn criterion_8_substitute_invariants() {
    // determinism: same seed, same input -> bit-identical forward
    let cfg = gradcheck_config(9);
    let params = init_params(&cfg).unwrap();
    let params2 = init_params(&cfg).unwrap();
    let (_, _, token_ids) = gradcheck_sentence();
    let a = forward(&params, &cfg, &token_ids).unwrap();
    let b = forward(&params2, &cfg, &token_ids).unwrap();
    let determinism_ok = params == params2 && a.y.data == b.y.data;

    // loss bounds: random features never give a negative triplet loss
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let synth_cfg = SynthConfig::default();
    let mut loss_ok = true;
    for _ in 0..50 {
        let s = random_sentence(&mut rng, &synth_cfg);
        let sets = build_candidates(&s, Some(3), true);
        let side = s.len() + 2;
        let mut feats = Grid3::zeros(side, side, 3);
        for v in feats.data.iter_mut() {
            *v = rng.random_range(-2.0..2.0);
        }
        for strategy in [
            MiningStrategy::HardNegative,
            MiningStrategy::SemiHardNegative,
            MiningStrategy::Centroid,
            MiningStrategy::NegativeCentroid,
        ] {
            let mcfg = MiningConfig {
                strategy,
                window: Some(3),
                ..MiningConfig::default()
            };
            let triplets = mine(&sets, &feats, &mcfg).unwrap();
            loss_ok &= triplet_loss(&triplets, mcfg.margin).unwrap() >= 0.0;
        }
    }

    // windowing monotonicity spot check
    let mut window_ok = true;
    for seed in 0..50u64 {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let s = random_sentence(&mut r, &synth_cfg);
        let narrow = build_candidates(&s, Some(1), true);
        let wide = build_candidates(&s, Some(4), true);
        for (a, b) in narrow.iter().zip(wide.iter()) {
            for p in &a.positives {
                if p.0 >= 2 && p.1 >= 2 {
                    window_ok &= b.positives.contains(p);
                }
            }
            for n in &a.negatives {
                if n.0 >= 2 && n.1 >= 2 {
                    window_ok &= b.negatives.contains(n);
                }
            }
        }
    }

    // evaluation symmetry and monotonicity spot check
    let gold = vec![case_study_gold()];
    let pred = vec![case_study_predictions()];
    let ab = evaluate(&pred, &gold).unwrap();
    let ba = evaluate(&gold, &pred).unwrap();
    let mut eval_ok = ab.overall.precision == ba.overall.recall
        && ab.overall.recall == ba.overall.precision
        && (ab.overall.f1 - ba.overall.f1).abs() < 1e-15;
    // adding a correct prediction never lowers metrics
    let mut better = case_study_predictions();
    better.retain(|e| case_study_gold().contains(e));
    let improved = evaluate(&[better], &gold).unwrap();
    eval_ok &= improved.overall.precision >= ab.overall.precision
        && improved.overall.recall >= ab.overall.recall;

    let pass = determinism_ok && loss_ok && window_ok && eval_ok;
    verdict(
        "8 (substitute invariant suites)",
        pass,
        "full-benchmark PLM F1 is out of scope; determinism, loss bounds, window monotonicity and evaluation symmetry all hold",
    );
}
