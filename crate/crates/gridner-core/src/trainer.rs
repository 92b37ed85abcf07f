//! Training loop: the task loss and the mined triplet loss are summed
//! per sentence, gradients flow through both cotangent entry points, and
//! AdamW updates the parameters. Early stopping tracks validation
//! micro-F1 and the best-epoch parameters are returned.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{collect_vocab, Dataset, Entity, Sentence};
use crate::eval::{evaluate, EvalError, SubsetReport};
use crate::grid::{class_ids_to_grid, decode, encode, DecodeConfig, GridError, TagGrid};
use crate::model::{
    backward, forward, init_params, task_loss_with_grad, ModelConfig, ModelError, Parameters,
    Vocab, SPECIAL_TOKENS,
};
use crate::triplet::{
    build_candidates, mine, select_source, triplet_loss_with_grad, CandidateSet, FeatureSource,
    MiningConfig, TripletError,
};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("dataset has no `{0}` split")]
    MissingSplit(String),
    #[error("train split is empty")]
    EmptyTrainSplit,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Triplet(#[from] TripletError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("non-finite loss at epoch {epoch}, batch {batch}: task {task}, triplet {triplet}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        task: f64,
        triplet: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub mining: MiningConfig,
    pub decode: DecodeConfig,
    pub weight_decay: f64,
    pub grad_clip_norm: Option<f64>,
    /// Worker threads for within-batch forward/backward; results are
    /// reduced in sentence order so every thread count is bit-identical.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 5e-4,
            max_epochs: 60,
            early_stop_patience: 10,
            batch_size: 12,
            seed: 42,
            mining: MiningConfig::default(),
            decode: DecodeConfig::default(),
            weight_decay: 1e-2,
            grad_clip_norm: None,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.learning_rate <= 0.0
            || self.max_epochs == 0
            || self.early_stop_patience == 0
            || self.batch_size == 0
        {
            return Err(TrainError::Model(ModelError::InvalidConfig(
                "learning_rate, max_epochs, early_stop_patience and batch_size must be positive"
                    .to_string(),
            )));
        }
        self.mining.validate()?;
        Ok(())
    }
}

/// One epoch of the history. `violation_rate` is the fraction of mined
/// triplets with a positive hinge, observed online during the epoch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_task_loss: f64,
    pub train_triplet_loss: f64,
    pub train_combined_loss: f64,
    pub val: SubsetReport,
    pub violation_rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Violation rate of the freshly initialized parameters on the train
    /// split, before any update.
    pub initial_violation_rate: f64,
    /// Violation rate of the returned (best-epoch) parameters.
    pub final_violation_rate: f64,
    pub best_epoch: usize,
    pub best_val_f1: f64,
}

pub struct TrainOutcome {
    pub params: Parameters,
    pub history: TrainHistory,
    pub model_cfg: ModelConfig,
    pub vocab: Vocab,
    pub labels: Vec<String>,
}

/// Adam moments plus the step counter.
pub struct AdamState {
    m: Parameters,
    v: Parameters,
    step: u64,
}

impl AdamState {
    pub fn new(cfg: &ModelConfig) -> Self {
        AdamState {
            m: Parameters::zeros_like(cfg),
            v: Parameters::zeros_like(cfg),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One AdamW update: bias-corrected adaptive moments plus decoupled
/// weight decay.
pub fn optimizer_step(
    params: &mut Parameters,
    grads: &Parameters,
    state: &mut AdamState,
    lr: f64,
    weight_decay: f64,
) -> Result<(), TrainError> {
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - ADAM_BETA1.powi(t);
    let bc2 = 1.0 - ADAM_BETA2.powi(t);

    let mut p_groups = params.groups_mut();
    let g_groups = grads.groups();
    let mut m_groups = state.m.groups_mut();
    let mut v_groups = state.v.groups_mut();
    for idx in 0..p_groups.len() {
        let (name, p) = &mut p_groups[idx];
        let (gname, g) = &g_groups[idx];
        if p.len() != g.len() {
            return Err(TrainError::Model(ModelError::ShapeMismatch(format!(
                "gradient group `{gname}` has {} values, parameters `{name}` have {}",
                g.len(),
                p.len()
            ))));
        }
        let m = &mut m_groups[idx].1;
        let v = &mut v_groups[idx].1;
        for i in 0..p.len() {
            let gi = g[i];
            m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * gi;
            v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * gi * gi;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS) + lr * weight_decay * p[i];
        }
    }
    Ok(())
}

struct SentencePass {
    task: f64,
    triplet: f64,
    triplets_total: usize,
    triplets_violating: usize,
    grads: Parameters,
}

fn sentence_pass(
    params: &Parameters,
    cfg: &ModelConfig,
    token_ids: &[usize],
    gold: &TagGrid,
    candidates: &[CandidateSet],
    mining: &MiningConfig,
) -> Result<SentencePass, TrainError> {
    let trace = forward(params, cfg, token_ids)?;
    let (task, mut d_y) = task_loss_with_grad(&trace, gold)?;

    let feats = select_source(&trace, mining.source);
    let triplets = mine(candidates, feats, mining)?;
    let (trip_loss, d_feat) = triplet_loss_with_grad(
        &triplets,
        mining.margin,
        feats.rows,
        feats.cols,
        feats.depth,
    )?;
    let violating = triplets
        .iter()
        .filter(|t| {
            let dp = crate::tensor::euclidean(&t.anchor.vec, &t.positive.vec);
            let dn = crate::tensor::euclidean(&t.anchor.vec, &t.negative.vec);
            dp - dn + mining.margin > 0.0
        })
        .count();

    let grads = match mining.source {
        FeatureSource::Logits => {
            for (a, b) in d_y.data.iter_mut().zip(d_feat.data.iter()) {
                *a += b;
            }
            backward(params, cfg, &trace, Some(&d_y), None)?
        }
        FeatureSource::HBi => backward(params, cfg, &trace, Some(&d_y), Some(&d_feat))?,
    };

    Ok(SentencePass {
        task,
        triplet: trip_loss,
        triplets_total: triplets.len(),
        triplets_violating: violating,
        grads,
    })
}

fn add_scaled(acc: &mut Parameters, other: &Parameters, scale: f64) {
    let mut a = acc.groups_mut();
    let b = other.groups();
    for idx in 0..a.len() {
        for (x, y) in a[idx].1.iter_mut().zip(b[idx].1.iter()) {
            *x += scale * y;
        }
    }
}

fn clip_gradients(grads: &mut Parameters, max_norm: f64) {
    let norm: f64 = grads
        .groups()
        .iter()
        .map(|(_, g)| g.iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for (_, g) in grads.groups_mut() {
            for v in g {
                *v *= scale;
            }
        }
    }
}

/// Argmax-decodes the model's predictions for a batch of sentences. A
/// sentence whose grid overflows the decode caps contributes no
/// predictions (logged); degenerate grids are expected early in
/// training.
pub fn predict_entities(
    params: &Parameters,
    cfg: &ModelConfig,
    vocab: &Vocab,
    labels: &[String],
    decode_cfg: &DecodeConfig,
    sentences: &[Sentence],
) -> Result<Vec<Vec<Entity>>, TrainError> {
    let mut out = Vec::with_capacity(sentences.len());
    for sentence in sentences {
        let token_ids = vocab.encode(&sentence.tokens)?;
        let trace = forward(params, cfg, &token_ids)?;
        let n = sentence.len();
        let mut ids = vec![vec![0usize; n]; n];
        for (i, row) in ids.iter_mut().enumerate() {
            for (j, slot) in row.iter_mut().enumerate() {
                let logits = trace.y.cell(i + SPECIAL_TOKENS, j + SPECIAL_TOKENS);
                let mut best = 0;
                for (c, &l) in logits.iter().enumerate().skip(1) {
                    if l > logits[best] {
                        best = c;
                    }
                }
                *slot = best;
            }
        }
        let grid = class_ids_to_grid(&ids, labels)?;
        match decode(&grid, decode_cfg) {
            Ok(entities) => out.push(entities),
            Err(GridError::DecodeOverflow { cap }) => {
                log::warn!("decode overflow (cap {cap}); emitting no entities for sentence");
                out.push(Vec::new());
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

/// Fraction of mined triplets violating the constraint over a split,
/// using the current parameters. No triplets means zero.
pub fn violation_rate(
    params: &Parameters,
    cfg: &ModelConfig,
    vocab: &Vocab,
    sentences: &[Sentence],
    mining: &MiningConfig,
) -> Result<f64, TrainError> {
    let mut total = 0usize;
    let mut violating = 0usize;
    for sentence in sentences {
        let candidates = build_candidates(sentence, mining.window, mining.unique_pairs);
        if candidates.is_empty() {
            continue;
        }
        let token_ids = vocab.encode(&sentence.tokens)?;
        let trace = forward(params, cfg, &token_ids)?;
        let feats = select_source(&trace, mining.source);
        let triplets = mine(&candidates, feats, mining)?;
        total += triplets.len();
        violating += triplets
            .iter()
            .filter(|t| {
                let dp = crate::tensor::euclidean(&t.anchor.vec, &t.positive.vec);
                let dn = crate::tensor::euclidean(&t.anchor.vec, &t.negative.vec);
                dp - dn + mining.margin > 0.0
            })
            .count();
    }
    Ok(if total == 0 {
        0.0
    } else {
        violating as f64 / total as f64
    })
}

/// Trains on the dataset's `train` split with early stopping on the
/// `dev` split micro-F1.
///
/// The vocabulary is built from both splits and `model_cfg.vocab_size` /
/// `classes` are derived from the data; the remaining dimensions and the
/// seed come from `model_cfg` unchanged.
pub fn train(
    dataset: &Dataset,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let train_split = dataset
        .split("train")
        .ok_or_else(|| TrainError::MissingSplit("train".to_string()))?;
    let dev_split = dataset
        .split("dev")
        .ok_or_else(|| TrainError::MissingSplit("dev".to_string()))?;
    if train_split.is_empty() {
        return Err(TrainError::EmptyTrainSplit);
    }

    let labels = dataset.label_set.clone();
    let mut all_tokens: Vec<Sentence> = train_split.to_vec();
    all_tokens.extend_from_slice(dev_split);
    let vocab = Vocab::from_tokens(collect_vocab(&all_tokens));
    let model_cfg = ModelConfig {
        vocab_size: vocab.size(),
        classes: 2 + labels.len(),
        ..model_cfg.clone()
    };
    let mut params = init_params(&model_cfg)?;
    let mut state = AdamState::new(&model_cfg);

    // precompute per-sentence inputs; candidate structure is independent
    // of feature values and stays fixed across epochs
    let mut token_ids = Vec::with_capacity(train_split.len());
    let mut golds = Vec::with_capacity(train_split.len());
    let mut candidates = Vec::with_capacity(train_split.len());
    for s in train_split {
        token_ids.push(vocab.encode(&s.tokens)?);
        golds.push(encode(s, &labels)?);
        candidates.push(build_candidates(
            s,
            cfg.mining.window,
            cfg.mining.unique_pairs,
        ));
    }
    let dev_golds: Vec<Vec<Entity>> = dev_split.iter().map(|s| s.entities.clone()).collect();

    let initial_violation_rate =
        violation_rate(&params, &model_cfg, &vocab, train_split, &cfg.mining)?;

    let pool = (cfg.threads > 1).then(|| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .expect("thread pool")
    });

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_split.len()).collect();
    let mut history = Vec::new();
    let mut best_f1 = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut best_params = params.clone();
    let mut strikes = 0usize;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut task_sum = 0.0;
        let mut trip_sum = 0.0;
        let mut trip_total = 0usize;
        let mut trip_violating = 0usize;

        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            let run = |i: usize| {
                sentence_pass(
                    &params,
                    &model_cfg,
                    &token_ids[i],
                    &golds[i],
                    &candidates[i],
                    &cfg.mining,
                )
            };
            let passes: Vec<Result<SentencePass, TrainError>> = match &pool {
                Some(pool) => pool.install(|| {
                    use rayon::prelude::*;
                    batch.par_iter().map(|&i| run(i)).collect()
                }),
                None => batch.iter().map(|&i| run(i)).collect(),
            };

            let mut grads = Parameters::zeros_like(&model_cfg);
            let scale = 1.0 / batch.len() as f64;
            for pass in passes {
                let pass = pass?;
                if !pass.task.is_finite() || !pass.triplet.is_finite() {
                    return Err(TrainError::NonFiniteLoss {
                        epoch,
                        batch: batch_idx,
                        task: pass.task,
                        triplet: pass.triplet,
                    });
                }
                task_sum += pass.task;
                trip_sum += pass.triplet;
                trip_total += pass.triplets_total;
                trip_violating += pass.triplets_violating;
                add_scaled(&mut grads, &pass.grads, scale);
            }
            if let Some(max_norm) = cfg.grad_clip_norm {
                clip_gradients(&mut grads, max_norm);
            }
            optimizer_step(
                &mut params,
                &grads,
                &mut state,
                cfg.learning_rate,
                cfg.weight_decay,
            )?;
            if !params.all_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                    task: f64::NAN,
                    triplet: f64::NAN,
                });
            }
        }

        let n = train_split.len() as f64;
        let predictions =
            predict_entities(&params, &model_cfg, &vocab, &labels, &cfg.decode, dev_split)?;
        let val = evaluate(&predictions, &dev_golds)?;
        let record = EpochRecord {
            epoch,
            train_task_loss: task_sum / n,
            train_triplet_loss: trip_sum / n,
            train_combined_loss: (task_sum + trip_sum) / n,
            val: val.clone(),
            violation_rate: if trip_total == 0 {
                0.0
            } else {
                trip_violating as f64 / trip_total as f64
            },
        };
        log::info!(
            "epoch {epoch}: task {:.4} triplet {:.4} dev-f1 {:.4}",
            record.train_task_loss,
            record.train_triplet_loss,
            val.overall.f1
        );
        history.push(record);

        if val.overall.f1 > best_f1 {
            best_f1 = val.overall.f1;
            best_epoch = epoch;
            best_params = params.clone();
            strikes = 0;
            // a perfect score cannot improve; skip the futile patience run
            if best_f1 >= 1.0 {
                break;
            }
        } else {
            strikes += 1;
            if strikes >= cfg.early_stop_patience {
                break;
            }
        }
    }

    let final_violation_rate =
        violation_rate(&best_params, &model_cfg, &vocab, train_split, &cfg.mining)?;

    Ok(TrainOutcome {
        params: best_params,
        history: TrainHistory {
            epochs: history,
            initial_violation_rate,
            final_violation_rate,
            best_epoch,
            best_val_f1: best_f1,
        },
        model_cfg,
        vocab,
        labels,
    })
}
