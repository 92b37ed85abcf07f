//! The trainable scoring network.
//!
//! A sentence of `n` token ids is prepended with the two special
//! positions (`[POS]` at 0, `[NEG]` at 1) and embedded, contextualized by
//! a bidirectional LSTM, then scored along two branches over the
//! `(n+2) x (n+2)` word-pair grid: a biaffine map producing `h_bi` and a
//! pointwise projection + 2-D convolution producing `h_co`. A linear
//! head on `h_bi` and a one-hidden-layer MLP head on `h_co` emit logits
//! that sum to the final grid `y`. All gradients are computed
//! analytically in `backward`; finite differences check them in the test
//! suite.

pub mod checkpoint;
pub mod lstm;

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{grid_to_class_ids, TagGrid};
use crate::tensor::{axpy, dot, Grid3, Mat};

use lstm::{LstmTrace, LstmWeights};

/// Grid row/column indices of the two special positions.
pub const POS_INDEX: usize = 0;
pub const NEG_INDEX: usize = 1;
/// Offset real token `t` by this to get its augmented grid position.
pub const SPECIAL_TOKENS: usize = 2;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("token id {id} out of range for vocabulary of {vocab}")]
    UnknownTokenId { id: usize, vocab: usize },
    #[error("token `{0}` not in vocabulary")]
    UnknownToken(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

/// Dimensions and seed of the network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub d_embed: usize,
    /// Per-direction LSTM width; the context vector is twice this.
    pub d_context: usize,
    pub d_bi: usize,
    pub d_co: usize,
    /// Tag class count: 2 + number of entity types.
    pub classes: usize,
    /// Odd spatial size of the grid convolution.
    pub conv_kernel: usize,
    pub seed: u64,
}

impl ModelConfig {
    /// Desk-scale defaults; `vocab_size` and `classes` must still be set.
    pub fn with_dims(vocab_size: usize, classes: usize, seed: u64) -> Self {
        ModelConfig {
            vocab_size,
            d_embed: 64,
            d_context: 64,
            d_bi: 128,
            d_co: 64,
            classes,
            conv_kernel: 3,
            seed,
        }
    }

    pub fn context_dim(&self) -> usize {
        2 * self.d_context
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("vocab_size", self.vocab_size),
            ("d_embed", self.d_embed),
            ("d_context", self.d_context),
            ("d_bi", self.d_bi),
            ("d_co", self.d_co),
            ("conv_kernel", self.conv_kernel),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(ModelError::InvalidConfig(format!(
                    "{name} must be positive"
                )));
            }
        }
        if self.conv_kernel.is_multiple_of(2) {
            return Err(ModelError::InvalidConfig(
                "conv_kernel must be odd".to_string(),
            ));
        }
        if self.classes < 3 {
            return Err(ModelError::InvalidConfig(
                "classes must be at least 3 (none, nnw, one entity type)".to_string(),
            ));
        }
        Ok(())
    }
}

/// Token/id mapping. Ids are dense positions into the embedding table;
/// the two special rows live past `size()`.
#[derive(Debug, Clone)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocab { tokens, index }
    }

    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode(&self, tokens: &[String]) -> Result<Vec<usize>, ModelError> {
        tokens
            .iter()
            .map(|t| {
                self.index
                    .get(t)
                    .copied()
                    .ok_or_else(|| ModelError::UnknownToken(t.clone()))
            })
            .collect()
    }
}

/// All trainable arrays. The same struct doubles as a gradient /
/// optimizer-moment container via [`Parameters::zeros_like`].
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    /// (vocab_size + 2) x d_embed; rows vocab_size and vocab_size + 1 are
    /// the `[POS]` / `[NEG]` embeddings.
    pub embedding: Mat,
    pub lstm_fwd: LstmWeights,
    pub lstm_bwd: LstmWeights,
    /// d_bi x D x D bilinear tensor, flattened `[k][r][c]`.
    pub biaffine_u: Vec<f64>,
    /// d_bi x D linear term on the row (head-side) vector.
    pub biaffine_w_left: Mat,
    /// d_bi x D linear term on the column (tail-side) vector.
    pub biaffine_w_right: Mat,
    pub biaffine_bias: Vec<f64>,
    /// d_co x 2D pointwise projection feeding the convolution.
    pub pair_mlp_w: Mat,
    pub pair_mlp_b: Vec<f64>,
    /// d_co x k x k x d_co kernel, flattened `[out][di][dj][in]`.
    pub conv_kernel: Vec<f64>,
    pub conv_bias: Vec<f64>,
    /// c x d_bi linear head.
    pub bi_head_w: Mat,
    pub bi_head_b: Vec<f64>,
    /// d_co x d_co hidden layer of the MLP head.
    pub co_head_w1: Mat,
    pub co_head_b1: Vec<f64>,
    /// c x d_co output layer of the MLP head.
    pub co_head_w2: Mat,
    pub co_head_b2: Vec<f64>,
}

impl Parameters {
    pub fn zeros_like(cfg: &ModelConfig) -> Self {
        let d = cfg.context_dim();
        Parameters {
            embedding: Mat::zeros(cfg.vocab_size + SPECIAL_TOKENS, cfg.d_embed),
            lstm_fwd: LstmWeights::zeros(cfg.d_embed, cfg.d_context),
            lstm_bwd: LstmWeights::zeros(cfg.d_embed, cfg.d_context),
            biaffine_u: vec![0.0; cfg.d_bi * d * d],
            biaffine_w_left: Mat::zeros(cfg.d_bi, d),
            biaffine_w_right: Mat::zeros(cfg.d_bi, d),
            biaffine_bias: vec![0.0; cfg.d_bi],
            pair_mlp_w: Mat::zeros(cfg.d_co, 2 * d),
            pair_mlp_b: vec![0.0; cfg.d_co],
            conv_kernel: vec![0.0; cfg.d_co * cfg.conv_kernel * cfg.conv_kernel * cfg.d_co],
            conv_bias: vec![0.0; cfg.d_co],
            bi_head_w: Mat::zeros(cfg.classes, cfg.d_bi),
            bi_head_b: vec![0.0; cfg.classes],
            co_head_w1: Mat::zeros(cfg.d_co, cfg.d_co),
            co_head_b1: vec![0.0; cfg.d_co],
            co_head_w2: Mat::zeros(cfg.classes, cfg.d_co),
            co_head_b2: vec![0.0; cfg.classes],
        }
    }

    /// Named parameter groups in declared (checkpoint) order.
    pub fn groups(&self) -> Vec<(&'static str, &[f64])> {
        vec![
            ("embedding", &self.embedding.data),
            ("lstm_fwd_w_ih", &self.lstm_fwd.w_ih.data),
            ("lstm_fwd_w_hh", &self.lstm_fwd.w_hh.data),
            ("lstm_fwd_bias", &self.lstm_fwd.bias),
            ("lstm_bwd_w_ih", &self.lstm_bwd.w_ih.data),
            ("lstm_bwd_w_hh", &self.lstm_bwd.w_hh.data),
            ("lstm_bwd_bias", &self.lstm_bwd.bias),
            ("biaffine_u", &self.biaffine_u),
            ("biaffine_w_left", &self.biaffine_w_left.data),
            ("biaffine_w_right", &self.biaffine_w_right.data),
            ("biaffine_bias", &self.biaffine_bias),
            ("pair_mlp_w", &self.pair_mlp_w.data),
            ("pair_mlp_b", &self.pair_mlp_b),
            ("conv_kernel", &self.conv_kernel),
            ("conv_bias", &self.conv_bias),
            ("bi_head_w", &self.bi_head_w.data),
            ("bi_head_b", &self.bi_head_b),
            ("co_head_w1", &self.co_head_w1.data),
            ("co_head_b1", &self.co_head_b1),
            ("co_head_w2", &self.co_head_w2.data),
            ("co_head_b2", &self.co_head_b2),
        ]
    }

    pub fn groups_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![
            ("embedding", &mut self.embedding.data),
            ("lstm_fwd_w_ih", &mut self.lstm_fwd.w_ih.data),
            ("lstm_fwd_w_hh", &mut self.lstm_fwd.w_hh.data),
            ("lstm_fwd_bias", &mut self.lstm_fwd.bias),
            ("lstm_bwd_w_ih", &mut self.lstm_bwd.w_ih.data),
            ("lstm_bwd_w_hh", &mut self.lstm_bwd.w_hh.data),
            ("lstm_bwd_bias", &mut self.lstm_bwd.bias),
            ("biaffine_u", &mut self.biaffine_u),
            ("biaffine_w_left", &mut self.biaffine_w_left.data),
            ("biaffine_w_right", &mut self.biaffine_w_right.data),
            ("biaffine_bias", &mut self.biaffine_bias),
            ("pair_mlp_w", &mut self.pair_mlp_w.data),
            ("pair_mlp_b", &mut self.pair_mlp_b),
            ("conv_kernel", &mut self.conv_kernel),
            ("conv_bias", &mut self.conv_bias),
            ("bi_head_w", &mut self.bi_head_w.data),
            ("bi_head_b", &mut self.bi_head_b),
            ("co_head_w1", &mut self.co_head_w1.data),
            ("co_head_b1", &mut self.co_head_b1),
            ("co_head_w2", &mut self.co_head_w2.data),
            ("co_head_b2", &mut self.co_head_b2),
        ]
    }

    /// True when every value is finite.
    pub fn all_finite(&self) -> bool {
        self.groups()
            .iter()
            .all(|(_, g)| g.iter().all(|v| v.is_finite()))
    }
}

/// Draws every weight group uniformly from `[-1/sqrt(fan_in),
/// 1/sqrt(fan_in)]`; biases start at zero. Deterministic in `cfg.seed`.
pub fn init_params(cfg: &ModelConfig) -> Result<Parameters, ModelError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = Parameters::zeros_like(cfg);
    let d = cfg.context_dim();

    let mut fill = |slice: &mut [f64], fan_in: usize| {
        let bound = 1.0 / (fan_in as f64).sqrt();
        for v in slice.iter_mut() {
            *v = rng.random_range(-bound..=bound);
        }
    };

    fill(&mut params.embedding.data, cfg.d_embed);
    fill(&mut params.lstm_fwd.w_ih.data, cfg.d_embed);
    fill(&mut params.lstm_fwd.w_hh.data, cfg.d_context);
    fill(&mut params.lstm_bwd.w_ih.data, cfg.d_embed);
    fill(&mut params.lstm_bwd.w_hh.data, cfg.d_context);
    fill(&mut params.biaffine_u, d);
    fill(&mut params.biaffine_w_left.data, d);
    fill(&mut params.biaffine_w_right.data, d);
    fill(&mut params.pair_mlp_w.data, 2 * d);
    fill(
        &mut params.conv_kernel,
        cfg.d_co * cfg.conv_kernel * cfg.conv_kernel,
    );
    fill(&mut params.bi_head_w.data, cfg.d_bi);
    fill(&mut params.co_head_w1.data, cfg.d_co);
    fill(&mut params.co_head_w2.data, cfg.d_co);
    Ok(params)
}

/// Every intermediate tensor of one sentence pass, kept for backward.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Real token count (grid side is `n + 2`).
    pub n: usize,
    /// Augmented embedding-row ids, `[POS]`, `[NEG]`, then tokens.
    pub row_ids: Vec<usize>,
    pub h_em: Mat,
    pub lstm_fwd: LstmTrace,
    pub lstm_bwd: LstmTrace,
    pub h_ctx: Mat,
    /// Bilinear right products `z[j][k] = U_k h_ctx[j]`, stored (j, k, :).
    pub biaffine_rhs: Grid3,
    pub h_bi: Grid3,
    /// Post-tanh pointwise projection feeding the convolution.
    pub pair_act: Grid3,
    pub h_co: Grid3,
    /// Post-tanh hidden layer of the MLP head.
    pub co_hidden: Grid3,
    pub y_bi: Grid3,
    pub y_co: Grid3,
    pub y: Grid3,
}

impl ForwardTrace {
    pub fn grid_side(&self) -> usize {
        self.n + SPECIAL_TOKENS
    }
}

/// Runs the network over one sentence of token ids (`[POS]`/`[NEG]` are
/// prepended internally).
pub fn forward(
    params: &Parameters,
    cfg: &ModelConfig,
    token_ids: &[usize],
) -> Result<ForwardTrace, ModelError> {
    for &id in token_ids {
        if id >= cfg.vocab_size {
            return Err(ModelError::UnknownTokenId {
                id,
                vocab: cfg.vocab_size,
            });
        }
    }
    let n = token_ids.len();
    let t_len = n + SPECIAL_TOKENS;
    let d = cfg.context_dim();
    let k = cfg.conv_kernel;
    let radius = k / 2;

    let mut row_ids = Vec::with_capacity(t_len);
    row_ids.push(cfg.vocab_size); // [POS]
    row_ids.push(cfg.vocab_size + 1); // [NEG]
    row_ids.extend_from_slice(token_ids);

    let mut h_em = Mat::zeros(t_len, cfg.d_embed);
    for (t, &row) in row_ids.iter().enumerate() {
        h_em.row_mut(t).copy_from_slice(params.embedding.row(row));
    }

    let lstm_fwd = lstm::run(&params.lstm_fwd, &h_em, false);
    let lstm_bwd = lstm::run(&params.lstm_bwd, &h_em, true);
    let mut h_ctx = Mat::zeros(t_len, d);
    for t in 0..t_len {
        h_ctx.row_mut(t)[..cfg.d_context].copy_from_slice(lstm_fwd.hidden.row(t));
        h_ctx.row_mut(t)[cfg.d_context..].copy_from_slice(lstm_bwd.hidden.row(t));
    }

    // biaffine branch
    let mut biaffine_rhs = Grid3::zeros(t_len, cfg.d_bi, d);
    for j in 0..t_len {
        let y_j = h_ctx.row(j);
        for kk in 0..cfg.d_bi {
            let u_k = &params.biaffine_u[kk * d * d..(kk + 1) * d * d];
            let z = biaffine_rhs.cell_mut(j, kk);
            for r in 0..d {
                z[r] = dot(&u_k[r * d..(r + 1) * d], y_j);
            }
        }
    }
    let mut left = Mat::zeros(t_len, cfg.d_bi);
    let mut right = Mat::zeros(t_len, cfg.d_bi);
    for t in 0..t_len {
        params
            .biaffine_w_left
            .mat_vec_add(h_ctx.row(t), left.row_mut(t));
        params
            .biaffine_w_right
            .mat_vec_add(h_ctx.row(t), right.row_mut(t));
    }
    let mut h_bi = Grid3::zeros(t_len, t_len, cfg.d_bi);
    for i in 0..t_len {
        let x_i = h_ctx.row(i);
        for j in 0..t_len {
            let cell = h_bi.cell_mut(i, j);
            for kk in 0..cfg.d_bi {
                cell[kk] = dot(x_i, biaffine_rhs.cell(j, kk))
                    + left.get(i, kk)
                    + right.get(j, kk)
                    + params.biaffine_bias[kk];
            }
        }
    }

    // convolution branch
    let mut pair_act = Grid3::zeros(t_len, t_len, cfg.d_co);
    let mut pair_in = vec![0.0; 2 * d];
    for i in 0..t_len {
        pair_in[..d].copy_from_slice(h_ctx.row(i));
        for j in 0..t_len {
            pair_in[d..].copy_from_slice(h_ctx.row(j));
            let cell = pair_act.cell_mut(i, j);
            cell.copy_from_slice(&params.pair_mlp_b);
            params.pair_mlp_w.mat_vec_add(&pair_in, cell);
            for v in cell.iter_mut() {
                *v = v.tanh();
            }
        }
    }
    let mut h_co = Grid3::zeros(t_len, t_len, cfg.d_co);
    for i in 0..t_len {
        for j in 0..t_len {
            let out = h_co.cell_mut(i, j);
            out.copy_from_slice(&params.conv_bias);
            for di in 0..k {
                let ii = i + di;
                if ii < radius || ii - radius >= t_len {
                    continue;
                }
                for dj in 0..k {
                    let jj = j + dj;
                    if jj < radius || jj - radius >= t_len {
                        continue;
                    }
                    let src = pair_act.cell(ii - radius, jj - radius);
                    for o in 0..cfg.d_co {
                        let base = ((o * k + di) * k + dj) * cfg.d_co;
                        out[o] += dot(&params.conv_kernel[base..base + cfg.d_co], src);
                    }
                }
            }
        }
    }

    // co-predictor heads
    let mut co_hidden = Grid3::zeros(t_len, t_len, cfg.d_co);
    let mut y_bi = Grid3::zeros(t_len, t_len, cfg.classes);
    let mut y_co = Grid3::zeros(t_len, t_len, cfg.classes);
    let mut y = Grid3::zeros(t_len, t_len, cfg.classes);
    for i in 0..t_len {
        for j in 0..t_len {
            let hid = co_hidden.cell_mut(i, j);
            hid.copy_from_slice(&params.co_head_b1);
            params.co_head_w1.mat_vec_add(h_co.cell(i, j), hid);
            for v in hid.iter_mut() {
                *v = v.tanh();
            }

            let yb = y_bi.cell_mut(i, j);
            yb.copy_from_slice(&params.bi_head_b);
            params.bi_head_w.mat_vec_add(h_bi.cell(i, j), yb);

            let yc = y_co.cell_mut(i, j);
            yc.copy_from_slice(&params.co_head_b2);
            params.co_head_w2.mat_vec_add(co_hidden.cell(i, j), yc);

            let yy = y.cell_mut(i, j);
            for c in 0..cfg.classes {
                yy[c] = y_bi.cell(i, j)[c] + y_co.cell(i, j)[c];
            }
        }
    }

    Ok(ForwardTrace {
        n,
        row_ids,
        h_em,
        lstm_fwd,
        lstm_bwd,
        h_ctx,
        biaffine_rhs,
        h_bi,
        pair_act,
        h_co,
        co_hidden,
        y_bi,
        y_co,
        y,
    })
}

/// Mean categorical cross-entropy over the `n x n` real-token sub-grid
/// (special rows/columns excluded).
pub fn task_loss(trace: &ForwardTrace, gold: &TagGrid) -> Result<f64, ModelError> {
    Ok(task_loss_impl(trace, gold, None)?.0)
}

/// As [`task_loss`] but also returns the cotangent on the full augmented
/// `y` grid (zero at special cells).
pub fn task_loss_with_grad(
    trace: &ForwardTrace,
    gold: &TagGrid,
) -> Result<(f64, Grid3), ModelError> {
    let t_len = trace.grid_side();
    let classes = trace.y.depth;
    let mut grad = Grid3::zeros(t_len, t_len, classes);
    let (loss, _) = task_loss_impl(trace, gold, Some(&mut grad))?;
    Ok((loss, grad))
}

fn task_loss_impl(
    trace: &ForwardTrace,
    gold: &TagGrid,
    mut grad: Option<&mut Grid3>,
) -> Result<(f64, ()), ModelError> {
    if gold.n() != trace.n {
        return Err(ModelError::ShapeMismatch(format!(
            "gold grid is {} x {}, trace covers {} tokens",
            gold.n(),
            gold.n(),
            trace.n
        )));
    }
    let classes = trace.y.depth;
    if gold.class_count() != classes {
        return Err(ModelError::ShapeMismatch(format!(
            "gold grid has {} classes, logits have {}",
            gold.class_count(),
            classes
        )));
    }
    let ids = grid_to_class_ids(gold).map_err(|e| ModelError::ShapeMismatch(e.to_string()))?;
    let n = trace.n;
    if n == 0 {
        return Ok((0.0, ()));
    }
    let cells = (n * n) as f64;
    let mut total = 0.0;
    let mut probs = vec![0.0; classes];
    for i in 0..n {
        for j in 0..n {
            let logits = trace.y.cell(i + SPECIAL_TOKENS, j + SPECIAL_TOKENS);
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (p, &l) in probs.iter_mut().zip(logits.iter()) {
                *p = (l - max).exp();
                sum += *p;
            }
            let target = ids[i][j];
            total += sum.ln() + max - logits[target];
            if let Some(g) = grad.as_deref_mut() {
                let cell = g.cell_mut(i + SPECIAL_TOKENS, j + SPECIAL_TOKENS);
                for (c, p) in probs.iter().enumerate() {
                    cell[c] = (p / sum - if c == target { 1.0 } else { 0.0 }) / cells;
                }
            }
        }
    }
    Ok((total / cells, ()))
}

/// Gradients of a scalar loss w.r.t. all parameters given cotangents on
/// the final logits and/or on the biaffine grid (either source may be
/// absent). Exact analytic differentiation of the forward pass.
pub fn backward(
    params: &Parameters,
    cfg: &ModelConfig,
    trace: &ForwardTrace,
    d_y: Option<&Grid3>,
    d_h_bi: Option<&Grid3>,
) -> Result<Parameters, ModelError> {
    let t_len = trace.grid_side();
    let d = cfg.context_dim();
    let k = cfg.conv_kernel;
    let radius = k / 2;
    for (name, g) in [("y", d_y), ("h_bi", d_h_bi)] {
        if let Some(g) = g {
            if !g.same_shape(match name {
                "y" => &trace.y,
                _ => &trace.h_bi,
            }) {
                return Err(ModelError::ShapeMismatch(format!(
                    "cotangent on {name} has wrong shape"
                )));
            }
        }
    }

    let mut grads = Parameters::zeros_like(cfg);
    let mut d_h_ctx = Mat::zeros(t_len, d);
    let mut d_h_bi_total = match d_h_bi {
        Some(g) => g.clone(),
        None => Grid3::zeros(t_len, t_len, cfg.d_bi),
    };

    if let Some(d_y) = d_y {
        // y = y_bi + y_co: the cotangent flows unchanged into both heads
        let mut d_h_co = Grid3::zeros(t_len, t_len, cfg.d_co);
        let mut d_pre1 = vec![0.0; cfg.d_co];
        for i in 0..t_len {
            for j in 0..t_len {
                let dy = d_y.cell(i, j);
                if dy.iter().all(|&v| v == 0.0) {
                    continue;
                }
                // linear head on h_bi
                axpy(1.0, dy, &mut grads.bi_head_b);
                grads.bi_head_w.rank_one_add(1.0, dy, trace.h_bi.cell(i, j));
                params
                    .bi_head_w
                    .mat_t_vec_add(dy, d_h_bi_total.cell_mut(i, j));

                // MLP head on h_co
                axpy(1.0, dy, &mut grads.co_head_b2);
                let hid = trace.co_hidden.cell(i, j);
                grads.co_head_w2.rank_one_add(1.0, dy, hid);
                d_pre1.fill(0.0);
                params.co_head_w2.mat_t_vec_add(dy, &mut d_pre1);
                for (u, v) in d_pre1.iter_mut().zip(hid.iter()) {
                    *u *= 1.0 - v * v;
                }
                axpy(1.0, &d_pre1, &mut grads.co_head_b1);
                grads
                    .co_head_w1
                    .rank_one_add(1.0, &d_pre1, trace.h_co.cell(i, j));
                params
                    .co_head_w1
                    .mat_t_vec_add(&d_pre1, d_h_co.cell_mut(i, j));
            }
        }

        // convolution backward
        let mut d_pair_act = Grid3::zeros(t_len, t_len, cfg.d_co);
        for i in 0..t_len {
            for j in 0..t_len {
                let dout = d_h_co.cell(i, j);
                if dout.iter().all(|&v| v == 0.0) {
                    continue;
                }
                axpy(1.0, dout, &mut grads.conv_bias);
                for di in 0..k {
                    let ii = i + di;
                    if ii < radius || ii - radius >= t_len {
                        continue;
                    }
                    for dj in 0..k {
                        let jj = j + dj;
                        if jj < radius || jj - radius >= t_len {
                            continue;
                        }
                        let src = trace.pair_act.cell(ii - radius, jj - radius);
                        let dsrc = d_pair_act.cell_mut(ii - radius, jj - radius);
                        for (o, &go) in dout.iter().enumerate() {
                            if go == 0.0 {
                                continue;
                            }
                            let base = ((o * k + di) * k + dj) * cfg.d_co;
                            axpy(go, &params.conv_kernel[base..base + cfg.d_co], dsrc);
                            axpy(go, src, &mut grads.conv_kernel[base..base + cfg.d_co]);
                        }
                    }
                }
            }
        }

        // pointwise projection backward
        let mut pair_in = vec![0.0; 2 * d];
        let mut d_pre = vec![0.0; cfg.d_co];
        let mut d_pair_in = vec![0.0; 2 * d];
        for i in 0..t_len {
            pair_in[..d].copy_from_slice(trace.h_ctx.row(i));
            for j in 0..t_len {
                let dact = d_pair_act.cell(i, j);
                if dact.iter().all(|&v| v == 0.0) {
                    continue;
                }
                pair_in[d..].copy_from_slice(trace.h_ctx.row(j));
                let act = trace.pair_act.cell(i, j);
                for (u, (&da, &a)) in d_pre.iter_mut().zip(dact.iter().zip(act.iter())) {
                    *u = da * (1.0 - a * a);
                }
                axpy(1.0, &d_pre, &mut grads.pair_mlp_b);
                grads.pair_mlp_w.rank_one_add(1.0, &d_pre, &pair_in);
                d_pair_in.fill(0.0);
                params.pair_mlp_w.mat_t_vec_add(&d_pre, &mut d_pair_in);
                axpy(1.0, &d_pair_in[..d], d_h_ctx.row_mut(i));
                axpy(1.0, &d_pair_in[d..], d_h_ctx.row_mut(j));
            }
        }
    }

    // biaffine backward over the combined cotangent
    let any_bi = d_h_bi_total.data.iter().any(|&v| v != 0.0);
    if any_bi {
        // m[j][k] = sum_i G[i][j][k] * x_i ; s[j][k] = sum_i G[i][j][k]
        let mut m = Grid3::zeros(t_len, cfg.d_bi, d);
        let mut s = Mat::zeros(t_len, cfg.d_bi);
        for i in 0..t_len {
            let x_i = trace.h_ctx.row(i);
            for j in 0..t_len {
                let g = d_h_bi_total.cell(i, j);
                for (kk, &gk) in g.iter().enumerate() {
                    if gk != 0.0 {
                        axpy(gk, x_i, m.cell_mut(j, kk));
                        s.row_mut(j)[kk] += gk;
                        // dx_i: bilinear part uses cached z, linear part w_left
                        axpy(gk, trace.biaffine_rhs.cell(j, kk), d_h_ctx.row_mut(i));
                        axpy(gk, params.biaffine_w_left.row(kk), d_h_ctx.row_mut(i));
                        axpy(gk, x_i, grads.biaffine_w_left.row_mut(kk));
                        grads.biaffine_bias[kk] += gk;
                    }
                }
            }
        }
        for j in 0..t_len {
            let y_j = trace.h_ctx.row(j);
            for kk in 0..cfg.d_bi {
                let m_jk = m.cell(j, kk);
                if m_jk.iter().all(|&v| v == 0.0) && s.get(j, kk) == 0.0 {
                    continue;
                }
                // dU_k += m_jk (outer) y_j ; dy_j += U_k^T m_jk
                let u_k = &params.biaffine_u[kk * d * d..(kk + 1) * d * d];
                let gu_k = &mut grads.biaffine_u[kk * d * d..(kk + 1) * d * d];
                let dy = d_h_ctx.row_mut(j);
                for r in 0..d {
                    let mr = m_jk[r];
                    if mr != 0.0 {
                        axpy(mr, y_j, &mut gu_k[r * d..(r + 1) * d]);
                        axpy(mr, &u_k[r * d..(r + 1) * d], dy);
                    }
                }
                let sj = s.get(j, kk);
                if sj != 0.0 {
                    axpy(sj, y_j, grads.biaffine_w_right.row_mut(kk));
                    axpy(sj, params.biaffine_w_right.row(kk), d_h_ctx.row_mut(j));
                }
            }
        }
    }

    // contextualizer and embeddings
    let mut d_h_em = Mat::zeros(t_len, cfg.d_embed);
    let mut d_fwd = Mat::zeros(t_len, cfg.d_context);
    let mut d_bwd = Mat::zeros(t_len, cfg.d_context);
    for t in 0..t_len {
        d_fwd
            .row_mut(t)
            .copy_from_slice(&d_h_ctx.row(t)[..cfg.d_context]);
        d_bwd
            .row_mut(t)
            .copy_from_slice(&d_h_ctx.row(t)[cfg.d_context..]);
    }
    lstm::backprop(
        &params.lstm_fwd,
        &trace.lstm_fwd,
        &trace.h_em,
        &d_fwd,
        &mut d_h_em,
        &mut grads.lstm_fwd,
    );
    lstm::backprop(
        &params.lstm_bwd,
        &trace.lstm_bwd,
        &trace.h_em,
        &d_bwd,
        &mut d_h_em,
        &mut grads.lstm_bwd,
    );
    for (t, &row) in trace.row_ids.iter().enumerate() {
        axpy(1.0, d_h_em.row(t), grads.embedding.row_mut(row));
    }

    Ok(grads)
}
