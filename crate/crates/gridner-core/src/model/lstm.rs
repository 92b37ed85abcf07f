//! Single-direction LSTM with cached activations and exact backprop.
//! Gate layout inside the stacked `4h` vectors is `[input, forget,
//! candidate, output]`.

use crate::tensor::Mat;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmWeights {
    /// 4h x d input projection.
    pub w_ih: Mat,
    /// 4h x h recurrent projection.
    pub w_hh: Mat,
    /// 4h bias.
    pub bias: Vec<f64>,
}

impl LstmWeights {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        LstmWeights {
            w_ih: Mat::zeros(4 * hidden_dim, input_dim),
            w_hh: Mat::zeros(4 * hidden_dim, hidden_dim),
            bias: vec![0.0; 4 * hidden_dim],
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.bias.len() / 4
    }
}

/// Per-position activations, indexed by sequence position regardless of
/// run direction.
#[derive(Debug, Clone)]
pub struct LstmTrace {
    pub gate_i: Mat,
    pub gate_f: Mat,
    pub gate_g: Mat,
    pub gate_o: Mat,
    pub cell: Mat,
    pub cell_tanh: Mat,
    pub hidden: Mat,
    pub reverse: bool,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Runs the LSTM over `inputs` (seq_len x d). With `reverse` the
/// recurrence consumes the sequence back to front; traces stay indexed by
/// sequence position.
pub fn run(weights: &LstmWeights, inputs: &Mat, reverse: bool) -> LstmTrace {
    let seq_len = inputs.rows;
    let h = weights.hidden_dim();
    let mut trace = LstmTrace {
        gate_i: Mat::zeros(seq_len, h),
        gate_f: Mat::zeros(seq_len, h),
        gate_g: Mat::zeros(seq_len, h),
        gate_o: Mat::zeros(seq_len, h),
        cell: Mat::zeros(seq_len, h),
        cell_tanh: Mat::zeros(seq_len, h),
        hidden: Mat::zeros(seq_len, h),
        reverse,
    };

    let mut h_prev = vec![0.0; h];
    let mut c_prev = vec![0.0; h];
    let mut pre = vec![0.0; 4 * h];

    for step in 0..seq_len {
        let t = if reverse { seq_len - 1 - step } else { step };
        pre.copy_from_slice(&weights.bias);
        weights.w_ih.mat_vec_add(inputs.row(t), &mut pre);
        weights.w_hh.mat_vec_add(&h_prev, &mut pre);

        for u in 0..h {
            let i = sigmoid(pre[u]);
            let f = sigmoid(pre[h + u]);
            let g = pre[2 * h + u].tanh();
            let o = sigmoid(pre[3 * h + u]);
            let c = f * c_prev[u] + i * g;
            let ct = c.tanh();
            trace.gate_i.set(t, u, i);
            trace.gate_f.set(t, u, f);
            trace.gate_g.set(t, u, g);
            trace.gate_o.set(t, u, o);
            trace.cell.set(t, u, c);
            trace.cell_tanh.set(t, u, ct);
            trace.hidden.set(t, u, o * ct);
        }
        h_prev.copy_from_slice(trace.hidden.row(t));
        c_prev.copy_from_slice(trace.cell.row(t));
    }
    trace
}

/// Backpropagates `d_hidden` (seq_len x h, sequence-position indexed)
/// through the cached run, accumulating into `d_inputs` and `grads`.
pub fn backprop(
    weights: &LstmWeights,
    trace: &LstmTrace,
    inputs: &Mat,
    d_hidden: &Mat,
    d_inputs: &mut Mat,
    grads: &mut LstmWeights,
) {
    let seq_len = inputs.rows;
    let h = weights.hidden_dim();
    let mut dh_carry = vec![0.0; h];
    let mut dc_carry = vec![0.0; h];
    let mut dpre = vec![0.0; 4 * h];
    let zeros = vec![0.0; h];

    // walk time in reverse: last consumed position first
    for step in (0..seq_len).rev() {
        let t = if trace.reverse {
            seq_len - 1 - step
        } else {
            step
        };
        let prev_t = if step == 0 {
            None
        } else if trace.reverse {
            Some(seq_len - step)
        } else {
            Some(step - 1)
        };
        let h_prev = prev_t.map_or(zeros.as_slice(), |p| trace.hidden.row(p));
        let c_prev = prev_t.map_or(zeros.as_slice(), |p| trace.cell.row(p));

        for u in 0..h {
            let dh = d_hidden.get(t, u) + dh_carry[u];
            let i = trace.gate_i.get(t, u);
            let f = trace.gate_f.get(t, u);
            let g = trace.gate_g.get(t, u);
            let o = trace.gate_o.get(t, u);
            let ct = trace.cell_tanh.get(t, u);

            let d_o = dh * ct;
            let dc = dc_carry[u] + dh * o * (1.0 - ct * ct);
            let d_i = dc * g;
            let d_g = dc * i;
            let d_f = dc * c_prev[u];
            dc_carry[u] = dc * f;

            dpre[u] = d_i * i * (1.0 - i);
            dpre[h + u] = d_f * f * (1.0 - f);
            dpre[2 * h + u] = d_g * (1.0 - g * g);
            dpre[3 * h + u] = d_o * o * (1.0 - o);
        }

        grads.w_ih.rank_one_add(1.0, &dpre, inputs.row(t));
        grads.w_hh.rank_one_add(1.0, &dpre, h_prev);
        for (b, d) in grads.bias.iter_mut().zip(dpre.iter()) {
            *b += d;
        }
        weights.w_ih.mat_t_vec_add(&dpre, d_inputs.row_mut(t));
        dh_carry.fill(0.0);
        weights.w_hh.mat_t_vec_add(&dpre, &mut dh_carry);
    }
}
