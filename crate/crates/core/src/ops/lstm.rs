//! Single LSTM cell with the standard four-gate formulation.
//!
//! Gate order in the stacked parameter matrices is input, forget, candidate,
//! output. The forward pass caches everything the backward needs.

use alloc::vec::Vec;

use rand::Rng;

use super::OpError;
use crate::mathfn;
use crate::tensor::Tensor;

/// Stacked gate parameters: `w_input` is `[4H × D]`, `w_hidden` is
/// `[4H × H]`, `bias` is `[4H]`.
#[derive(Clone, Debug)]
pub struct LstmParams {
    pub w_input: Tensor,
    pub w_hidden: Tensor,
    pub bias: Tensor,
}

impl LstmParams {
    /// Uniform ±0.1 weights, zero biases except the forget-gate block, which
    /// starts at 1.0 to keep early cell states stable.
    pub fn init<R: Rng>(input_size: usize, hidden_size: usize, rng: &mut R) -> Self {
        let mut w_input = Tensor::zeros(alloc::vec![4 * hidden_size, input_size]);
        for v in w_input.data_mut() {
            *v = rng.gen_range(-0.1..0.1);
        }
        let mut w_hidden = Tensor::zeros(alloc::vec![4 * hidden_size, hidden_size]);
        for v in w_hidden.data_mut() {
            *v = rng.gen_range(-0.1..0.1);
        }
        let mut bias = Tensor::zeros(alloc::vec![4 * hidden_size]);
        for h in 0..hidden_size {
            bias.data_mut()[hidden_size + h] = 1.0;
        }
        Self {
            w_input,
            w_hidden,
            bias,
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.w_hidden.dim(1)
    }

    pub fn input_size(&self) -> usize {
        self.w_input.dim(1)
    }
}

/// Values cached by [`lstm_cell_forward`] for the backward pass.
#[derive(Clone, Debug)]
pub struct LstmCache {
    input: Tensor,
    h_prev: Tensor,
    c_prev: Tensor,
    gate_i: Vec<f64>,
    gate_f: Vec<f64>,
    gate_g: Vec<f64>,
    gate_o: Vec<f64>,
    cell_tanh: Vec<f64>,
}

/// One cell step: new hidden and cell state plus the backward cache.
#[derive(Clone, Debug)]
pub struct LstmStep {
    pub hidden: Tensor,
    pub cell: Tensor,
    pub cache: LstmCache,
}

/// Gradients of one cell step with respect to inputs, carried state and
/// parameters.
#[derive(Clone, Debug)]
pub struct LstmCellGrads {
    pub d_input: Tensor,
    pub d_h_prev: Tensor,
    pub d_c_prev: Tensor,
    pub d_w_input: Tensor,
    pub d_w_hidden: Tensor,
    pub d_bias: Tensor,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + mathfn::exp(-x))
    } else {
        let e = mathfn::exp(x);
        e / (1.0 + e)
    }
}

/// Standard gates: `i, f, o = σ`, `g = tanh` of affine maps of
/// `[input; h_prev]`; `c = f∘c_prev + i∘g`; `h = o∘tanh(c)`.
pub fn lstm_cell_forward(
    input: &Tensor,
    h_prev: &Tensor,
    c_prev: &Tensor,
    params: &LstmParams,
) -> Result<LstmStep, OpError> {
    let hidden_size = params.hidden_size();
    let input_size = params.input_size();
    if input.rank() != 1 || input.numel() != input_size {
        return Err(OpError::ShapeMismatch {
            op: "lstm_cell_forward",
            expected: alloc::vec![input_size],
            got: input.shape().to_vec(),
        });
    }
    if h_prev.numel() != hidden_size || c_prev.numel() != hidden_size {
        return Err(OpError::ShapeMismatch {
            op: "lstm_cell_forward",
            expected: alloc::vec![hidden_size],
            got: if h_prev.numel() != hidden_size {
                h_prev.shape().to_vec()
            } else {
                c_prev.shape().to_vec()
            },
        });
    }

    // pre-activations for the four stacked gates
    let mut pre = alloc::vec![0.0f64; 4 * hidden_size];
    for (r, slot) in pre.iter_mut().enumerate() {
        let mut acc = params.bias.data()[r];
        let wi = params.w_input.row(r);
        for (d, &x) in input.data().iter().enumerate() {
            acc += wi[d] * x;
        }
        let wh = params.w_hidden.row(r);
        for (k, &h) in h_prev.data().iter().enumerate() {
            acc += wh[k] * h;
        }
        *slot = acc;
    }

    let mut gate_i = Vec::with_capacity(hidden_size);
    let mut gate_f = Vec::with_capacity(hidden_size);
    let mut gate_g = Vec::with_capacity(hidden_size);
    let mut gate_o = Vec::with_capacity(hidden_size);
    for h in 0..hidden_size {
        gate_i.push(sigmoid(pre[h]));
        gate_f.push(sigmoid(pre[hidden_size + h]));
        gate_g.push(mathfn::tanh(pre[2 * hidden_size + h]));
        gate_o.push(sigmoid(pre[3 * hidden_size + h]));
    }

    let mut cell = Vec::with_capacity(hidden_size);
    let mut cell_tanh = Vec::with_capacity(hidden_size);
    let mut hidden = Vec::with_capacity(hidden_size);
    for h in 0..hidden_size {
        let c = gate_f[h] * c_prev.data()[h] + gate_i[h] * gate_g[h];
        let ct = mathfn::tanh(c);
        cell.push(c);
        cell_tanh.push(ct);
        hidden.push(gate_o[h] * ct);
    }

    Ok(LstmStep {
        hidden: Tensor::vector(hidden),
        cell: Tensor::vector(cell),
        cache: LstmCache {
            input: input.clone(),
            h_prev: h_prev.clone(),
            c_prev: c_prev.clone(),
            gate_i,
            gate_f,
            gate_g,
            gate_o,
            cell_tanh,
        },
    })
}

/// Backward through one cell step given gradients flowing into the produced
/// hidden state and cell state.
pub fn lstm_cell_backward(
    params: &LstmParams,
    cache: &LstmCache,
    d_hidden: &Tensor,
    d_cell: &Tensor,
) -> LstmCellGrads {
    let hidden_size = params.hidden_size();
    let input_size = params.input_size();
    debug_assert_eq!(d_hidden.numel(), hidden_size);
    debug_assert_eq!(d_cell.numel(), hidden_size);

    // gradients on the gate pre-activations, stacked like the parameters
    let mut d_pre = alloc::vec![0.0f64; 4 * hidden_size];
    let mut d_c_prev = Vec::with_capacity(hidden_size);
    for h in 0..hidden_size {
        let (i, f, g, o) = (
            cache.gate_i[h],
            cache.gate_f[h],
            cache.gate_g[h],
            cache.gate_o[h],
        );
        let ct = cache.cell_tanh[h];
        let dh = d_hidden.data()[h];
        let d_o = dh * ct;
        let d_c = d_cell.data()[h] + dh * o * (1.0 - ct * ct);
        let d_f = d_c * cache.c_prev.data()[h];
        let d_i = d_c * g;
        let d_g = d_c * i;
        d_pre[h] = d_i * i * (1.0 - i);
        d_pre[hidden_size + h] = d_f * f * (1.0 - f);
        d_pre[2 * hidden_size + h] = d_g * (1.0 - g * g);
        d_pre[3 * hidden_size + h] = d_o * o * (1.0 - o);
        d_c_prev.push(d_c * f);
    }

    let mut d_input = Tensor::zeros(alloc::vec![input_size]);
    let mut d_h_prev = Tensor::zeros(alloc::vec![hidden_size]);
    let mut d_w_input = Tensor::zeros(alloc::vec![4 * hidden_size, input_size]);
    let mut d_w_hidden = Tensor::zeros(alloc::vec![4 * hidden_size, hidden_size]);
    for (r, &dp) in d_pre.iter().enumerate() {
        if dp == 0.0 {
            continue;
        }
        let wi = params.w_input.row(r);
        for d in 0..input_size {
            d_input.data_mut()[d] += wi[d] * dp;
        }
        let wh = params.w_hidden.row(r);
        for k in 0..hidden_size {
            d_h_prev.data_mut()[k] += wh[k] * dp;
        }
        let dwi = d_w_input.row_mut(r);
        for (d, &x) in cache.input.data().iter().enumerate() {
            dwi[d] = dp * x;
        }
        let dwh = d_w_hidden.row_mut(r);
        for (k, &h) in cache.h_prev.data().iter().enumerate() {
            dwh[k] = dp * h;
        }
    }
    LstmCellGrads {
        d_input,
        d_h_prev,
        d_c_prev: Tensor::vector(d_c_prev),
        d_w_input,
        d_w_hidden,
        d_bias: Tensor::vector(d_pre),
    }
}
