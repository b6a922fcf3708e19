//! Second ensemble component: a BiLSTM over the subword embeddings whose
//! per-position annotations are pooled by dot-product soft attention against
//! the final annotation, then a fully connected layer and a softmax.
//!
//! Only the `real_len` leading positions ever reach the cells, so padding is
//! structurally invisible: appending pad rows leaves scores, weights and the
//! sentence vector bit-identical.

use alloc::vec::Vec;

use rand::Rng;

use crate::ops::{
    linear_backward, linear_forward, lstm_cell_backward, lstm_cell_forward, softmax,
    softmax_backward, LstmCache, LstmParams, OpError,
};
use crate::preprocess::NUM_CLASSES;
use crate::tensor::Tensor;

/// Independent forward and backward cells of equal hidden size, plus the
/// fully connected layer over the `2H` sentence vector.
#[derive(Clone, Debug)]
pub struct BiLstmParams {
    pub forward: LstmParams,
    pub backward: LstmParams,
    pub fc_weight: Tensor,
    pub fc_bias: Tensor,
}

impl BiLstmParams {
    pub fn init<R: Rng>(embed_dim: usize, hidden_size: usize, rng: &mut R) -> Self {
        let forward = LstmParams::init(embed_dim, hidden_size, rng);
        let backward = LstmParams::init(embed_dim, hidden_size, rng);
        let mut fc_weight = Tensor::zeros(alloc::vec![NUM_CLASSES, 2 * hidden_size]);
        for v in fc_weight.data_mut() {
            *v = rng.gen_range(-0.1..0.1);
        }
        Self {
            forward,
            backward,
            fc_weight,
            fc_bias: Tensor::zeros(alloc::vec![NUM_CLASSES]),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.forward.hidden_size()
    }

    pub fn embed_dim(&self) -> usize {
        self.forward.input_size()
    }
}

/// Forward products of the attention component: annotations `K`, attention
/// scores `e`, weights `a`, sentence vector `h`, logits and probabilities.
#[derive(Clone, Debug)]
pub struct AttnOutput {
    pub annotations: Tensor,
    pub scores: Tensor,
    pub weights: Tensor,
    pub sentence: Tensor,
    pub logits: Tensor,
    pub probs: Tensor,
}

/// Per-direction caches plus attention intermediates for the backward pass.
#[derive(Clone, Debug)]
pub struct AttnCache {
    fwd_steps: Vec<LstmCache>,
    bwd_steps: Vec<LstmCache>,
    annotations: Tensor,
    weights: Tensor,
    fc_input: Tensor,
    probs: Tensor,
    dropout: Option<Tensor>,
    input_rows: usize,
}

/// Parameter gradients mirroring [`BiLstmParams`].
#[derive(Clone, Debug)]
pub struct BiLstmGrads {
    pub forward: LstmParams,
    pub backward: LstmParams,
    pub d_fc_weight: Tensor,
    pub d_fc_bias: Tensor,
}

/// Runs both cells over the `real_len` leading rows of `input` from zero
/// initial states and concatenates per position: `K[i] = [→h_i ; ←h_i]`.
pub fn bilstm_annotate(
    input: &Tensor,
    real_len: usize,
    params: &BiLstmParams,
) -> Result<(Tensor, Vec<LstmCache>, Vec<LstmCache>), OpError> {
    if real_len == 0 {
        return Err(OpError::EmptySequence {
            op: "bilstm_annotate",
        });
    }
    if real_len > input.rows() {
        return Err(OpError::InvalidLength {
            op: "bilstm_annotate",
            len: real_len,
            rows: input.rows(),
        });
    }
    let hidden_size = params.hidden_size();
    let mut annotations = Tensor::zeros(alloc::vec![real_len, 2 * hidden_size]);

    let mut h = Tensor::zeros(alloc::vec![hidden_size]);
    let mut c = Tensor::zeros(alloc::vec![hidden_size]);
    let mut fwd_steps = Vec::with_capacity(real_len);
    for t in 0..real_len {
        let x_t = Tensor::vector(input.row(t).to_vec());
        let step = lstm_cell_forward(&x_t, &h, &c, &params.forward)?;
        annotations.row_mut(t)[..hidden_size].copy_from_slice(step.hidden.data());
        h = step.hidden;
        c = step.cell;
        fwd_steps.push(step.cache);
    }

    let mut h = Tensor::zeros(alloc::vec![hidden_size]);
    let mut c = Tensor::zeros(alloc::vec![hidden_size]);
    let mut bwd_steps: Vec<Option<LstmCache>> = (0..real_len).map(|_| None).collect();
    for t in (0..real_len).rev() {
        let x_t = Tensor::vector(input.row(t).to_vec());
        let step = lstm_cell_forward(&x_t, &h, &c, &params.backward)?;
        annotations.row_mut(t)[hidden_size..].copy_from_slice(step.hidden.data());
        h = step.hidden;
        c = step.cell;
        bwd_steps[t] = Some(step.cache);
    }
    let bwd_steps: Vec<LstmCache> = bwd_steps.into_iter().map(|c| c.unwrap()).collect();
    Ok((annotations, fwd_steps, bwd_steps))
}

/// Dot-product attention against the last annotation:
/// `e_i = k_i · k_n`, `a = softmax(e)`, `h = Σ a_i k_i`.
pub fn attend(annotations: &Tensor) -> Result<(Tensor, Tensor, Tensor), OpError> {
    if annotations.rank() != 2 || annotations.rows() == 0 {
        return Err(OpError::EmptySequence { op: "attend" });
    }
    let (n, width) = (annotations.rows(), annotations.cols());
    let last = annotations.row(n - 1);
    let mut scores = Vec::with_capacity(n);
    for i in 0..n {
        let row = annotations.row(i);
        scores.push(row.iter().zip(last).map(|(a, b)| a * b).sum());
    }
    let scores = Tensor::vector(scores);
    let weights = softmax(&scores);
    let mut sentence = Tensor::zeros(alloc::vec![width]);
    for i in 0..n {
        let a_i = weights.data()[i];
        for (s, &k) in sentence.data_mut().iter_mut().zip(annotations.row(i)) {
            *s += a_i * k;
        }
    }
    Ok((scores, weights, sentence))
}

/// Backward through [`attend`] given the gradient on the sentence vector.
fn attend_backward(annotations: &Tensor, weights: &Tensor, d_sentence: &Tensor) -> Tensor {
    let (n, width) = (annotations.rows(), annotations.cols());
    let mut d_annotations = Tensor::zeros(alloc::vec![n, width]);
    // h = Σ a_i k_i
    let mut d_weights = Vec::with_capacity(n);
    for i in 0..n {
        let row = annotations.row(i);
        d_weights.push(row.iter().zip(d_sentence.data()).map(|(k, d)| k * d).sum());
        let a_i = weights.data()[i];
        for (dk, &d) in d_annotations.row_mut(i).iter_mut().zip(d_sentence.data()) {
            *dk += a_i * d;
        }
    }
    // a = softmax(e)
    let d_scores = softmax_backward(weights, &Tensor::vector(d_weights));
    // e_i = k_i · k_n; when i = n both factors contribute, which the two
    // accumulations below produce naturally
    let last = annotations.row(n - 1).to_vec();
    for i in 0..n {
        let de = d_scores.data()[i];
        if de == 0.0 {
            continue;
        }
        let row_i = annotations.row(i).to_vec();
        for (dk, &k_n) in d_annotations.row_mut(i).iter_mut().zip(&last) {
            *dk += de * k_n;
        }
        for (dk, &k_i) in d_annotations.row_mut(n - 1).iter_mut().zip(&row_i) {
            *dk += de * k_i;
        }
    }
    d_annotations
}

/// Full forward pass of the attention component. `dropout` is an optional
/// `[2H]` multiplier mask applied to the sentence vector before the fully
/// connected layer.
pub fn attn_forward(
    input: &Tensor,
    real_len: usize,
    params: &BiLstmParams,
    dropout: Option<&Tensor>,
) -> Result<(AttnOutput, AttnCache), OpError> {
    let (annotations, fwd_steps, bwd_steps) = bilstm_annotate(input, real_len, params)?;
    let (scores, weights, sentence) = attend(&annotations)?;
    let fc_input = match dropout {
        Some(mask) => {
            debug_assert_eq!(mask.numel(), sentence.numel());
            let mut dropped = sentence.clone();
            for (v, &m) in dropped.data_mut().iter_mut().zip(mask.data()) {
                *v *= m;
            }
            dropped
        }
        None => sentence.clone(),
    };
    let logits = linear_forward(&fc_input, &params.fc_weight, &params.fc_bias)?;
    let probs = softmax(&logits);
    Ok((
        AttnOutput {
            annotations: annotations.clone(),
            scores,
            weights: weights.clone(),
            sentence,
            logits,
            probs: probs.clone(),
        },
        AttnCache {
            fwd_steps,
            bwd_steps,
            annotations,
            weights,
            fc_input,
            probs,
            dropout: dropout.cloned(),
            input_rows: input.rows(),
        },
    ))
}

/// Backward pass from a gradient on the class probabilities. Returns the
/// gradient on the embedded input rows plus all parameter gradients.
pub fn attn_backward(
    params: &BiLstmParams,
    cache: &AttnCache,
    d_probs: &Tensor,
) -> (Tensor, BiLstmGrads) {
    let hidden_size = params.hidden_size();
    let embed_dim = params.embed_dim();
    let n = cache.annotations.rows();

    let d_logits = softmax_backward(&cache.probs, d_probs);
    let fc = linear_backward(&cache.fc_input, &params.fc_weight, &d_logits);
    let mut d_sentence = fc.d_input;
    if let Some(mask) = &cache.dropout {
        for (v, &m) in d_sentence.data_mut().iter_mut().zip(mask.data()) {
            *v *= m;
        }
    }
    let d_annotations = attend_backward(&cache.annotations, &cache.weights, &d_sentence);

    let mut d_input = Tensor::zeros(alloc::vec![cache.input_rows, embed_dim]);
    let mut d_fwd = zero_lstm_grads(&params.forward);
    let mut d_bwd = zero_lstm_grads(&params.backward);

    // forward cell: backprop through time right to left
    let mut d_h = Tensor::zeros(alloc::vec![hidden_size]);
    let mut d_c = Tensor::zeros(alloc::vec![hidden_size]);
    for t in (0..n).rev() {
        let mut d_h_t = d_h;
        for (g, &da) in d_h_t
            .data_mut()
            .iter_mut()
            .zip(&d_annotations.row(t)[..hidden_size])
        {
            *g += da;
        }
        let grads = lstm_cell_backward(&params.forward, &cache.fwd_steps[t], &d_h_t, &d_c);
        accumulate_lstm_grads(&mut d_fwd, &grads);
        for (dx, &g) in d_input.row_mut(t).iter_mut().zip(grads.d_input.data()) {
            *dx += g;
        }
        d_h = grads.d_h_prev;
        d_c = grads.d_c_prev;
    }

    // backward cell ran right to left, so its BPTT runs left to right
    let mut d_h = Tensor::zeros(alloc::vec![hidden_size]);
    let mut d_c = Tensor::zeros(alloc::vec![hidden_size]);
    for t in 0..n {
        let mut d_h_t = d_h;
        for (g, &da) in d_h_t
            .data_mut()
            .iter_mut()
            .zip(&d_annotations.row(t)[hidden_size..])
        {
            *g += da;
        }
        let grads = lstm_cell_backward(&params.backward, &cache.bwd_steps[t], &d_h_t, &d_c);
        accumulate_lstm_grads(&mut d_bwd, &grads);
        for (dx, &g) in d_input.row_mut(t).iter_mut().zip(grads.d_input.data()) {
            *dx += g;
        }
        d_h = grads.d_h_prev;
        d_c = grads.d_c_prev;
    }

    (
        d_input,
        BiLstmGrads {
            forward: d_fwd,
            backward: d_bwd,
            d_fc_weight: fc.d_weight,
            d_fc_bias: fc.d_bias,
        },
    )
}

fn zero_lstm_grads(like: &LstmParams) -> LstmParams {
    LstmParams {
        w_input: Tensor::zeros(like.w_input.shape().to_vec()),
        w_hidden: Tensor::zeros(like.w_hidden.shape().to_vec()),
        bias: Tensor::zeros(like.bias.shape().to_vec()),
    }
}

fn accumulate_lstm_grads(acc: &mut LstmParams, step: &crate::ops::LstmCellGrads) {
    acc.w_input.add_assign(&step.d_w_input);
    acc.w_hidden.add_assign(&step.d_w_hidden);
    acc.bias.add_assign(&step.d_bias);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{grad_check_report, DEFAULT_EPS};
    use crate::ops::cross_entropy;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        let numel: usize = shape.iter().product();
        Tensor::new(
            shape.to_vec(),
            (0..numel).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    fn zero_params(embed_dim: usize, hidden_size: usize) -> BiLstmParams {
        let zero_cell = |d: usize, h: usize| LstmParams {
            w_input: Tensor::zeros(alloc::vec![4 * h, d]),
            w_hidden: Tensor::zeros(alloc::vec![4 * h, h]),
            bias: Tensor::zeros(alloc::vec![4 * h]),
        };
        BiLstmParams {
            forward: zero_cell(embed_dim, hidden_size),
            backward: zero_cell(embed_dim, hidden_size),
            fc_weight: Tensor::zeros(alloc::vec![NUM_CLASSES, 2 * hidden_size]),
            fc_bias: Tensor::zeros(alloc::vec![NUM_CLASSES]),
        }
    }

    #[test]
    fn single_position_runs_both_cells_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let params = BiLstmParams::init(3, 2, &mut rng);
        let x = random_tensor(&[4, 3], &mut rng);
        let (annotations, fwd, bwd) = bilstm_annotate(&x, 1, &params).unwrap();
        assert_eq!(annotations.shape(), &[1, 4]);
        assert_eq!(fwd.len(), 1);
        assert_eq!(bwd.len(), 1);

        let x0 = Tensor::vector(x.row(0).to_vec());
        let zero = Tensor::zeros(alloc::vec![2]);
        let f = lstm_cell_forward(&x0, &zero, &zero, &params.forward).unwrap();
        let b = lstm_cell_forward(&x0, &zero, &zero, &params.backward).unwrap();
        assert_eq!(&annotations.row(0)[..2], f.hidden.data());
        assert_eq!(&annotations.row(0)[2..], b.hidden.data());
    }

    #[test]
    fn zero_params_give_zero_annotations() {
        let params = zero_params(2, 3);
        let x = Tensor::filled(alloc::vec![4, 2], 0.7);
        let (annotations, _, _) = bilstm_annotate(&x, 4, &params).unwrap();
        assert!(annotations.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn reversing_input_and_swapping_cells_mirrors_annotations() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let params = BiLstmParams::init(3, 2, &mut rng);
        let swapped = BiLstmParams {
            forward: params.backward.clone(),
            backward: params.forward.clone(),
            fc_weight: params.fc_weight.clone(),
            fc_bias: params.fc_bias.clone(),
        };
        let n = 5;
        let x = random_tensor(&[n, 3], &mut rng);
        let reversed_rows: Vec<f64> = (0..n).rev().flat_map(|r| x.row(r).to_vec()).collect();
        let x_rev = Tensor::new(alloc::vec![n, 3], reversed_rows).unwrap();

        let (k, _, _) = bilstm_annotate(&x, n, &params).unwrap();
        let (k_swapped, _, _) = bilstm_annotate(&x_rev, n, &swapped).unwrap();
        // row i of the original equals row n-1-i of the swapped run with its
        // forward/backward halves exchanged
        let h = params.hidden_size();
        for i in 0..n {
            let orig = k.row(i);
            let mirrored = k_swapped.row(n - 1 - i);
            assert_eq!(&orig[..h], &mirrored[h..]);
            assert_eq!(&orig[h..], &mirrored[..h]);
        }
    }

    #[test]
    fn empty_sequence_is_an_error() {
        let params = zero_params(2, 2);
        let x = Tensor::zeros(alloc::vec![3, 2]);
        assert!(matches!(
            bilstm_annotate(&x, 0, &params),
            Err(OpError::EmptySequence { .. })
        ));
    }

    #[test]
    fn attend_single_row_returns_it() {
        let k = Tensor::new(alloc::vec![1, 2], alloc::vec![0.3, -0.7]).unwrap();
        let (_, weights, sentence) = attend(&k).unwrap();
        assert_eq!(weights.data(), &[1.0]);
        assert_eq!(sentence.data(), &[0.3, -0.7]);
    }

    #[test]
    fn attend_equal_rows_is_uniform() {
        let k = Tensor::new(alloc::vec![3, 2], alloc::vec![0.5, 1.0, 0.5, 1.0, 0.5, 1.0]).unwrap();
        let (scores, weights, sentence) = attend(&k).unwrap();
        assert!(scores.data().windows(2).all(|w| w[0] == w[1]));
        for &a in weights.data() {
            assert!((a - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!((sentence.data()[0] - 0.5).abs() < 1e-15);
        assert!((sentence.data()[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn attend_hand_computed_two_rows() {
        let k = Tensor::new(alloc::vec![2, 2], alloc::vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let (scores, weights, sentence) = attend(&k).unwrap();
        assert_eq!(scores.data(), &[0.0, 1.0]);
        assert!((weights.data()[0] - 0.26894).abs() < 1e-5);
        assert!((weights.data()[1] - 0.73106).abs() < 1e-5);
        assert!((sentence.data()[0] - 0.26894).abs() < 1e-5);
        assert!((sentence.data()[1] - 0.73106).abs() < 1e-5);
    }

    #[test]
    fn scaling_annotations_scales_scores_quadratically() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let k = random_tensor(&[4, 6], &mut rng);
        let c = 3.0;
        let scaled = k.map(|v| c * v);
        let (e, _, _) = attend(&k).unwrap();
        let (e_scaled, _, _) = attend(&scaled).unwrap();
        for (a, b) in e.data().iter().zip(e_scaled.data()) {
            assert!((c * c * a - b).abs() < 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn zero_params_give_uniform_probabilities() {
        let params = zero_params(2, 3);
        let x = Tensor::filled(alloc::vec![4, 2], 0.3);
        let (out, _) = attn_forward(&x, 4, &params, None).unwrap();
        assert_eq!(out.logits.data(), &[0.0, 0.0, 0.0]);
        for &p in out.probs.data() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn forward_equals_hand_composition_of_the_pieces() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let params = BiLstmParams::init(3, 2, &mut rng);
        let x = random_tensor(&[4, 3], &mut rng);
        let (out, _) = attn_forward(&x, 4, &params, None).unwrap();

        let (k, _, _) = bilstm_annotate(&x, 4, &params).unwrap();
        let (_, _, h) = attend(&k).unwrap();
        let logits = linear_forward(&h, &params.fc_weight, &params.fc_bias).unwrap();
        let probs = softmax(&logits);
        assert!(out.sentence.bit_eq(&h));
        assert!(out.probs.bit_eq(&probs));
    }

    #[test]
    fn weights_sum_to_one_and_sentence_stays_in_hull() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        for _ in 0..50 {
            let n = rng.gen_range(1..7);
            let k = random_tensor(&[n, 4], &mut rng);
            let (_, weights, sentence) = attend(&k).unwrap();
            let sum: f64 = weights.data().iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(weights.data().iter().all(|&a| a >= 0.0));
            for j in 0..4 {
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for i in 0..n {
                    lo = lo.min(k.get2(i, j));
                    hi = hi.max(k.get2(i, j));
                }
                let v = sentence.data()[j];
                assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn appending_padding_leaves_everything_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let params = BiLstmParams::init(3, 2, &mut rng);
        let n = 4;
        let x = random_tensor(&[n, 3], &mut rng);
        let mut padded = Tensor::zeros(alloc::vec![n + 5, 3]);
        for r in 0..n {
            padded.row_mut(r).copy_from_slice(x.row(r));
        }
        let (a, _) = attn_forward(&x, n, &params, None).unwrap();
        let (b, _) = attn_forward(&padded, n, &params, None).unwrap();
        assert!(a.scores.bit_eq(&b.scores));
        assert!(a.weights.bit_eq(&b.weights));
        assert!(a.sentence.bit_eq(&b.sentence));
        assert!(a.probs.bit_eq(&b.probs));
    }

    #[test]
    fn end_to_end_gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        let (t_len, embed_dim, hidden_size) = (4, 3, 3);
        let params = BiLstmParams::init(embed_dim, hidden_size, &mut rng);
        let x = random_tensor(&[t_len, embed_dim], &mut rng);
        let gold = 0usize;

        let (_, cache) = attn_forward(&x, t_len, &params, None).unwrap();
        let d_probs = crate::ops::cross_entropy_backward(&cache.probs, gold);
        let (d_x, grads) = attn_backward(&params, &cache, &d_probs);

        let inputs = alloc::vec![
            x.clone(),
            params.forward.w_input.clone(),
            params.forward.w_hidden.clone(),
            params.forward.bias.clone(),
            params.backward.w_input.clone(),
            params.backward.w_hidden.clone(),
            params.backward.bias.clone(),
            params.fc_weight.clone(),
            params.fc_bias.clone(),
        ];
        let analytic = alloc::vec![
            d_x,
            grads.forward.w_input.clone(),
            grads.forward.w_hidden.clone(),
            grads.forward.bias.clone(),
            grads.backward.w_input.clone(),
            grads.backward.w_hidden.clone(),
            grads.backward.bias.clone(),
            grads.d_fc_weight.clone(),
            grads.d_fc_bias.clone(),
        ];
        let report = grad_check_report(
            |args| {
                let p = BiLstmParams {
                    forward: LstmParams {
                        w_input: args[1].clone(),
                        w_hidden: args[2].clone(),
                        bias: args[3].clone(),
                    },
                    backward: LstmParams {
                        w_input: args[4].clone(),
                        w_hidden: args[5].clone(),
                        bias: args[6].clone(),
                    },
                    fc_weight: args[7].clone(),
                    fc_bias: args[8].clone(),
                };
                let (out, _) = attn_forward(&args[0], t_len, &p, None).unwrap();
                cross_entropy(&out.probs, gold).unwrap()
            },
            &inputs,
            &analytic,
            DEFAULT_EPS,
            1e-5,
        );
        assert!(report.passes(), "gradient check failed: {report:?}");
    }
}
