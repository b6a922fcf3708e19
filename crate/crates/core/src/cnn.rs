//! First ensemble component: parallel 1-D convolutions of widths 2, 3 and 4
//! over the subword embeddings, ReLU, max-over-time pooling, concatenation,
//! a fully connected layer and a softmax.
//!
//! Sequences shorter than a filter width are zero-padded on the right up to
//! that width. Pooling never looks past `max(real_len, width)` rows, so pad
//! embeddings cannot win the max.

use alloc::vec::Vec;

use rand::Rng;

use crate::ops::{
    conv1d_backward, conv1d_forward, linear_backward, linear_forward, max_over_time,
    max_over_time_backward, relu, relu_backward, softmax, softmax_backward, OpError,
};
use crate::preprocess::NUM_CLASSES;
use crate::tensor::Tensor;

/// The three filter widths, fixed in this order for checkpoint stability.
pub const FILTER_WIDTHS: [usize; 3] = [2, 3, 4];

/// One convolution bank: `filters` is `[F × w × D]`, `bias` is `[F]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvBank {
    pub filters: Tensor,
    pub bias: Tensor,
}

/// All parameters of the CNN component. The three banks share the filter
/// count `F`; the fully connected layer maps the concatenated `3F` pooled
/// features to the three classes.
#[derive(Clone, Debug, PartialEq)]
pub struct CnnParams {
    pub banks: [ConvBank; 3],
    pub fc_weight: Tensor,
    pub fc_bias: Tensor,
}

impl CnnParams {
    /// Uniform ±0.1 weights, zero biases.
    pub fn init<R: Rng>(embed_dim: usize, filter_count: usize, rng: &mut R) -> Self {
        let banks = FILTER_WIDTHS.map(|width| {
            let mut filters = Tensor::zeros(alloc::vec![filter_count, width, embed_dim]);
            for v in filters.data_mut() {
                *v = rng.gen_range(-0.1..0.1);
            }
            ConvBank {
                filters,
                bias: Tensor::zeros(alloc::vec![filter_count]),
            }
        });
        let mut fc_weight = Tensor::zeros(alloc::vec![NUM_CLASSES, 3 * filter_count]);
        for v in fc_weight.data_mut() {
            *v = rng.gen_range(-0.1..0.1);
        }
        Self {
            banks,
            fc_weight,
            fc_bias: Tensor::zeros(alloc::vec![NUM_CLASSES]),
        }
    }

    pub fn filter_count(&self) -> usize {
        self.banks[0].filters.dim(0)
    }

    pub fn embed_dim(&self) -> usize {
        self.banks[0].filters.dim(2)
    }
}

/// Forward products of the CNN component. `pooled` is the sentence vector
/// before dropout and the fully connected layer.
#[derive(Clone, Debug)]
pub struct CnnOutput {
    pub pooled: Tensor,
    pub logits: Tensor,
    pub probs: Tensor,
}

/// Everything the backward pass needs from the forward pass.
#[derive(Clone, Debug)]
pub struct CnnCache {
    windows: [Tensor; 3],
    window_rows: [usize; 3],
    conv_pre: [Tensor; 3],
    argmax: [Vec<usize>; 3],
    fc_input: Tensor,
    probs: Tensor,
    dropout: Option<Tensor>,
    input_rows: usize,
}

/// Parameter gradients mirroring [`CnnParams`].
#[derive(Clone, Debug)]
pub struct CnnGrads {
    pub banks: [ConvBank; 3],
    pub d_fc_weight: Tensor,
    pub d_fc_bias: Tensor,
}

/// Rows `0..max(real_len, width)` of `input`, zero-extended when the
/// sequence is shorter than the filter width.
fn bank_window(input: &Tensor, real_len: usize, width: usize) -> Tensor {
    let rows = real_len.max(width);
    let dim = input.cols();
    let mut window = Tensor::zeros(alloc::vec![rows, dim]);
    let copy_rows = rows.min(input.rows());
    for r in 0..copy_rows {
        window.row_mut(r).copy_from_slice(input.row(r));
    }
    window
}

/// Full forward pass. `input` is the `[T × D]` embedded sequence,
/// `real_len` the count of real (non-pad) positions, and `dropout` an
/// optional `[3F]` multiplier mask applied to the pooled vector.
pub fn cnn_forward(
    input: &Tensor,
    real_len: usize,
    params: &CnnParams,
    dropout: Option<&Tensor>,
) -> Result<(CnnOutput, CnnCache), OpError> {
    if real_len == 0 {
        return Err(OpError::EmptySequence { op: "cnn_forward" });
    }
    if real_len > input.rows() {
        return Err(OpError::InvalidLength {
            op: "cnn_forward",
            len: real_len,
            rows: input.rows(),
        });
    }
    let filter_count = params.filter_count();
    let mut pooled = Tensor::zeros(alloc::vec![3 * filter_count]);
    let mut windows: Vec<Tensor> = Vec::with_capacity(3);
    let mut window_rows = [0usize; 3];
    let mut conv_pre: Vec<Tensor> = Vec::with_capacity(3);
    let mut argmax: Vec<Vec<usize>> = Vec::with_capacity(3);
    for (b, &width) in FILTER_WIDTHS.iter().enumerate() {
        let window = bank_window(input, real_len, width);
        window_rows[b] = window.rows();
        let pre = conv1d_forward(&window, &params.banks[b].filters, &params.banks[b].bias)?;
        let activated = relu(&pre);
        let pool = max_over_time(&activated)?;
        pooled.data_mut()[b * filter_count..(b + 1) * filter_count]
            .copy_from_slice(pool.values.data());
        windows.push(window);
        conv_pre.push(pre);
        argmax.push(pool.argmax);
    }
    let fc_input = match dropout {
        Some(mask) => {
            debug_assert_eq!(mask.numel(), pooled.numel());
            let mut dropped = pooled.clone();
            for (v, &m) in dropped.data_mut().iter_mut().zip(mask.data()) {
                *v *= m;
            }
            dropped
        }
        None => pooled.clone(),
    };
    let logits = linear_forward(&fc_input, &params.fc_weight, &params.fc_bias)?;
    let probs = softmax(&logits);
    let windows: [Tensor; 3] = windows.try_into().unwrap();
    let conv_pre: [Tensor; 3] = conv_pre.try_into().unwrap();
    let argmax: [Vec<usize>; 3] = argmax.try_into().unwrap();
    Ok((
        CnnOutput {
            pooled,
            logits,
            probs: probs.clone(),
        },
        CnnCache {
            windows,
            window_rows,
            conv_pre,
            argmax,
            fc_input,
            probs,
            dropout: dropout.cloned(),
            input_rows: input.rows(),
        },
    ))
}

/// Backward pass from a gradient on the class probabilities. Returns the
/// gradient on the embedded input rows plus all parameter gradients.
pub fn cnn_backward(
    params: &CnnParams,
    cache: &CnnCache,
    d_probs: &Tensor,
) -> (Tensor, CnnGrads) {
    let filter_count = params.filter_count();
    let d_logits = softmax_backward(&cache.probs, d_probs);
    let fc = linear_backward(&cache.fc_input, &params.fc_weight, &d_logits);
    let mut d_pooled = fc.d_input;
    if let Some(mask) = &cache.dropout {
        for (v, &m) in d_pooled.data_mut().iter_mut().zip(mask.data()) {
            *v *= m;
        }
    }

    let dim = params.embed_dim();
    let mut d_input = Tensor::zeros(alloc::vec![cache.input_rows, dim]);
    let mut bank_grads: Vec<ConvBank> = Vec::with_capacity(3);
    for b in 0..3 {
        let d_pool = Tensor::new(
            alloc::vec![filter_count],
            d_pooled.data()[b * filter_count..(b + 1) * filter_count].to_vec(),
        )
        .unwrap();
        let out_rows = cache.conv_pre[b].rows();
        let d_act = max_over_time_backward(out_rows, &cache.argmax[b], &d_pool);
        let d_pre = relu_backward(&cache.conv_pre[b], &d_act);
        let grads = conv1d_backward(&cache.windows[b], &params.banks[b].filters, &d_pre);
        // rows past the true input length were zero padding; their gradient
        // is dropped
        let copy_rows = cache.window_rows[b].min(cache.input_rows);
        for r in 0..copy_rows {
            for d in 0..dim {
                d_input.add2(r, d, grads.d_input.get2(r, d));
            }
        }
        bank_grads.push(ConvBank {
            filters: grads.d_filters,
            bias: grads.d_bias,
        });
    }
    (
        d_input,
        CnnGrads {
            banks: bank_grads.try_into().unwrap(),
            d_fc_weight: fc.d_weight,
            d_fc_bias: fc.d_bias,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{grad_check_report, DEFAULT_EPS};
    use crate::ops::cross_entropy;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        let n: usize = shape.iter().product();
        Tensor::new(
            shape.to_vec(),
            (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    fn zero_params(dim: usize, filter_count: usize) -> CnnParams {
        CnnParams {
            banks: FILTER_WIDTHS.map(|w| ConvBank {
                filters: Tensor::zeros(alloc::vec![filter_count, w, dim]),
                bias: Tensor::zeros(alloc::vec![filter_count]),
            }),
            fc_weight: Tensor::zeros(alloc::vec![NUM_CLASSES, 3 * filter_count]),
            fc_bias: Tensor::zeros(alloc::vec![NUM_CLASSES]),
        }
    }

    #[test]
    fn single_subword_is_zero_padded_and_finite() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let params = CnnParams::init(4, 2, &mut rng);
        let x = random_tensor(&[6, 4], &mut rng);
        let (out, _) = cnn_forward(&x, 1, &params, None).unwrap();
        assert!(out.probs.all_finite());
        let sum: f64 = out.probs.data().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_params_give_uniform_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let params = zero_params(3, 2);
        let x = random_tensor(&[5, 3], &mut rng);
        let (out, _) = cnn_forward(&x, 5, &params, None).unwrap();
        assert_eq!(out.logits.data(), &[0.0, 0.0, 0.0]);
        for &p in out.probs.data() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn forward_equals_hand_composition_of_the_kernels() {
        use crate::ops::{conv1d_forward, linear_forward, max_over_time, relu, softmax};
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let params = CnnParams::init(4, 3, &mut rng);
        let x = random_tensor(&[7, 4], &mut rng);
        let n = 7;
        let (out, _) = cnn_forward(&x, n, &params, None).unwrap();

        let mut pooled = Vec::new();
        for (b, &w) in FILTER_WIDTHS.iter().enumerate() {
            let window = bank_window(&x, n, w);
            let pre = conv1d_forward(&window, &params.banks[b].filters, &params.banks[b].bias)
                .unwrap();
            let pool = max_over_time(&relu(&pre)).unwrap();
            pooled.extend_from_slice(pool.values.data());
        }
        let logits = linear_forward(
            &Tensor::vector(pooled.clone()),
            &params.fc_weight,
            &params.fc_bias,
        )
        .unwrap();
        let probs = softmax(&logits);
        assert_eq!(out.pooled.data(), &pooled[..]);
        assert_eq!(out.probs.data(), probs.data());
    }

    #[test]
    fn pooling_ignores_rows_past_the_real_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let params = CnnParams::init(3, 2, &mut rng);
        let n = 5;
        let x = random_tensor(&[n, 3], &mut rng);
        let mut padded = Tensor::zeros(alloc::vec![n + 4, 3]);
        for r in 0..n {
            padded.row_mut(r).copy_from_slice(x.row(r));
        }
        let (a, _) = cnn_forward(&x, n, &params, None).unwrap();
        let (b, _) = cnn_forward(&padded, n, &params, None).unwrap();
        assert!(a.probs.bit_eq(&b.probs));
        assert!(a.pooled.bit_eq(&b.pooled));
    }

    #[test]
    fn shuffling_feature_map_rows_leaves_pooled_values_unchanged() {
        // the pooled value is a max over positions, so any permutation of
        // the L feature-map rows is invisible to it
        use rand::seq::SliceRandom;
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let x = random_tensor(&[8, 2], &mut rng);
        let filters = random_tensor(&[3, 2, 2], &mut rng);
        let bias = random_tensor(&[3], &mut rng);
        let feature_map = relu(&conv1d_forward(&x, &filters, &bias).unwrap());
        let baseline = max_over_time(&feature_map).unwrap().values;

        let rows = feature_map.rows();
        let mut order: Vec<usize> = (0..rows).collect();
        for _ in 0..10 {
            order.shuffle(&mut rng);
            let shuffled_rows: Vec<f64> = order
                .iter()
                .flat_map(|&r| feature_map.row(r).to_vec())
                .collect();
            let shuffled = Tensor::new(alloc::vec![rows, 3], shuffled_rows).unwrap();
            let pooled = max_over_time(&shuffled).unwrap().values;
            assert!(pooled.bit_eq(&baseline));
        }
    }

    #[test]
    fn end_to_end_gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let (t_len, dim, filter_count) = (5, 4, 2);
        let params = CnnParams::init(dim, filter_count, &mut rng);
        let x = random_tensor(&[t_len, dim], &mut rng);
        let real_len = 5;
        let gold = 2usize;

        let (_, cache) = cnn_forward(&x, real_len, &params, None).unwrap();
        let d_probs = crate::ops::cross_entropy_backward(&cache.probs, gold);
        let (d_x, grads) = cnn_backward(&params, &cache, &d_probs);

        let inputs = alloc::vec![
            x.clone(),
            params.banks[0].filters.clone(),
            params.banks[0].bias.clone(),
            params.banks[1].filters.clone(),
            params.banks[1].bias.clone(),
            params.banks[2].filters.clone(),
            params.banks[2].bias.clone(),
            params.fc_weight.clone(),
            params.fc_bias.clone(),
        ];
        let analytic = alloc::vec![
            d_x,
            grads.banks[0].filters.clone(),
            grads.banks[0].bias.clone(),
            grads.banks[1].filters.clone(),
            grads.banks[1].bias.clone(),
            grads.banks[2].filters.clone(),
            grads.banks[2].bias.clone(),
            grads.d_fc_weight.clone(),
            grads.d_fc_bias.clone(),
        ];
        let report = grad_check_report(
            |args| {
                let p = CnnParams {
                    banks: [
                        ConvBank {
                            filters: args[1].clone(),
                            bias: args[2].clone(),
                        },
                        ConvBank {
                            filters: args[3].clone(),
                            bias: args[4].clone(),
                        },
                        ConvBank {
                            filters: args[5].clone(),
                            bias: args[6].clone(),
                        },
                    ],
                    fc_weight: args[7].clone(),
                    fc_bias: args[8].clone(),
                };
                let (out, _) = cnn_forward(&args[0], real_len, &p, None).unwrap();
                cross_entropy(&out.probs, gold).unwrap()
            },
            &inputs,
            &analytic,
            DEFAULT_EPS,
            1e-5,
        );
        assert!(report.passes(), "gradient check failed: {report:?}");
    }

    #[test]
    fn dropout_mask_scales_forward_and_backward() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let params = CnnParams::init(3, 2, &mut rng);
        let x = random_tensor(&[5, 3], &mut rng);
        let mut mask = Tensor::zeros(alloc::vec![6]);
        // drop half the pooled features, keep-scale the rest
        for (i, v) in mask.data_mut().iter_mut().enumerate() {
            *v = if i % 2 == 0 { 2.0 } else { 0.0 };
        }
        let (out, cache) = cnn_forward(&x, 5, &params, Some(&mask)).unwrap();
        assert_eq!(cache.fc_input.data()[1], 0.0);
        assert_eq!(cache.fc_input.data()[0], out.pooled.data()[0] * 2.0);
        let d_probs = Tensor::vector(alloc::vec![1.0, -1.0, 0.5]);
        let (d_x, _) = cnn_backward(&params, &cache, &d_probs);
        assert!(d_x.all_finite());
    }

    #[test]
    fn real_len_beyond_rows_is_an_error() {
        let params = zero_params(2, 1);
        let x = Tensor::zeros(alloc::vec![3, 2]);
        assert!(matches!(
            cnn_forward(&x, 9, &params, None),
            Err(OpError::InvalidLength { .. })
        ));
    }
}
