//! Central-difference verification of the analytic backward passes.
//!
//! The caller evaluates a scalar projection of an op's output (typically
//! `Σ r ∘ forward(inputs)` for a fixed projection `r`) and supplies the
//! analytic gradients produced by the op's backward with `r` as the upstream
//! gradient. [`grad_check`] perturbs every coordinate of every input and
//! compares.

use alloc::vec::Vec;

use crate::mathfn;
use crate::tensor::Tensor;

/// Default step for central differences.
pub const DEFAULT_EPS: f64 = 1e-6;

/// Absolute slack granted per coordinate by [`grad_check_report`]. Central
/// differences at a 1e-6 step carry up to a few 1e-10 of noise when the
/// perturbation crosses a branch (a pooling argmax or a softmax max-shift),
/// so coordinates whose true gradient sits below this scale cannot be
/// verified relatively and are held to this absolute tolerance instead.
pub const DEFAULT_ABS_TOL: f64 = 1e-8;

/// `|a - n| / max(1e-8, |a| + |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    mathfn::abs(analytic - numeric) / (mathfn::abs(analytic) + mathfn::abs(numeric)).max(1e-8)
}

/// Verdict of a gradient check, see [`grad_check_report`].
#[derive(Clone, Copy, Debug, Default)]
pub struct GradCheckReport {
    /// Max of [`relative_error`] over every coordinate of every input.
    pub max_relative_error: f64,
    /// Max over coordinates of
    /// `|a - n| / (abs_tol + rel_tol · max(|a|, |n|))`; at most 1 when every
    /// coordinate agrees within the combined tolerance.
    pub max_tolerance_ratio: f64,
}

impl GradCheckReport {
    pub fn passes(&self) -> bool {
        self.max_tolerance_ratio <= 1.0
    }
}

/// Maximum relative error over every coordinate of every input between the
/// supplied analytic gradients and central differences of `scalar_fn`.
///
/// `analytic[k]` must have the shape of `inputs[k]`. Inputs are restored
/// after each probe, so `scalar_fn` always sees at most one perturbed
/// coordinate.
pub fn grad_check<F>(scalar_fn: F, inputs: &[Tensor], analytic: &[Tensor], eps: f64) -> f64
where
    F: FnMut(&[Tensor]) -> f64,
{
    grad_check_report(scalar_fn, inputs, analytic, eps, 1e-5).max_relative_error
}

/// Like [`grad_check`] but also scoring every coordinate against the
/// combined tolerance `DEFAULT_ABS_TOL + rel_tol · max(|a|, |n|)`.
pub fn grad_check_report<F>(
    mut scalar_fn: F,
    inputs: &[Tensor],
    analytic: &[Tensor],
    eps: f64,
    rel_tol: f64,
) -> GradCheckReport
where
    F: FnMut(&[Tensor]) -> f64,
{
    assert_eq!(inputs.len(), analytic.len());
    let mut work: Vec<Tensor> = inputs.to_vec();
    let mut report = GradCheckReport::default();
    for t in 0..inputs.len() {
        assert_eq!(inputs[t].shape(), analytic[t].shape());
        for k in 0..inputs[t].numel() {
            let x0 = inputs[t].data()[k];
            work[t].data_mut()[k] = x0 + eps;
            let up = scalar_fn(&work);
            work[t].data_mut()[k] = x0 - eps;
            let down = scalar_fn(&work);
            work[t].data_mut()[k] = x0;
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic[t].data()[k];
            report.max_relative_error = report.max_relative_error.max(relative_error(a, numeric));
            let tolerance = DEFAULT_ABS_TOL + rel_tol * mathfn::abs(a).max(mathfn::abs(numeric));
            report.max_tolerance_ratio = report
                .max_tolerance_ratio
                .max(mathfn::abs(a - numeric) / tolerance);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::{
        conv1d_backward, conv1d_forward, cross_entropy, cross_entropy_backward,
        embedding_lookup, embedding_lookup_backward, linear_backward, linear_forward,
        lstm_cell_backward, lstm_cell_forward, softmax, softmax_backward, LstmParams,
    };
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

    fn projection(len: usize, rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::new(
            alloc::vec![len],
            (0..len)
                .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn linear_gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random_tensor(&[3], &mut rng);
        let w = random_tensor(&[4, 3], &mut rng);
        let b = random_tensor(&[4], &mut rng);
        let proj = projection(4, &mut rng);

        let grads = linear_backward(&x, &w, &proj);
        let inputs = [x, w, b];
        let analytic = [grads.d_input, grads.d_weight, grads.d_bias];
        let err = grad_check(
            |args| {
                let out = linear_forward(&args[0], &args[1], &args[2]).unwrap();
                out.data().iter().zip(proj.data()).map(|(o, r)| o * r).sum()
            },
            &inputs,
            &analytic,
            DEFAULT_EPS,
        );
        assert!(err < 1e-7, "relative error {err}");
    }

    #[test]
    fn conv1d_gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = random_tensor(&[6, 2], &mut rng);
        let filt = random_tensor(&[2, 3, 2], &mut rng);
        let bias = random_tensor(&[2], &mut rng);
        let out_len = 6 - 3 + 1;
        let proj = random_tensor(&[out_len, 2], &mut rng);

        let grads = conv1d_backward(&x, &filt, &proj);
        let inputs = [x, filt, bias];
        let analytic = [grads.d_input, grads.d_filters, grads.d_bias];
        let err = grad_check(
            |args| {
                let out = conv1d_forward(&args[0], &args[1], &args[2]).unwrap();
                out.data().iter().zip(proj.data()).map(|(o, r)| o * r).sum()
            },
            &inputs,
            &analytic,
            DEFAULT_EPS,
        );
        assert!(err < 1e-6, "relative error {err}");
    }

    #[test]
    fn lstm_cell_gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let params = LstmParams::init(2, 3, &mut rng);
        let x = random_tensor(&[2], &mut rng);
        let h0 = random_tensor(&[3], &mut rng);
        let c0 = random_tensor(&[3], &mut rng);
        let proj = projection(3, &mut rng);

        // scalar = proj · h; no gradient flows in through the cell state
        let step = lstm_cell_forward(&x, &h0, &c0, &params).unwrap();
        let zero_dc = Tensor::zeros(alloc::vec![3]);
        let grads = lstm_cell_backward(&params, &step.cache, &proj, &zero_dc);
        let inputs = [
            x,
            h0,
            c0,
            params.w_input.clone(),
            params.w_hidden.clone(),
            params.bias.clone(),
        ];
        let analytic = [
            grads.d_input,
            grads.d_h_prev,
            grads.d_c_prev,
            grads.d_w_input,
            grads.d_w_hidden,
            grads.d_bias,
        ];
        let err = grad_check(
            |args| {
                let p = LstmParams {
                    w_input: args[3].clone(),
                    w_hidden: args[4].clone(),
                    bias: args[5].clone(),
                };
                let step = lstm_cell_forward(&args[0], &args[1], &args[2], &p).unwrap();
                step.hidden
                    .data()
                    .iter()
                    .zip(proj.data())
                    .map(|(h, r)| h * r)
                    .sum()
            },
            &inputs,
            &analytic,
            DEFAULT_EPS,
        );
        assert!(err < 1e-5, "relative error {err}");
    }

    #[test]
    fn embedding_lookup_gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let table = random_tensor(&[5, 3], &mut rng);
        let ids = [1u32, 0, 3, 1];
        let proj = random_tensor(&[4, 3], &mut rng);

        let analytic = [embedding_lookup_backward(5, &ids, &proj)];
        let inputs = [table];
        let err = grad_check(
            |args| {
                let out = embedding_lookup(&args[0], &ids).unwrap();
                out.data().iter().zip(proj.data()).map(|(o, r)| o * r).sum()
            },
            &inputs,
            &analytic,
            DEFAULT_EPS,
        );
        assert!(err < 1e-7, "relative error {err}");
    }

    #[test]
    fn softmax_cross_entropy_composite_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let logits = random_tensor(&[3], &mut rng);
        let gold = 1usize;

        let probs = softmax(&logits);
        let d_probs = cross_entropy_backward(&probs, gold);
        let d_logits = softmax_backward(&probs, &d_probs);
        // chained backward must equal p - onehot(gold)
        for i in 0..3 {
            let expect = probs.data()[i] - if i == gold { 1.0 } else { 0.0 };
            assert!((d_logits.data()[i] - expect).abs() < 1e-12);
        }

        let inputs = [logits];
        let analytic = [d_logits];
        let err = grad_check(
            |args| cross_entropy(&softmax(&args[0]), gold).unwrap(),
            &inputs,
            &analytic,
            DEFAULT_EPS,
        );
        assert!(err < 1e-6, "relative error {err}");
    }
}
