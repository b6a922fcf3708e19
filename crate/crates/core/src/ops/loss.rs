//! Negative log-likelihood over an already-normalized probability vector.

use super::OpError;
use crate::mathfn;
use crate::tensor::Tensor;

/// Probabilities are floored here before the log so a zero never produces
/// `-inf`.
pub const PROB_FLOOR: f64 = 1e-12;

/// `loss = -ln(max(probs[gold], PROB_FLOOR))`.
///
/// A non-finite probability yields a NaN loss rather than being silently
/// floored, so training can detect a poisoned forward pass.
pub fn cross_entropy(probs: &Tensor, gold: usize) -> Result<f64, OpError> {
    if gold >= probs.numel() {
        return Err(OpError::ClassOutOfRange {
            class: gold,
            classes: probs.numel(),
        });
    }
    let p = probs.data()[gold];
    if !p.is_finite() {
        return Ok(f64::NAN);
    }
    Ok(-mathfn::ln(p.max(PROB_FLOOR)))
}

/// Gradient with respect to `probs`: `-1 / probs[gold]` at the gold index and
/// zero elsewhere. Below the floor the loss is constant, so the gradient is
/// zero there too.
pub fn cross_entropy_backward(probs: &Tensor, gold: usize) -> Tensor {
    debug_assert!(gold < probs.numel());
    let mut out = Tensor::zeros(probs.shape().to_vec());
    let p = probs.data()[gold];
    if p > PROB_FLOOR {
        out.data_mut()[gold] = -1.0 / p;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn certain_prediction_has_zero_loss() {
        let p = Tensor::vector(alloc::vec![1.0, 0.0, 0.0]);
        assert_eq!(cross_entropy(&p, 0).unwrap(), 0.0);
    }

    #[test]
    fn uniform_prediction_costs_ln3() {
        let p = Tensor::vector(alloc::vec![1.0 / 3.0; 3]);
        for gold in 0..3 {
            let loss = cross_entropy(&p, gold).unwrap();
            assert!((loss - 3.0f64.ln()).abs() < 1e-12);
            assert!((loss - 1.09861).abs() < 1e-5);
        }
    }

    #[test]
    fn hand_computed_loss() {
        let p = Tensor::vector(alloc::vec![0.5, 0.3, 0.2]);
        let loss = cross_entropy(&p, 1).unwrap();
        assert!((loss - 1.20397).abs() < 1e-5);
    }

    #[test]
    fn gold_out_of_range_is_an_error() {
        let p = Tensor::vector(alloc::vec![0.5, 0.5]);
        assert_eq!(
            cross_entropy(&p, 2),
            Err(OpError::ClassOutOfRange {
                class: 2,
                classes: 2
            })
        );
    }

    #[test]
    fn zero_probability_is_floored() {
        let p = Tensor::vector(alloc::vec![0.0, 1.0]);
        let loss = cross_entropy(&p, 0).unwrap();
        assert!(loss.is_finite());
        assert!((loss - (-PROB_FLOOR.ln())).abs() < 1e-9);
        // constant region: no gradient
        assert_eq!(cross_entropy_backward(&p, 0).data(), &[0.0, 0.0]);
    }
}
