//! ReLU and the numerically stable softmax.

use crate::mathfn;
use crate::tensor::Tensor;

/// Element-wise `max(0, x)`.
pub fn relu(input: &Tensor) -> Tensor {
    input.map(|x| if x > 0.0 { x } else { 0.0 })
}

/// Subgradient at exactly 0 is 0, which keeps backward deterministic.
pub fn relu_backward(input: &Tensor, upstream: &Tensor) -> Tensor {
    debug_assert_eq!(input.shape(), upstream.shape());
    let mut out = upstream.clone();
    for (g, &x) in out.data_mut().iter_mut().zip(input.data()) {
        if x <= 0.0 {
            *g = 0.0;
        }
    }
    out
}

/// Max-shifted softmax over a 1-D tensor: `out[i] = exp(z[i] - m) / Σ_j
/// exp(z[j] - m)` with `m = max(z)`, so arbitrarily large logits stay finite.
pub fn softmax(logits: &Tensor) -> Tensor {
    debug_assert_eq!(logits.rank(), 1);
    let m = logits
        .data()
        .iter()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut out = logits.map(|z| mathfn::exp(z - m));
    let sum: f64 = out.data().iter().sum();
    out.scale(1.0 / sum);
    out
}

/// Backward through softmax: `d_logits = p ∘ (upstream - upstream · p)`.
pub fn softmax_backward(probs: &Tensor, upstream: &Tensor) -> Tensor {
    debug_assert_eq!(probs.shape(), upstream.shape());
    let dot: f64 = probs
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(p, u)| p * u)
        .sum();
    let mut out = probs.clone();
    for (g, &u) in out.data_mut().iter_mut().zip(upstream.data()) {
        *g *= u - dot;
    }
    out
}
