//! Max-over-time pooling with stored argmax indices for backward routing.

use alloc::vec::Vec;

use super::OpError;
use crate::tensor::Tensor;

/// Per-feature maxima and the time index each maximum came from.
#[derive(Clone, Debug)]
pub struct PooledMax {
    pub values: Tensor,
    pub argmax: Vec<usize>,
}

/// Per-feature maximum over the time axis of an `[L × F]` feature map.
/// Ties resolve to the smallest time index so backward routing is
/// deterministic.
pub fn max_over_time(feature_map: &Tensor) -> Result<PooledMax, OpError> {
    if feature_map.rank() != 2 || feature_map.dim(0) == 0 {
        return Err(OpError::EmptySequence {
            op: "max_over_time",
        });
    }
    let (rows, cols) = (feature_map.dim(0), feature_map.dim(1));
    let mut values = Vec::with_capacity(cols);
    let mut argmax = Vec::with_capacity(cols);
    for f in 0..cols {
        let mut best_t = 0;
        let mut best = feature_map.get2(0, f);
        for t in 1..rows {
            let v = feature_map.get2(t, f);
            if v > best {
                best = v;
                best_t = t;
            }
        }
        values.push(best);
        argmax.push(best_t);
    }
    Ok(PooledMax {
        values: Tensor::vector(values),
        argmax,
    })
}

/// Routes each upstream component to the stored argmax row; all other
/// positions receive zero.
pub fn max_over_time_backward(rows: usize, argmax: &[usize], upstream: &Tensor) -> Tensor {
    debug_assert_eq!(upstream.numel(), argmax.len());
    let cols = argmax.len();
    let mut d_input = Tensor::zeros(alloc::vec![rows, cols]);
    for (f, &t) in argmax.iter().enumerate() {
        d_input.add2(t, f, upstream.data()[f]);
    }
    d_input
}
