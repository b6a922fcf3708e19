//! Fully connected layer.

use alloc::vec::Vec;

use super::OpError;
use crate::tensor::Tensor;

/// Gradients of [`linear_forward`] with respect to its three arguments.
#[derive(Clone, Debug)]
pub struct LinearGrads {
    pub d_input: Tensor,
    pub d_weight: Tensor,
    pub d_bias: Tensor,
}

/// `out[j] = Σ_i weight[j, i] · input[i] + bias[j]`.
pub fn linear_forward(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor, OpError> {
    if weight.rank() != 2 {
        return Err(OpError::ShapeMismatch {
            op: "linear_forward",
            expected: alloc::vec![0, 0],
            got: weight.shape().to_vec(),
        });
    }
    let (n_out, n_in) = (weight.dim(0), weight.dim(1));
    if input.rank() != 1 || input.numel() != n_in {
        return Err(OpError::ShapeMismatch {
            op: "linear_forward",
            expected: alloc::vec![n_in],
            got: input.shape().to_vec(),
        });
    }
    if bias.rank() != 1 || bias.numel() != n_out {
        return Err(OpError::ShapeMismatch {
            op: "linear_forward",
            expected: alloc::vec![n_out],
            got: bias.shape().to_vec(),
        });
    }
    let x = input.data();
    let mut out: Vec<f64> = Vec::with_capacity(n_out);
    for j in 0..n_out {
        let row = weight.row(j);
        let mut acc = bias.data()[j];
        for i in 0..n_in {
            acc += row[i] * x[i];
        }
        out.push(acc);
    }
    Ok(Tensor::vector(out))
}

/// Backward pass; `upstream` has the output's shape `[n_out]`.
pub fn linear_backward(input: &Tensor, weight: &Tensor, upstream: &Tensor) -> LinearGrads {
    let (n_out, n_in) = (weight.dim(0), weight.dim(1));
    debug_assert_eq!(upstream.numel(), n_out);
    debug_assert_eq!(input.numel(), n_in);

    let mut d_input = Tensor::zeros(alloc::vec![n_in]);
    let mut d_weight = Tensor::zeros(alloc::vec![n_out, n_in]);
    let u = upstream.data();
    let x = input.data();
    for j in 0..n_out {
        let wrow = weight.row(j);
        let drow = d_weight.row_mut(j);
        for i in 0..n_in {
            drow[i] = u[j] * x[i];
        }
        for i in 0..n_in {
            d_input.data_mut()[i] += wrow[i] * u[j];
        }
    }
    LinearGrads {
        d_input,
        d_weight,
        d_bias: upstream.clone(),
    }
}
