//! 1-D convolution over a sequence of embedding rows, stride 1, no implicit
//! padding.

use alloc::vec::Vec;

use super::OpError;
use crate::tensor::Tensor;

/// Gradients of [`conv1d_forward`].
#[derive(Clone, Debug)]
pub struct Conv1dGrads {
    pub d_input: Tensor,
    pub d_filters: Tensor,
    pub d_bias: Tensor,
}

/// `out[t, f] = bias[f] + Σ_{j<w, d<D} filters[f, j, d] · input[t + j, d]`
/// for `t` in `0..T-w+1`.
///
/// `input` is `[T × D]`, `filters` is `[F × w × D]`, `bias` is `[F]`.
pub fn conv1d_forward(input: &Tensor, filters: &Tensor, bias: &Tensor) -> Result<Tensor, OpError> {
    if input.rank() != 2 || filters.rank() != 3 {
        return Err(OpError::ShapeMismatch {
            op: "conv1d_forward",
            expected: alloc::vec![0, 0],
            got: input.shape().to_vec(),
        });
    }
    let (t_len, dim) = (input.dim(0), input.dim(1));
    let (n_filters, width, f_dim) = (filters.dim(0), filters.dim(1), filters.dim(2));
    if f_dim != dim {
        return Err(OpError::ShapeMismatch {
            op: "conv1d_forward",
            expected: alloc::vec![n_filters, width, dim],
            got: filters.shape().to_vec(),
        });
    }
    if bias.rank() != 1 || bias.numel() != n_filters {
        return Err(OpError::ShapeMismatch {
            op: "conv1d_forward",
            expected: alloc::vec![n_filters],
            got: bias.shape().to_vec(),
        });
    }
    if t_len < width {
        return Err(OpError::SequenceTooShort {
            len: t_len,
            filter_width: width,
        });
    }
    let out_len = t_len - width + 1;
    let mut out: Vec<f64> = Vec::with_capacity(out_len * n_filters);
    for t in 0..out_len {
        for f in 0..n_filters {
            let mut acc = bias.data()[f];
            for j in 0..width {
                let xrow = input.row(t + j);
                for d in 0..dim {
                    acc += filters.get3(f, j, d) * xrow[d];
                }
            }
            out.push(acc);
        }
    }
    Tensor::new(alloc::vec![out_len, n_filters], out).map_err(|_| OpError::ShapeMismatch {
        op: "conv1d_forward",
        expected: alloc::vec![out_len, n_filters],
        got: alloc::vec![],
    })
}

/// Backward pass; `upstream` has the output's shape `[(T-w+1) × F]`.
pub fn conv1d_backward(input: &Tensor, filters: &Tensor, upstream: &Tensor) -> Conv1dGrads {
    let (t_len, dim) = (input.dim(0), input.dim(1));
    let (n_filters, width, _) = (filters.dim(0), filters.dim(1), filters.dim(2));
    let out_len = t_len - width + 1;
    debug_assert_eq!(upstream.shape(), &[out_len, n_filters]);

    let mut d_input = Tensor::zeros(alloc::vec![t_len, dim]);
    let mut d_filters = Tensor::zeros(filters.shape().to_vec());
    let mut d_bias = Tensor::zeros(alloc::vec![n_filters]);
    for t in 0..out_len {
        let urow = upstream.row(t);
        for f in 0..n_filters {
            let u = urow[f];
            if u == 0.0 {
                continue;
            }
            d_bias.data_mut()[f] += u;
            for j in 0..width {
                let xrow_idx = t + j;
                for d in 0..dim {
                    d_filters.add3(f, j, d, u * input.get2(xrow_idx, d));
                    d_input.add2(xrow_idx, d, u * filters.get3(f, j, d));
                }
            }
        }
    }
    Conv1dGrads {
        d_input,
        d_filters,
        d_bias,
    }
}
