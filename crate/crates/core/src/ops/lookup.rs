//! Embedding row gather and its scatter-add backward.

use super::OpError;
use crate::tensor::Tensor;

/// Gathers `table` rows by id into a `[T × D]` tensor.
pub fn embedding_lookup(table: &Tensor, ids: &[u32]) -> Result<Tensor, OpError> {
    if ids.is_empty() {
        return Err(OpError::EmptySequence {
            op: "embedding_lookup",
        });
    }
    let (vocab, dim) = (table.dim(0), table.dim(1));
    let mut out = Tensor::zeros(alloc::vec![ids.len(), dim]);
    for (t, &id) in ids.iter().enumerate() {
        if id as usize >= vocab {
            return Err(OpError::IdOutOfVocab { id, vocab });
        }
        out.row_mut(t).copy_from_slice(table.row(id as usize));
    }
    Ok(out)
}

/// Scatter-adds the upstream rows into a `[V × D]` table gradient; repeated
/// ids accumulate.
pub fn embedding_lookup_backward(vocab: usize, ids: &[u32], upstream: &Tensor) -> Tensor {
    debug_assert_eq!(upstream.rows(), ids.len());
    let dim = upstream.cols();
    let mut d_table = Tensor::zeros(alloc::vec![vocab, dim]);
    for (t, &id) in ids.iter().enumerate() {
        let src = upstream.row(t);
        let dst = d_table.row_mut(id as usize);
        for (a, b) in dst.iter_mut().zip(src) {
            *a += *b;
        }
    }
    d_table
}
