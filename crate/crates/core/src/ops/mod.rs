//! Forward and backward kernels for the fixed set of layers the two
//! classifiers are built from.
//!
//! Every forward op has a paired backward that takes the values cached by the
//! forward pass plus an upstream gradient of the output's shape and returns a
//! gradient for each input and parameter, matching its source shape. Backward
//! functions assume the shapes the forward already validated.

mod activation;
mod conv1d;
mod linear;
mod loss;
mod lookup;
mod lstm;
mod pool;

pub use activation::{relu, relu_backward, softmax, softmax_backward};
pub use conv1d::{conv1d_backward, conv1d_forward, Conv1dGrads};
pub use linear::{linear_backward, linear_forward, LinearGrads};
pub use loss::{cross_entropy, cross_entropy_backward, PROB_FLOOR};
pub use lookup::{embedding_lookup, embedding_lookup_backward};
pub use lstm::{
    lstm_cell_backward, lstm_cell_forward, LstmCache, LstmCellGrads, LstmParams, LstmStep,
};
pub use pool::{max_over_time, max_over_time_backward, PooledMax};

use alloc::vec::Vec;
use core::fmt;

/// Errors shared by the numeric kernels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OpError {
    /// Two operands do not conform; both shapes are named.
    ShapeMismatch {
        op: &'static str,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    /// Input sequence is shorter than the filter width.
    SequenceTooShort { len: usize, filter_width: usize },
    /// An operation received zero time steps.
    EmptySequence { op: &'static str },
    /// Gold class index outside `[0, classes)`.
    ClassOutOfRange { class: usize, classes: usize },
    /// Subword id not covered by the embedding table.
    IdOutOfVocab { id: u32, vocab: usize },
    /// Real-length argument exceeds the available rows.
    InvalidLength {
        op: &'static str,
        len: usize,
        rows: usize,
    },
}

impl fmt::Display for OpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OpError::ShapeMismatch { op, expected, got } => {
                write!(f, "{op}: expected shape {expected:?}, got {got:?}")
            }
            OpError::SequenceTooShort { len, filter_width } => write!(
                f,
                "sequence of length {len} is shorter than filter width {filter_width}"
            ),
            OpError::EmptySequence { op } => write!(f, "{op}: empty sequence"),
            OpError::ClassOutOfRange { class, classes } => {
                write!(f, "class index {class} out of range for {classes} classes")
            }
            OpError::IdOutOfVocab { id, vocab } => {
                write!(f, "subword id {id} outside vocabulary of size {vocab}")
            }
            OpError::InvalidLength { op, len, rows } => {
                write!(f, "{op}: real length {len} exceeds {rows} rows")
            }
        }
    }
}

impl core::error::Error for OpError {}
