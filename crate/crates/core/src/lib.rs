//! Ensemble sentiment classifier for code-mixed tweets, built from first
//! principles on a small fixed set of hand-differentiated layers.
//!
//! Two components score each tweet over the classes negative / neutral /
//! positive:
//!
//! * [`cnn`] — parallel 1-D convolutions of widths 2, 3 and 4 over subword
//!   embeddings, ReLU, max-over-time pooling, a fully connected layer and a
//!   softmax;
//! * [`attention`] — a BiLSTM whose per-position annotations are pooled by
//!   dot-product soft attention against the final annotation, then a fully
//!   connected layer and a softmax.
//!
//! At inference the two class distributions are combined by element-wise
//! product ([`ensemble`]). Training ([`train`]) is joint: the sum of the two
//! components' cross-entropy losses is minimized with Adam. Every backward
//! pass is verified against central finite differences ([`gradcheck`]).
//!
//! The crate is `no_std`-compatible (`alloc` required). All IO — corpus
//! files, vocabularies, checkpoints, the command-line surface — lives in the
//! companion `mixsent` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod attention;
pub mod bpe;
pub mod cnn;
pub mod embedding;
pub mod ensemble;
pub mod gradcheck;
mod mathfn;
pub mod metrics;
pub mod model;
pub mod ops;
pub mod pca;
pub mod preprocess;
pub mod tensor;
pub mod train;

pub use tensor::{Tensor, TensorError};
