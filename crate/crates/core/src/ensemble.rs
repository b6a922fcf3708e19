//! Combination of the two components' class distributions.
//!
//! The default combination is the element-wise product, renormalized for
//! reporting; the raw product is kept alongside. A linearly weighted average
//! is available behind a mode switch for comparison runs.

use alloc::vec::Vec;
use core::fmt;

use crate::preprocess::NUM_CLASSES;
use crate::tensor::Tensor;

/// How the two probability vectors are combined at inference.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnsembleMode {
    /// Element-wise product; either component can veto a class.
    Product,
    /// Equal-weight arithmetic mean of the two distributions.
    WeightedAverage,
}

/// Combined verdict over the three classes.
#[derive(Clone, Debug)]
pub struct Prediction {
    pub p_cnn: Tensor,
    pub p_att: Tensor,
    /// Pre-normalization combination (the raw product, or the mean).
    pub raw: Tensor,
    /// Renormalized combination; uniform with `tie_flag` set when the raw
    /// product is identically zero.
    pub p_final: Tensor,
    /// Argmax of `raw`; ties resolve in the fixed class order
    /// negative < neutral < positive and set `tie_flag`.
    pub class: usize,
    pub tie_flag: bool,
}

/// Contract violations on the inputs to [`combine`].
#[derive(Clone, Debug, PartialEq)]
pub enum EnsembleError {
    WrongLength { which: &'static str, got: usize },
    NotAProbability { which: &'static str, sum: f64 },
    NegativeEntry { which: &'static str, value: f64 },
}

impl fmt::Display for EnsembleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnsembleError::WrongLength { which, got } => {
                write!(f, "{which} has {got} entries, expected {NUM_CLASSES}")
            }
            EnsembleError::NotAProbability { which, sum } => {
                write!(f, "{which} sums to {sum}, not 1")
            }
            EnsembleError::NegativeEntry { which, value } => {
                write!(f, "{which} has a negative entry {value}")
            }
        }
    }
}

impl core::error::Error for EnsembleError {}

fn validate(which: &'static str, p: &Tensor) -> Result<(), EnsembleError> {
    if p.rank() != 1 || p.numel() != NUM_CLASSES {
        return Err(EnsembleError::WrongLength {
            which,
            got: p.numel(),
        });
    }
    if let Some(&v) = p.data().iter().find(|&&v| v < -1e-9) {
        return Err(EnsembleError::NegativeEntry { which, value: v });
    }
    let sum: f64 = p.data().iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(EnsembleError::NotAProbability { which, sum });
    }
    Ok(())
}

/// Element-wise-product combination.
pub fn combine(p_cnn: &Tensor, p_att: &Tensor) -> Result<Prediction, EnsembleError> {
    combine_mode(p_cnn, p_att, EnsembleMode::Product)
}

/// Combination under either mode. Both inputs must be probability vectors
/// over the three classes.
pub fn combine_mode(
    p_cnn: &Tensor,
    p_att: &Tensor,
    mode: EnsembleMode,
) -> Result<Prediction, EnsembleError> {
    validate("p_cnn", p_cnn)?;
    validate("p_att", p_att)?;
    let raw_data: Vec<f64> = match mode {
        EnsembleMode::Product => p_cnn
            .data()
            .iter()
            .zip(p_att.data())
            .map(|(a, b)| a * b)
            .collect(),
        EnsembleMode::WeightedAverage => p_cnn
            .data()
            .iter()
            .zip(p_att.data())
            .map(|(a, b)| 0.5 * (a + b))
            .collect(),
    };
    let raw = Tensor::vector(raw_data);
    let total: f64 = raw.data().iter().sum();
    let (p_final, degenerate) = if total > 0.0 {
        let mut p = raw.clone();
        p.scale(1.0 / total);
        (p, false)
    } else {
        (
            Tensor::filled(alloc::vec![NUM_CLASSES], 1.0 / NUM_CLASSES as f64),
            true,
        )
    };
    let class = raw.argmax();
    let tied = raw
        .data()
        .iter()
        .enumerate()
        .any(|(i, &v)| i != class && v == raw.data()[class]);
    Ok(Prediction {
        p_cnn: p_cnn.clone(),
        p_att: p_att.clone(),
        raw,
        p_final,
        class,
        tie_flag: tied || degenerate,
    })
}
