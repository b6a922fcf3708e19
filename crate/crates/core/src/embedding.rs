//! Trainable subword embedding table, with optional seeding from an external
//! per-subword vector file.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::bpe::{BpeVocab, SubwordSequence, PAD_ID};
use crate::ops::{embedding_lookup, OpError};
use crate::tensor::Tensor;

/// `[V × D]` lookup table. Row 0 (the pad id) is pinned to zero and never
/// receives gradient updates.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    pub weights: Tensor,
    pub trainable: bool,
}

/// External vector-file failures, reported with the offending line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum VectorFileError {
    Malformed { line: usize, reason: String },
    DimMismatch { line: usize, expected: usize, got: usize },
}

impl fmt::Display for VectorFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VectorFileError::Malformed { line, reason } => write!(f, "line {line}: {reason}"),
            VectorFileError::DimMismatch {
                line,
                expected,
                got,
            } => write!(
                f,
                "line {line}: vector has {got} components, expected {expected}"
            ),
        }
    }
}

impl core::error::Error for VectorFileError {}

impl EmbeddingTable {
    /// Uniform ±0.1 initialization with the pad row zeroed.
    pub fn init<R: Rng>(vocab: usize, dim: usize, trainable: bool, rng: &mut R) -> Self {
        let mut weights = Tensor::zeros(alloc::vec![vocab, dim]);
        for v in weights.data_mut() {
            *v = rng.gen_range(-0.1..0.1);
        }
        weights.row_mut(PAD_ID as usize).fill(0.0);
        Self { weights, trainable }
    }

    pub fn vocab(&self) -> usize {
        self.weights.dim(0)
    }

    pub fn dim(&self) -> usize {
        self.weights.dim(1)
    }

    /// Row gather over the full padded sequence; pad positions yield zero
    /// rows because the pad row is zero.
    pub fn embed(&self, seq: &SubwordSequence) -> Result<Tensor, OpError> {
        embedding_lookup(&self.weights, &seq.ids)
    }

    /// Builds a table from a `token<TAB>v1 v2 ... vD` file. Listed tokens get
    /// their vectors (last occurrence wins), everything else keeps the random
    /// initialization, and the pad row stays zero. Returns warnings for
    /// duplicate and unknown tokens.
    pub fn parse_external<R: Rng>(
        text: &str,
        vocab: &BpeVocab,
        default_dim: usize,
        trainable: bool,
        rng: &mut R,
    ) -> Result<(Self, Vec<String>), VectorFileError> {
        let mut entries: Vec<(usize, String, Vec<f64>)> = Vec::new();
        let mut dim: Option<usize> = None;
        for (idx, raw_line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
            if line.trim().is_empty() {
                continue;
            }
            let Some((token, rest)) = line.split_once('\t') else {
                return Err(VectorFileError::Malformed {
                    line: lineno,
                    reason: "expected `token<TAB>v1 v2 ... vD`".to_string(),
                });
            };
            let mut values = Vec::new();
            for field in rest.split_whitespace() {
                let v: f64 = field.parse().map_err(|_| VectorFileError::Malformed {
                    line: lineno,
                    reason: format!("`{field}` is not a number"),
                })?;
                values.push(v);
            }
            if values.is_empty() {
                return Err(VectorFileError::Malformed {
                    line: lineno,
                    reason: "vector has no components".to_string(),
                });
            }
            match dim {
                None => dim = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(VectorFileError::DimMismatch {
                        line: lineno,
                        expected: d,
                        got: values.len(),
                    })
                }
                _ => {}
            }
            entries.push((lineno, token.to_string(), values));
        }

        let dim = dim.unwrap_or(default_dim);
        let mut table = Self::init(vocab.size(), dim, trainable, rng);
        let mut warnings = Vec::new();
        let mut seen: alloc::collections::BTreeMap<u32, usize> = alloc::collections::BTreeMap::new();
        for (lineno, token, values) in entries {
            let Some(id) = vocab.id_of(&token) else {
                warnings.push(format!(
                    "line {lineno}: token `{token}` is not in the vocabulary; skipped"
                ));
                continue;
            };
            if id == PAD_ID {
                warnings.push(format!(
                    "line {lineno}: the pad row is pinned to zero; skipped"
                ));
                continue;
            }
            if let Some(prev) = seen.insert(id, lineno) {
                warnings.push(format!(
                    "line {lineno}: duplicate vector for `{token}` (line {prev} overridden)"
                ));
            }
            table.weights.row_mut(id as usize).copy_from_slice(&values);
        }
        Ok((table, warnings))
    }
}
