//! Versioned JSON serialization of the BPE vocabulary, plus the SHA-256
//! hash checkpoints use to pin the exact vocabulary they were trained with.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use mixsent_core::bpe::BpeVocab;

use crate::error::CliError;
use crate::{read_bytes, write_atomic};

pub const VOCAB_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct VocabFile {
    version: u32,
    merges: Vec<(String, String)>,
    tokens: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Compact one-line JSON plus a trailing newline; byte-deterministic for a
/// given vocabulary.
pub fn vocab_to_bytes(vocab: &BpeVocab) -> Vec<u8> {
    let file = VocabFile {
        version: VOCAB_VERSION,
        merges: vocab.merges().to_vec(),
        tokens: vocab.tokens().to_vec(),
    };
    let mut bytes = serde_json::to_vec(&file).expect("vocab serialization cannot fail");
    bytes.push(b'\n');
    bytes
}

pub fn vocab_from_bytes(bytes: &[u8]) -> Result<BpeVocab, CliError> {
    let file: VocabFile = serde_json::from_slice(bytes)
        .map_err(|e| CliError::Data(format!("vocabulary file: {e}")))?;
    if file.version != VOCAB_VERSION {
        return Err(CliError::Data(format!(
            "vocabulary file version {} is not supported (expected {VOCAB_VERSION})",
            file.version
        )));
    }
    BpeVocab::from_parts(file.merges, file.tokens).map_err(|e| CliError::Data(e.to_string()))
}

/// Returns the hash of the bytes written, the value checkpoints record.
pub fn save_vocab(path: &Path, vocab: &BpeVocab) -> Result<String, CliError> {
    let bytes = vocab_to_bytes(vocab);
    write_atomic(path, &bytes)?;
    Ok(sha256_hex(&bytes))
}

/// Loads a vocabulary and the hash of the file's exact bytes.
pub fn load_vocab(path: &Path) -> Result<(BpeVocab, String), CliError> {
    let bytes = read_bytes(path)?;
    let vocab = vocab_from_bytes(&bytes)?;
    Ok((vocab, sha256_hex(&bytes)))
}
