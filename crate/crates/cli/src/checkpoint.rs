//! Checkpoint container: 4-byte magic, a little-endian u32 header length, a
//! JSON header (version, config snapshot, vocabulary hash, named parameter
//! shapes) and the raw little-endian f64 parameter arrays in header order.
//!
//! Loading rebuilds the exact parameter bits, so a saved model's forward
//! pass is bit-identical to the original.

use std::path::Path;

use serde::{Deserialize, Serialize};

use mixsent_core::model::ModelParams;
use mixsent_core::train::TrainConfig;

use crate::config::ConfigDto;
use crate::error::CliError;
use crate::{read_bytes, write_atomic};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MXCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ParamInfo {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    config: ConfigDto,
    vocab_hash: String,
    epoch: usize,
    best_val_weighted_f1: f64,
    params: Vec<ParamInfo>,
}

/// A trained model plus everything needed to rebuild and validate it.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub config: TrainConfig,
    pub vocab_hash: String,
    pub epoch: usize,
    pub best_val_weighted_f1: f64,
}

pub fn checkpoint_to_bytes(ck: &Checkpoint) -> Vec<u8> {
    let tensors = ck.params.tensors();
    let header = Header {
        version: CHECKPOINT_VERSION,
        config: ConfigDto::from(&ck.config),
        vocab_hash: ck.vocab_hash.clone(),
        epoch: ck.epoch,
        best_val_weighted_f1: ck.best_val_weighted_f1,
        params: tensors
            .iter()
            .map(|(name, t)| ParamInfo {
                name: (*name).to_string(),
                shape: t.shape().to_vec(),
            })
            .collect(),
    };
    let header_bytes = serde_json::to_vec(&header).expect("header serialization cannot fail");
    let payload: usize = tensors.iter().map(|(_, t)| t.numel() * 8).sum();
    let mut out = Vec::with_capacity(4 + 4 + header_bytes.len() + payload);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(header_bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_bytes);
    for (_, t) in tensors {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn corrupt(msg: impl Into<String>) -> CliError {
    CliError::Data(msg.into())
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<Checkpoint, CliError> {
    if bytes.len() < 8 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(corrupt("not a checkpoint file (bad magic)"));
    }
    let header_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let body = bytes
        .get(8..8 + header_len)
        .ok_or_else(|| corrupt("truncated checkpoint header"))?;
    let header: Header =
        serde_json::from_slice(body).map_err(|e| corrupt(format!("checkpoint header: {e}")))?;
    if header.version != CHECKPOINT_VERSION {
        return Err(corrupt(format!(
            "checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
            header.version
        )));
    }
    let config = header.config.into_train_config()?;
    let vocab = header
        .params
        .first()
        .filter(|p| p.name == "embedding_cnn.table" && p.shape.len() == 2)
        .map(|p| p.shape[0])
        .ok_or_else(|| corrupt("checkpoint header lists no embedding table"))?;

    let mut params = ModelParams::zeros(&config.dims(vocab));
    let mut cursor = 8 + header_len;
    let tensors = params.tensors_mut();
    if tensors.len() != header.params.len() {
        return Err(corrupt(format!(
            "checkpoint lists {} parameters, expected {}",
            header.params.len(),
            tensors.len()
        )));
    }
    for ((name, tensor), info) in tensors.into_iter().zip(&header.params) {
        if info.name != name {
            return Err(corrupt(format!(
                "checkpoint parameter `{}` does not match expected `{name}`",
                info.name
            )));
        }
        if info.shape != tensor.shape() {
            return Err(corrupt(format!(
                "parameter `{name}` has shape {:?}, expected {:?}",
                info.shape,
                tensor.shape()
            )));
        }
        let n = tensor.numel();
        let end = cursor + 8 * n;
        let chunk = bytes
            .get(cursor..end)
            .ok_or_else(|| corrupt(format!("checkpoint truncated inside `{name}`")))?;
        for (k, v) in tensor.data_mut().iter_mut().enumerate() {
            *v = f64::from_le_bytes(chunk[8 * k..8 * k + 8].try_into().unwrap());
        }
        cursor = end;
    }
    if cursor != bytes.len() {
        return Err(corrupt("trailing bytes after the last parameter"));
    }
    Ok(Checkpoint {
        params,
        config,
        vocab_hash: header.vocab_hash,
        epoch: header.epoch,
        best_val_weighted_f1: header.best_val_weighted_f1,
    })
}

pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<(), CliError> {
    write_atomic(path, &checkpoint_to_bytes(ck))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    checkpoint_from_bytes(&read_bytes(path)?)
}
