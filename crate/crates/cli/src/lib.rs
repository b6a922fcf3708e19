//! File formats and command implementations for the `mixsent` binary.
//!
//! Everything numeric lives in `mixsent-core`; this crate owns the corpus,
//! vocabulary, checkpoint, report and export formats plus the subcommand
//! plumbing, so the core stays free of IO.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod corpus_io;
pub mod error;
pub mod vocab_io;

pub use error::CliError;

use std::fs;
use std::path::{Path, PathBuf};

/// Writes via a sibling temp file and a rename, so failures never leave a
/// partial output behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut tmp: PathBuf = path.to_path_buf();
    let mut name = tmp
        .file_name()
        .ok_or_else(|| CliError::Usage(format!("`{}` has no file name", path.display())))?
        .to_os_string();
    name.push(".tmp");
    tmp.set_file_name(name);
    let write = fs::write(&tmp, bytes).map_err(|source| CliError::Io {
        path: tmp.clone(),
        source,
    });
    if let Err(e) = write {
        let _ = fs::remove_file(&tmp);
        return Err(e);
    }
    fs::rename(&tmp, path).map_err(|source| {
        let _ = fs::remove_file(&tmp);
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    })
}

pub fn read_to_string(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}
