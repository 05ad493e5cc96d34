//! File formats, oracle transports, artifact export and the command-line
//! front end around `pixattack-core`.

use std::path::PathBuf;

use pixattack_core::attention::AttentionError;
use pixattack_core::masking::MaskError;
use pixattack_core::toy::ModelError;
use pixattack_core::ImageError;
use thiserror::Error;

pub mod cli;
pub mod config;
pub mod executor;
pub mod export;
pub mod files;
pub mod kv;
pub mod model_file;
pub mod pnm;
pub mod setup;
pub mod transport;
pub mod visualize;
pub mod wire;

pub use executor::ThreadedExecutor;
pub use transport::{HttpOracle, SubprocessOracle};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("PNM: {0}")]
    Pnm(String),
    #[error("PNG: {0}")]
    Png(#[from] image::ImageError),
    #[error("unsupported file extension: {}", .0.display())]
    UnsupportedExtension(PathBuf),
    #[error("size mismatch: expected {}x{}, found {}x{}", expected.0, expected.1, found.0, found.1)]
    SizeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("entry ({row},{col},{channel}) lies outside the image")]
    OutOfImage { row: usize, col: usize, channel: usize },
    #[error("entry at ({row},{col}) lies outside the mask")]
    OutsideMask { row: usize, col: usize },
    #[error("line {line}: {message}")]
    KeyValue { line: usize, message: String },
    #[error("CSV line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Attention(#[from] AttentionError),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
