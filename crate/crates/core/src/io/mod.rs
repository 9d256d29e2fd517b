//! Readers and writers for the interchange formats and the scene manifest.
//!
//! Every format has a reader/writer pair generic over `Read`/`Write` plus
//! `load_*`/`save_*` wrappers taking a path. Byte-level layouts are documented in
//! `docs/formats.md`.

pub mod binary;
pub mod image;
pub mod manifest;
pub mod obj;
pub mod ply;
pub mod tum;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use binary::{load_depth, load_grid, read_depth, read_grid, save_depth, save_grid, write_depth, write_grid};
pub use image::{load_image, read_image, save_pnm, write_pnm};
pub use manifest::{load_manifest, SceneManifest, Split};
pub use obj::{load_obj, read_obj, save_obj, write_obj};
pub use ply::{
    load_gaussians, load_mesh_ply, load_point_cloud, read_gaussians, read_mesh_ply, read_point_cloud, save_gaussians,
    save_mesh_ply, save_point_cloud, write_gaussians, write_mesh_ply, write_point_cloud, PlyFormat,
};
pub use tum::{load_tum, read_tum, save_tum, write_tum, TumReport};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("malformed file: {0}")]
    Format(String),
    #[error("unsupported format: {0}")]
    Unsupported(String),
    #[error("truncated body: element '{element}' expected {expected} entries, found {actual}")]
    Truncated { element: String, expected: usize, actual: usize },
    #[error("missing referenced files: {}", .0.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    MissingFiles(Vec<PathBuf>),
    #[error("invalid data: {0}")]
    Invalid(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl IoError {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        IoError::Parse { line, message: message.into() }
    }
}

pub(crate) fn open(path: &Path) -> Result<BufReader<File>, IoError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| IoError::File { path: path.to_path_buf(), source })
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>, IoError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| IoError::File { path: path.to_path_buf(), source })
}
