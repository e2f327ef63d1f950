//! File formats: band files with a JSON manifest for rasters, GeoJSON for
//! vector layers and output maps, and small CSV tables for labels, training
//! blocks, and parcel features.
//!
//! All writers are deterministic: JSON objects serialize with sorted keys,
//! floats use the shortest round-trip representation, and band values are
//! written with nine significant digits. Re-running a stage overwrites its
//! outputs byte for byte.

pub mod bandfile;
pub mod geojson;
pub mod tables;

use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub(crate) fn parse_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse { path: path.display().to_string(), message: message.into() }
}

/// Hex SHA-256 of a file, for dataset manifests and determinism checks.
pub fn sha256_file(path: &Path) -> Result<String> {
    use sha2::{Digest, Sha256};
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hex::encode(hasher.finalize()))
}
