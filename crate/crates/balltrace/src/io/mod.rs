//! On-disk formats: the binary sequence container, the JSON-lines variant
//! for hand-authored fixtures, and the crop-feature file.
//!
//! Byte-level layouts are documented in `book/src/file-formats.md`.

mod binary;
mod features;
mod jsonl;

pub use binary::{read_dataset_binary, write_sequences_binary, SEQ_FORMAT_VERSION};
pub use features::{read_features, write_features, FeatureRecord, FeatureTable, FEAT_FORMAT_VERSION};
pub use jsonl::{read_dataset_jsonl, write_sequences_jsonl};

use std::fs::File;
use std::io::Read;
use std::path::Path;

use crate::data::{PitchSpec, Sequence};
use crate::error::DataError;

/// Dataset-level metadata carried by the sequence container header.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub pitch: PitchSpec,
    pub frame_rate_hz: f64,
    /// Representative frame count (first sequence).
    pub n_frames: usize,
    /// Maximum agent slots across sequences.
    pub n_agents: usize,
    /// Crop feature dimension, uniform across the file.
    pub crop_dim: usize,
}

/// A sequence file in memory: header metadata plus the records.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub sequences: Vec<Sequence>,
}

impl DatasetMeta {
    pub fn from_sequences(seqs: &[Sequence], pitch: &PitchSpec) -> Self {
        DatasetMeta {
            pitch: *pitch,
            frame_rate_hz: seqs.first().map(|s| s.frame_rate_hz).unwrap_or(0.0),
            n_frames: seqs.first().map(|s| s.n_frames()).unwrap_or(0),
            n_agents: seqs.iter().map(|s| s.n_agents()).max().unwrap_or(0),
            crop_dim: seqs.first().map(|s| s.crop_dim()).unwrap_or(0),
        }
    }
}

/// Writes sequences to `path`, choosing the format by extension:
/// `.jsonl` writes the plain-text variant, anything else the binary container.
pub fn write_sequences(
    path: impl AsRef<Path>,
    seqs: &[Sequence],
    pitch: &PitchSpec,
) -> Result<(), DataError> {
    let path = path.as_ref();
    if path.extension().and_then(|e| e.to_str()) == Some("jsonl") {
        write_sequences_jsonl(path, seqs, pitch)
    } else {
        write_sequences_binary(path, seqs, pitch)
    }
}

/// Reads a sequence file, sniffing the format from the leading bytes.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let mut head = [0u8; 4];
    let n = File::open(path)?.read(&mut head)?;
    if n == 4 && &head == binary::MAGIC {
        read_dataset_binary(path)
    } else {
        read_dataset_jsonl(path)
    }
}

/// Reads just the sequences, discarding header metadata.
pub fn read_sequences(path: impl AsRef<Path>) -> Result<Vec<Sequence>, DataError> {
    Ok(read_dataset(path)?.sequences)
}
