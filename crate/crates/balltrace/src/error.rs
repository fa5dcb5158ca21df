//! Error types shared across the crate.

use thiserror::Error;

/// Errors from sequence construction, validation, and on-disk formats.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("non-finite coordinate at frame {frame}, agent {agent}")]
    NonFinite { frame: usize, agent: usize },

    #[error("sequence invariant violated: {0}")]
    Invariant(String),

    #[error("cannot pad {n} agents into {n_max} slots")]
    PadTooSmall { n: usize, n_max: usize },

    #[error("format version mismatch: file has {found}, expected {expected}")]
    VersionMismatch { found: u16, expected: u16 },

    #[error("bad magic bytes: not a {expected} file")]
    BadMagic { expected: &'static str },

    #[error("truncated record at sequence {index}")]
    TruncatedRecord { index: usize },

    #[error("header/payload length disagreement at sequence {index}: header says {declared} bytes, record holds {actual}")]
    LengthMismatch {
        index: usize,
        declared: usize,
        actual: usize,
    },

    #[error("feature dimension mismatch: file has d_c={found}, expected {expected}")]
    FeatureDimMismatch { found: usize, expected: usize },

    #[error("invalid parameter: {0}")]
    BadParam(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Errors from model construction and evaluation.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("config/params shape mismatch for {name}: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("non-finite intermediate value in {block}")]
    NonFinite { block: String },

    #[error("sequence has no crop features (d_c=0) but the crops modality is enabled; attach features or disable the modality")]
    MissingCrops,

    #[error("frame {frame} has no valid agents")]
    AllInvalidFrame { frame: usize },

    #[error("input shape mismatch: {0}")]
    BadInput(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Errors from loss evaluation.
#[derive(Debug, Error)]
pub enum LossError {
    #[error("length mismatch: predictions have {pred} frames, ground truth has {gt}")]
    LengthMismatch { pred: usize, gt: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("ground-truth possessor {agent} at frame {frame} is not a valid agent")]
    PossessorOnInvalidAgent { frame: usize, agent: usize },

    #[error("loss weights must have at least one strictly positive component")]
    AllZeroWeights,
}

/// Errors from the training loop.
#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training diverged: non-finite loss at step {step}")]
    Diverged { step: usize },

    #[error("pretrain phase requires a mask spec")]
    MissingMaskSpec,

    #[error("finetune phase requires an initial checkpoint")]
    MissingInitCheckpoint,

    #[error("empty dataset: {0}")]
    EmptyDataset(&'static str),

    #[error(transparent)]
    Data(#[from] DataError),

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error(transparent)]
    Loss(#[from] LossError),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
