//! Attaching per-player crop features to sequences.
//!
//! The model only sees a `d_c`-vector per (frame, player); where it comes
//! from is pluggable. The synthetic provider re-simulates the generator's
//! crop model, which reproduces a generated dataset's features exactly. The
//! file provider ingests vectors produced by a real visual pipeline, keyed
//! by (sequence id, frame, agent slot), and rescales them into the `[0, 1]`
//! range the model expects.

use std::path::PathBuf;

use ndarray::{Array2, Array3};

use crate::data::Sequence;
use crate::error::DataError;
use crate::io::read_features;
use crate::rng::{derive_rng, stream};
use crate::synth::{simulate_crop_features, GenParams};

/// Where crop feature vectors come from.
#[derive(Debug, Clone)]
pub enum FeatureSource {
    /// Re-simulate with the generator's crop model; reproduces the features
    /// of a dataset generated with the same params bit-for-bit.
    Synthetic(GenParams),
    /// Read from a feature file. `value_range` declares the range of the
    /// stored values, which are affinely mapped onto `[0, 1]`.
    File {
        path: PathBuf,
        d_c: usize,
        value_range: (f64, f64),
    },
}

impl FeatureSource {
    pub fn validate(&self) -> Result<(), DataError> {
        match self {
            FeatureSource::Synthetic(params) => params.validate(),
            FeatureSource::File {
                d_c, value_range, ..
            } => {
                if *d_c == 0 {
                    return Err(DataError::BadParam(
                        "feature source d_c must be at least 1".to_string(),
                    ));
                }
                if !(value_range.0 < value_range.1) {
                    return Err(DataError::BadParam(format!(
                        "value_range must satisfy lo < hi, got ({}, {})",
                        value_range.0, value_range.1
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Per-attachment bookkeeping; the CLI logs these counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AttachReport {
    /// (frame, player) slots that received a feature vector.
    pub attached: usize,
    /// Valid slots the file had no record for; their crops are marked absent.
    pub missing: usize,
}

/// Populates `crop_features` and `crop_present` on every sequence.
///
/// Missing file keys are not an error — those slots get `crop_present =
/// false`, and the report says how many. Values outside the declared range
/// are an error: the range is a contract, and silently clamping would hide
/// a mis-declared pipeline.
pub fn attach_features(
    seqs: &[Sequence],
    source: &FeatureSource,
) -> Result<(Vec<Sequence>, AttachReport), DataError> {
    source.validate()?;
    let mut report = AttachReport::default();
    let mut out = Vec::with_capacity(seqs.len());

    match source {
        FeatureSource::Synthetic(params) => {
            for seq in seqs {
                if seq.normalized {
                    return Err(DataError::Invariant(
                        "synthetic crop features need positions in meters; attach before normalizing"
                            .to_string(),
                    ));
                }
                let mut rng = derive_rng(&[params.seed, seq.id, stream::CROPS]);
                let (features, present) = simulate_crop_features(seq, params, &mut rng);
                report.attached += present.iter().filter(|p| **p).count();
                let mut seq = seq.clone();
                seq.crop_features = features;
                seq.crop_present = present;
                out.push(seq);
            }
        }
        FeatureSource::File {
            path,
            d_c,
            value_range,
        } => {
            let table = read_features(path)?;
            if table.dim() != *d_c {
                return Err(DataError::FeatureDimMismatch {
                    found: table.dim(),
                    expected: *d_c,
                });
            }
            let (lo, hi) = *value_range;
            for seq in seqs {
                let t_n = seq.n_frames();
                let n = seq.n_agents();
                let mut features = Array3::zeros((t_n, n, *d_c));
                let mut present = Array2::from_elem((t_n, n), false);
                for t in 0..t_n {
                    for a in 0..n {
                        if !seq.agent_valid[a] {
                            continue;
                        }
                        match table.get(seq.id, t, a) {
                            None => report.missing += 1,
                            Some(values) => {
                                for (k, &v) in values.iter().enumerate() {
                                    if v < lo || v > hi {
                                        return Err(DataError::Invariant(format!(
                                            "feature value {v} outside declared range [{lo}, {hi}] \
                                             at sequence {}, frame {t}, agent {a}",
                                            seq.id
                                        )));
                                    }
                                    features[[t, a, k]] = (v - lo) / (hi - lo);
                                }
                                present[[t, a]] = true;
                                report.attached += 1;
                            }
                        }
                    }
                }
                let mut seq = seq.clone();
                seq.crop_features = features;
                seq.crop_present = present;
                out.push(seq);
            }
        }
    }
    Ok((out, report))
}
