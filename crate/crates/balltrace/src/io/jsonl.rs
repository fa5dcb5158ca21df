//! JSON-lines sequence files.
//!
//! The plain-text sibling of the binary container: one header object on the
//! first line, then one JSON object per sequence. Meant for hand-authored
//! fixtures and for eyeballing data with standard text tools, so the schema
//! uses natural nested arrays (`positions[t][n] = [x, y]`) rather than flat
//! buffers. Values round-trip exactly: serde_json emits the shortest decimal
//! that parses back to the same f64.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetMeta};
use crate::data::{BallState, PitchSpec, Sequence};
use crate::error::DataError;

const FORMAT_NAME: &str = "balltrace-sequences";
const VERSION: u16 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u16,
    pitch: PitchSpec,
    frame_rate_hz: f64,
    n_frames: usize,
    n_agents: usize,
    crop_dim: usize,
}

#[derive(Serialize, Deserialize)]
struct Record {
    id: u64,
    normalized: bool,
    frame_rate_hz: f64,
    /// `positions[t][n] = [x, y]`
    positions: Vec<Vec<[f64; 2]>>,
    /// `player_types[n] = [offense, defense]` one-hot; `[0, 0]` for padding.
    player_types: Vec<[f64; 2]>,
    /// `crop_features[t][n]` is a `d_c`-vector; empty when `d_c = 0`.
    crop_features: Vec<Vec<Vec<f64>>>,
    crop_present: Vec<Vec<bool>>,
    agent_valid: Vec<bool>,
    ball_positions: Vec<[f64; 2]>,
    ball_states: Vec<BallState>,
    possessor: Vec<usize>,
}

impl Record {
    fn from_sequence(seq: &Sequence) -> Record {
        let t = seq.n_frames();
        let n = seq.n_agents();
        let d_c = seq.crop_dim();
        Record {
            id: seq.id,
            normalized: seq.normalized,
            frame_rate_hz: seq.frame_rate_hz,
            positions: (0..t)
                .map(|f| {
                    (0..n)
                        .map(|a| [seq.positions[[f, a, 0]], seq.positions[[f, a, 1]]])
                        .collect()
                })
                .collect(),
            player_types: (0..n)
                .map(|a| [seq.player_types[[a, 0]], seq.player_types[[a, 1]]])
                .collect(),
            crop_features: (0..t)
                .map(|f| {
                    (0..n)
                        .map(|a| (0..d_c).map(|k| seq.crop_features[[f, a, k]]).collect())
                        .collect()
                })
                .collect(),
            crop_present: (0..t)
                .map(|f| (0..n).map(|a| seq.crop_present[[f, a]]).collect())
                .collect(),
            agent_valid: seq.agent_valid.clone(),
            ball_positions: (0..t)
                .map(|f| [seq.ball_positions[[f, 0]], seq.ball_positions[[f, 1]]])
                .collect(),
            ball_states: seq.ball_states.clone(),
            possessor: seq.possessor.clone(),
        }
    }

    fn into_sequence(self, line: usize) -> Result<Sequence, DataError> {
        let bad = |msg: String| DataError::Invariant(format!("jsonl line {line}: {msg}"));
        let t = self.positions.len();
        let n = self.player_types.len();
        for (f, row) in self.positions.iter().enumerate() {
            if row.len() != n {
                return Err(bad(format!(
                    "positions frame {f} has {} agents, expected {n}",
                    row.len()
                )));
            }
        }
        if self.crop_features.len() != t || self.crop_present.len() != t {
            return Err(bad(format!(
                "crop arrays must have {t} frames, got {} and {}",
                self.crop_features.len(),
                self.crop_present.len()
            )));
        }
        let d_c = self
            .crop_features
            .first()
            .and_then(|row| row.first())
            .map(|v| v.len())
            .unwrap_or(0);
        for (f, row) in self.crop_features.iter().enumerate() {
            if row.len() != n {
                return Err(bad(format!("crop_features frame {f} must have {n} agents")));
            }
            for (a, v) in row.iter().enumerate() {
                if v.len() != d_c {
                    return Err(bad(format!(
                        "crop feature at frame {f}, agent {a} has {} components, expected {d_c}",
                        v.len()
                    )));
                }
            }
        }
        for (f, row) in self.crop_present.iter().enumerate() {
            if row.len() != n {
                return Err(bad(format!("crop_present frame {f} must have {n} agents")));
            }
        }

        let mut positions = Array3::zeros((t, n, 2));
        let mut crop_features = Array3::zeros((t, n, d_c));
        let mut crop_present = Array2::from_elem((t, n), false);
        for f in 0..t {
            for a in 0..n {
                positions[[f, a, 0]] = self.positions[f][a][0];
                positions[[f, a, 1]] = self.positions[f][a][1];
                crop_present[[f, a]] = self.crop_present[f][a];
                for k in 0..d_c {
                    crop_features[[f, a, k]] = self.crop_features[f][a][k];
                }
            }
        }
        let mut player_types = Array2::zeros((n, 2));
        for a in 0..n {
            player_types[[a, 0]] = self.player_types[a][0];
            player_types[[a, 1]] = self.player_types[a][1];
        }
        let mut ball_positions = Array2::zeros((t, 2));
        if self.ball_positions.len() != t {
            return Err(bad(format!(
                "ball_positions must have {t} frames, got {}",
                self.ball_positions.len()
            )));
        }
        for f in 0..t {
            ball_positions[[f, 0]] = self.ball_positions[f][0];
            ball_positions[[f, 1]] = self.ball_positions[f][1];
        }

        let seq = Sequence {
            id: self.id,
            positions,
            player_types,
            crop_features,
            crop_present,
            agent_valid: self.agent_valid,
            ball_positions,
            ball_states: self.ball_states,
            possessor: self.possessor,
            frame_rate_hz: self.frame_rate_hz,
            normalized: self.normalized,
        };
        seq.check_shapes()
            .map_err(|e| bad(format!("inconsistent shapes: {e}")))?;
        Ok(seq)
    }
}

pub fn write_sequences_jsonl(
    path: impl AsRef<Path>,
    seqs: &[Sequence],
    pitch: &PitchSpec,
) -> Result<(), DataError> {
    let meta = DatasetMeta::from_sequences(seqs, pitch);
    let mut w = BufWriter::new(File::create(path)?);
    let header = Header {
        format: FORMAT_NAME.to_string(),
        version: VERSION,
        pitch: meta.pitch,
        frame_rate_hz: meta.frame_rate_hz,
        n_frames: meta.n_frames,
        n_agents: meta.n_agents,
        crop_dim: meta.crop_dim,
    };
    serde_json::to_writer(&mut w, &header)?;
    writeln!(w)?;
    for seq in seqs {
        serde_json::to_writer(&mut w, &Record::from_sequence(seq))?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset_jsonl(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate();

    let header: Header = loop {
        match lines.next() {
            Some((_, line)) => {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                break serde_json::from_str(&line)?;
            }
            None => {
                return Err(DataError::Invariant(
                    "jsonl file is empty: expected a header line".to_string(),
                ))
            }
        }
    };
    if header.format != FORMAT_NAME {
        return Err(DataError::BadMagic {
            expected: "balltrace-sequences JSONL",
        });
    }
    if header.version != VERSION {
        return Err(DataError::VersionMismatch {
            found: header.version,
            expected: VERSION,
        });
    }

    let mut sequences = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line)?;
        let seq = record.into_sequence(idx + 1)?;
        if seq.crop_dim() != header.crop_dim {
            return Err(DataError::FeatureDimMismatch {
                found: seq.crop_dim(),
                expected: header.crop_dim,
            });
        }
        sequences.push(seq);
    }

    Ok(Dataset {
        meta: DatasetMeta {
            pitch: header.pitch,
            frame_rate_hz: header.frame_rate_hz,
            n_frames: header.n_frames,
            n_agents: header.n_agents,
            crop_dim: header.crop_dim,
        },
        sequences,
    })
}
