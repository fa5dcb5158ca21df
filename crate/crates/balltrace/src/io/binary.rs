//! Versioned binary sequence container.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! header:  magic "BTSQ" | version u16 | t u16 | n u16 | d_c u16
//!          | frame_rate f32 | pitch_length f32 | pitch_width f32
//!          | n_sequences u32
//! record:  record_len u32 (bytes after this field)
//!          | id u64 | t u16 | n u16 | d_c u16 | flags u8 | frame_rate f32
//!          | named arrays
//! array:   name_len u8 | name bytes | dtype u8 (0=f32, 1=u16, 2=u8)
//!          | count u32 | payload
//! ```
//!
//! Positions, crops, and ball coordinates are stored as 32-bit floats;
//! possessor indices as 16-bit integers. Team rows are stored as one byte per
//! agent (0 = offense, 1 = defense, 255 = padding). The round trip is
//! bit-exact whenever the in-memory values are representable in 32 bits,
//! which holds for everything the generator and readers produce.

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array2, Array3};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::data::{BallState, PitchSpec, Sequence};
use crate::error::DataError;

use super::{Dataset, DatasetMeta};

pub(super) const MAGIC: &[u8; 4] = b"BTSQ";
pub const SEQ_FORMAT_VERSION: u16 = 1;

const DTYPE_F32: u8 = 0;
const DTYPE_U16: u8 = 1;
const DTYPE_U8: u8 = 2;

const TEAM_OFFENSE: u8 = 0;
const TEAM_DEFENSE: u8 = 1;
const TEAM_NONE: u8 = 255;

pub fn write_sequences_binary(
    path: impl AsRef<Path>,
    seqs: &[Sequence],
    pitch: &PitchSpec,
) -> Result<(), DataError> {
    let meta = DatasetMeta::from_sequences(seqs, pitch);
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_u16::<LittleEndian>(SEQ_FORMAT_VERSION)?;
    w.write_u16::<LittleEndian>(meta.n_frames as u16)?;
    w.write_u16::<LittleEndian>(meta.n_agents as u16)?;
    w.write_u16::<LittleEndian>(meta.crop_dim as u16)?;
    w.write_f32::<LittleEndian>(meta.frame_rate_hz as f32)?;
    w.write_f32::<LittleEndian>(pitch.length as f32)?;
    w.write_f32::<LittleEndian>(pitch.width as f32)?;
    w.write_u32::<LittleEndian>(seqs.len() as u32)?;
    for seq in seqs {
        let record = encode_record(seq)?;
        w.write_u32::<LittleEndian>(record.len() as u32)?;
        w.write_all(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset_binary(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(DataError::BadMagic { expected: "BTSQ" });
    }
    let version = r.read_u16::<LittleEndian>()?;
    if version != SEQ_FORMAT_VERSION {
        return Err(DataError::VersionMismatch {
            found: version,
            expected: SEQ_FORMAT_VERSION,
        });
    }
    let n_frames = r.read_u16::<LittleEndian>()? as usize;
    let n_agents = r.read_u16::<LittleEndian>()? as usize;
    let crop_dim = r.read_u16::<LittleEndian>()? as usize;
    let frame_rate_hz = r.read_f32::<LittleEndian>()? as f64;
    let length = r.read_f32::<LittleEndian>()? as f64;
    let width = r.read_f32::<LittleEndian>()? as f64;
    let n_sequences = r.read_u32::<LittleEndian>()? as usize;

    let mut sequences = Vec::with_capacity(n_sequences);
    for index in 0..n_sequences {
        let declared = match r.read_u32::<LittleEndian>() {
            Ok(len) => len as usize,
            Err(_) => return Err(DataError::TruncatedRecord { index }),
        };
        let mut record = vec![0u8; declared];
        r.read_exact(&mut record)
            .map_err(|_| DataError::TruncatedRecord { index })?;
        let (seq, consumed) = decode_record(&record, index)?;
        if consumed != declared {
            return Err(DataError::LengthMismatch {
                index,
                declared,
                actual: consumed,
            });
        }
        if seq.crop_dim() != crop_dim {
            return Err(DataError::FeatureDimMismatch {
                found: seq.crop_dim(),
                expected: crop_dim,
            });
        }
        sequences.push(seq);
    }

    Ok(Dataset {
        meta: DatasetMeta {
            pitch: PitchSpec { length, width },
            frame_rate_hz,
            n_frames,
            n_agents,
            crop_dim,
        },
        sequences,
    })
}

fn encode_record(seq: &Sequence) -> Result<Vec<u8>, DataError> {
    let t = seq.n_frames();
    let n = seq.n_agents();
    let d_c = seq.crop_dim();
    let mut buf = Vec::new();
    buf.write_u64::<LittleEndian>(seq.id)?;
    buf.write_u16::<LittleEndian>(t as u16)?;
    buf.write_u16::<LittleEndian>(n as u16)?;
    buf.write_u16::<LittleEndian>(d_c as u16)?;
    buf.write_u8(seq.normalized as u8)?;
    buf.write_f32::<LittleEndian>(seq.frame_rate_hz as f32)?;

    write_f32_array(&mut buf, "positions", seq.positions.iter())?;

    let mut teams = Vec::with_capacity(n);
    for agent in 0..n {
        let row = seq.player_types.row(agent);
        let code = if row[0] == 1.0 && row[1] == 0.0 {
            TEAM_OFFENSE
        } else if row[0] == 0.0 && row[1] == 1.0 {
            TEAM_DEFENSE
        } else if row[0] == 0.0 && row[1] == 0.0 {
            TEAM_NONE
        } else {
            return Err(DataError::Invariant(format!(
                "agent {agent} type row [{}, {}] is not encodable",
                row[0], row[1]
            )));
        };
        teams.push(code);
    }
    write_u8_array(&mut buf, "types", &teams)?;

    write_f32_array(&mut buf, "crops", seq.crop_features.iter())?;
    let present: Vec<u8> = seq.crop_present.iter().map(|p| *p as u8).collect();
    write_u8_array(&mut buf, "crop_present", &present)?;
    let valid: Vec<u8> = seq.agent_valid.iter().map(|v| *v as u8).collect();
    write_u8_array(&mut buf, "agent_valid", &valid)?;
    write_f32_array(&mut buf, "ball", seq.ball_positions.iter())?;
    let states: Vec<u8> = seq.ball_states.iter().map(|s| s.code()).collect();
    write_u8_array(&mut buf, "states", &states)?;
    let poss: Vec<u16> = seq.possessor.iter().map(|p| *p as u16).collect();
    write_u16_array(&mut buf, "possessor", &poss)?;
    Ok(buf)
}

fn decode_record(record: &[u8], index: usize) -> Result<(Sequence, usize), DataError> {
    let mut r = record;
    let total = record.len();
    let trunc = || DataError::TruncatedRecord { index };

    let id = r.read_u64::<LittleEndian>().map_err(|_| trunc())?;
    let t = r.read_u16::<LittleEndian>().map_err(|_| trunc())? as usize;
    let n = r.read_u16::<LittleEndian>().map_err(|_| trunc())? as usize;
    let d_c = r.read_u16::<LittleEndian>().map_err(|_| trunc())? as usize;
    let flags = r.read_u8().map_err(|_| trunc())?;
    let frame_rate_hz = r.read_f32::<LittleEndian>().map_err(|_| trunc())? as f64;

    let mut positions = None;
    let mut teams = None;
    let mut crops = None;
    let mut crop_present = None;
    let mut agent_valid = None;
    let mut ball = None;
    let mut states = None;
    let mut possessor = None;

    while !r.is_empty() {
        let (name, dtype, payload, rest) = read_array(r, index)?;
        r = rest;
        match (name.as_str(), dtype) {
            ("positions", DTYPE_F32) => positions = Some(payload),
            ("types", DTYPE_U8) => teams = Some(payload),
            ("crops", DTYPE_F32) => crops = Some(payload),
            ("crop_present", DTYPE_U8) => crop_present = Some(payload),
            ("agent_valid", DTYPE_U8) => agent_valid = Some(payload),
            ("ball", DTYPE_F32) => ball = Some(payload),
            ("states", DTYPE_U8) => states = Some(payload),
            ("possessor", DTYPE_U16) => possessor = Some(payload),
            _ => {} // unknown arrays are skipped for forward compatibility
        }
    }
    let consumed = total - r.len();

    let missing = |what: &str| DataError::Invariant(format!("sequence {index}: missing array {what}"));
    let positions = decode_f32(&positions.ok_or_else(|| missing("positions"))?);
    let teams = teams.ok_or_else(|| missing("types"))?;
    let crops = decode_f32(&crops.ok_or_else(|| missing("crops"))?);
    let present = crop_present.ok_or_else(|| missing("crop_present"))?;
    let valid = agent_valid.ok_or_else(|| missing("agent_valid"))?;
    let ball = decode_f32(&ball.ok_or_else(|| missing("ball"))?);
    let states = states.ok_or_else(|| missing("states"))?;
    let poss = decode_u16(&possessor.ok_or_else(|| missing("possessor"))?);

    let shape_err = |what: &str| {
        DataError::Invariant(format!(
            "sequence {index}: array {what} has inconsistent length"
        ))
    };
    if positions.len() != t * n * 2 {
        return Err(shape_err("positions"));
    }
    if teams.len() != n || present.len() != t * n || valid.len() != n {
        return Err(shape_err("types/crop_present/agent_valid"));
    }
    if crops.len() != t * n * d_c {
        return Err(shape_err("crops"));
    }
    if ball.len() != t * 2 || states.len() != t || poss.len() != t {
        return Err(shape_err("ball/states/possessor"));
    }

    let mut player_types = Array2::zeros((n, 2));
    for (agent, code) in teams.iter().enumerate() {
        match *code {
            TEAM_OFFENSE => player_types[[agent, 0]] = 1.0,
            TEAM_DEFENSE => player_types[[agent, 1]] = 1.0,
            TEAM_NONE => {}
            other => {
                return Err(DataError::Invariant(format!(
                    "sequence {index}: unknown team code {other}"
                )))
            }
        }
    }
    let ball_states = states
        .iter()
        .map(|c| {
            BallState::from_code(*c).ok_or_else(|| {
                DataError::Invariant(format!("sequence {index}: unknown state code {c}"))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let seq = Sequence {
        id,
        positions: Array3::from_shape_vec((t, n, 2), positions)
            .map_err(|e| DataError::Invariant(e.to_string()))?,
        player_types,
        crop_features: Array3::from_shape_vec((t, n, d_c), crops)
            .map_err(|e| DataError::Invariant(e.to_string()))?,
        crop_present: Array2::from_shape_vec(
            (t, n),
            present.iter().map(|p| *p != 0).collect(),
        )
        .map_err(|e| DataError::Invariant(e.to_string()))?,
        agent_valid: valid.iter().map(|v| *v != 0).collect(),
        ball_positions: Array2::from_shape_vec((t, 2), ball)
            .map_err(|e| DataError::Invariant(e.to_string()))?,
        ball_states,
        possessor: poss.iter().map(|p| *p as usize).collect(),
        frame_rate_hz,
        normalized: flags & 1 != 0,
    };
    Ok((seq, consumed))
}

fn write_array_header(
    buf: &mut Vec<u8>,
    name: &str,
    dtype: u8,
    count: usize,
) -> Result<(), DataError> {
    buf.write_u8(name.len() as u8)?;
    buf.extend_from_slice(name.as_bytes());
    buf.write_u8(dtype)?;
    buf.write_u32::<LittleEndian>(count as u32)?;
    Ok(())
}

fn write_f32_array<'a>(
    buf: &mut Vec<u8>,
    name: &str,
    values: impl ExactSizeIterator<Item = &'a f64>,
) -> Result<(), DataError> {
    write_array_header(buf, name, DTYPE_F32, values.len())?;
    for v in values {
        buf.write_f32::<LittleEndian>(*v as f32)?;
    }
    Ok(())
}

fn write_u8_array(buf: &mut Vec<u8>, name: &str, values: &[u8]) -> Result<(), DataError> {
    write_array_header(buf, name, DTYPE_U8, values.len())?;
    buf.extend_from_slice(values);
    Ok(())
}

fn write_u16_array(buf: &mut Vec<u8>, name: &str, values: &[u16]) -> Result<(), DataError> {
    write_array_header(buf, name, DTYPE_U16, values.len())?;
    for v in values {
        buf.write_u16::<LittleEndian>(*v)?;
    }
    Ok(())
}

/// Parses one named array, returning (name, dtype, raw payload, rest).
fn read_array<'a>(
    r: &'a [u8],
    index: usize,
) -> Result<(String, u8, Vec<u8>, &'a [u8]), DataError> {
    let trunc = || DataError::TruncatedRecord { index };
    let mut r = r;
    let name_len = r.read_u8().map_err(|_| trunc())? as usize;
    if r.len() < name_len {
        return Err(trunc());
    }
    let name = String::from_utf8_lossy(&r[..name_len]).into_owned();
    r = &r[name_len..];
    let dtype = r.read_u8().map_err(|_| trunc())?;
    let count = r.read_u32::<LittleEndian>().map_err(|_| trunc())? as usize;
    let elem = match dtype {
        DTYPE_F32 => 4,
        DTYPE_U16 => 2,
        DTYPE_U8 => 1,
        other => {
            return Err(DataError::Invariant(format!(
                "sequence {index}: unknown dtype {other}"
            )))
        }
    };
    let bytes = count
        .checked_mul(elem)
        .ok_or_else(|| DataError::Invariant("array size overflow".to_string()))?;
    if r.len() < bytes {
        return Err(trunc());
    }
    let payload = r[..bytes].to_vec();
    Ok((name, dtype, payload, &r[bytes..]))
}

fn decode_f32(payload: &[u8]) -> Vec<f64> {
    payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect()
}

fn decode_u16(payload: &[u8]) -> Vec<u16> {
    payload
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect()
}
