//! Crop-feature files: per-player appearance vectors produced by an external
//! visual pipeline, keyed by (sequence id, frame, agent slot).
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! header: magic "BTFT" | version u16 | d_c u16 | n_records u32
//! record: sequence_id u64 | frame u16 | agent u16 | d_c x f32
//! ```
//!
//! Values are stored as f32 and widened to f64 in memory. Missing keys are
//! not an error here; attachment decides how absent crops are handled.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::DataError;

const MAGIC: &[u8; 4] = b"BTFT";
pub const FEAT_FORMAT_VERSION: u16 = 1;

/// One feature vector with its key.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub sequence_id: u64,
    pub frame: usize,
    pub agent: usize,
    pub values: Vec<f64>,
}

/// An in-memory feature file: a keyed lookup from (sequence, frame, agent)
/// to a `dim`-component vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    dim: usize,
    entries: HashMap<(u64, u16, u16), Vec<f64>>,
}

impl FeatureTable {
    pub fn new(dim: usize) -> Self {
        FeatureTable {
            dim,
            entries: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, record: FeatureRecord) -> Result<(), DataError> {
        if record.values.len() != self.dim {
            return Err(DataError::FeatureDimMismatch {
                found: record.values.len(),
                expected: self.dim,
            });
        }
        if record.values.iter().any(|v| !v.is_finite()) {
            return Err(DataError::Invariant(format!(
                "non-finite feature value for sequence {}, frame {}, agent {}",
                record.sequence_id, record.frame, record.agent
            )));
        }
        let key = encode_key(record.sequence_id, record.frame, record.agent)?;
        if self.entries.insert(key, record.values).is_some() {
            return Err(DataError::Invariant(format!(
                "duplicate feature key: sequence {}, frame {}, agent {}",
                record.sequence_id, record.frame, record.agent
            )));
        }
        Ok(())
    }

    pub fn get(&self, sequence_id: u64, frame: usize, agent: usize) -> Option<&[f64]> {
        let key = encode_key(sequence_id, frame, agent).ok()?;
        self.entries.get(&key).map(|v| v.as_slice())
    }
}

fn encode_key(sequence_id: u64, frame: usize, agent: usize) -> Result<(u64, u16, u16), DataError> {
    let f = u16::try_from(frame).map_err(|_| {
        DataError::BadParam(format!("frame index {frame} does not fit the file format"))
    })?;
    let a = u16::try_from(agent).map_err(|_| {
        DataError::BadParam(format!("agent index {agent} does not fit the file format"))
    })?;
    Ok((sequence_id, f, a))
}

/// Writes the table with records sorted by key, so identical tables produce
/// byte-identical files.
pub fn write_features(path: impl AsRef<Path>, table: &FeatureTable) -> Result<(), DataError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_u16::<LittleEndian>(FEAT_FORMAT_VERSION)?;
    let d_c = u16::try_from(table.dim)
        .map_err(|_| DataError::BadParam(format!("d_c {} does not fit u16", table.dim)))?;
    w.write_u16::<LittleEndian>(d_c)?;
    let n = u32::try_from(table.len())
        .map_err(|_| DataError::BadParam("too many feature records for one file".to_string()))?;
    w.write_u32::<LittleEndian>(n)?;

    let mut keys: Vec<_> = table.entries.keys().copied().collect();
    keys.sort_unstable();
    for key in keys {
        let (seq_id, frame, agent) = key;
        w.write_u64::<LittleEndian>(seq_id)?;
        w.write_u16::<LittleEndian>(frame)?;
        w.write_u16::<LittleEndian>(agent)?;
        for &v in &table.entries[&key] {
            w.write_f32::<LittleEndian>(v as f32)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureTable, DataError> {
    let mut r = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| DataError::BadMagic { expected: "BTFT" })?;
    if &magic != MAGIC {
        return Err(DataError::BadMagic { expected: "BTFT" });
    }
    let version = r.read_u16::<LittleEndian>()?;
    if version != FEAT_FORMAT_VERSION {
        return Err(DataError::VersionMismatch {
            found: version,
            expected: FEAT_FORMAT_VERSION,
        });
    }
    let d_c = r.read_u16::<LittleEndian>()? as usize;
    let n_records = r.read_u32::<LittleEndian>()? as usize;

    let mut table = FeatureTable::new(d_c);
    for index in 0..n_records {
        let trunc = || DataError::TruncatedRecord { index };
        let sequence_id = r.read_u64::<LittleEndian>().map_err(|_| trunc())?;
        let frame = r.read_u16::<LittleEndian>().map_err(|_| trunc())? as usize;
        let agent = r.read_u16::<LittleEndian>().map_err(|_| trunc())? as usize;
        let mut values = Vec::with_capacity(d_c);
        for _ in 0..d_c {
            values.push(r.read_f32::<LittleEndian>().map_err(|_| trunc())? as f64);
        }
        table.insert(FeatureRecord {
            sequence_id,
            frame,
            agent,
            values,
        })?;
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(DataError::Invariant(
            "trailing bytes after the declared record count".to_string(),
        ));
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_table(seed: u64, n: usize, dim: usize) -> FeatureTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut table = FeatureTable::new(dim);
        for i in 0..n {
            // Quantize through f32 so the on-disk round trip is exact.
            let values = (0..dim)
                .map(|_| rng.gen_range(-1.0f64..1.0) as f32 as f64)
                .collect();
            table
                .insert(FeatureRecord {
                    sequence_id: (i / 7) as u64,
                    frame: i % 30,
                    agent: i % 11,
                    values,
                })
                .unwrap();
        }
        table
    }

    #[test]
    fn roundtrip_is_exact_for_f32_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("crops.btft");
        let table = sample_table(1, 200, 8);
        write_features(&path, &table).unwrap();
        let back = read_features(&path).unwrap();
        assert_eq!(back, table);
    }

    #[test]
    fn writes_are_byte_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.btft");
        let b = dir.path().join("b.btft");
        write_features(&a, &sample_table(2, 150, 4)).unwrap();
        write_features(&b, &sample_table(2, 150, 4)).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn lookup_hits_and_misses() {
        let mut table = FeatureTable::new(2);
        table
            .insert(FeatureRecord {
                sequence_id: 5,
                frame: 3,
                agent: 1,
                values: vec![0.25, 0.75],
            })
            .unwrap();
        assert_eq!(table.get(5, 3, 1), Some(&[0.25, 0.75][..]));
        assert_eq!(table.get(5, 3, 2), None);
        assert_eq!(table.get(6, 3, 1), None);
    }

    #[test]
    fn insert_rejects_wrong_dim_and_duplicates() {
        let mut table = FeatureTable::new(3);
        let rec = FeatureRecord {
            sequence_id: 0,
            frame: 0,
            agent: 0,
            values: vec![0.0, 1.0],
        };
        assert!(matches!(
            table.insert(rec),
            Err(DataError::FeatureDimMismatch {
                found: 2,
                expected: 3
            })
        ));
        let ok = FeatureRecord {
            sequence_id: 0,
            frame: 0,
            agent: 0,
            values: vec![0.0, 1.0, 2.0],
        };
        table.insert(ok.clone()).unwrap();
        assert!(matches!(table.insert(ok), Err(DataError::Invariant(_))));
    }

    #[test]
    fn read_rejects_bad_magic_version_and_truncation() {
        let dir = tempfile::tempdir().unwrap();

        let bad_magic = dir.path().join("bad_magic.btft");
        std::fs::write(&bad_magic, b"NOPE\x01\x00\x02\x00\x00\x00\x00\x00").unwrap();
        assert!(matches!(
            read_features(&bad_magic),
            Err(DataError::BadMagic { expected: "BTFT" })
        ));

        let good = dir.path().join("good.btft");
        write_features(&good, &sample_table(3, 10, 4)).unwrap();
        let mut bytes = std::fs::read(&good).unwrap();

        let bad_version = dir.path().join("bad_version.btft");
        let mut v = bytes.clone();
        v[4] = 9;
        std::fs::write(&bad_version, &v).unwrap();
        assert!(matches!(
            read_features(&bad_version),
            Err(DataError::VersionMismatch {
                found: 9,
                expected: 1
            })
        ));

        let truncated = dir.path().join("truncated.btft");
        bytes.truncate(bytes.len() - 3);
        std::fs::write(&truncated, &bytes).unwrap();
        assert!(matches!(
            read_features(&truncated),
            Err(DataError::TruncatedRecord { index: 9 })
        ));
    }
}
