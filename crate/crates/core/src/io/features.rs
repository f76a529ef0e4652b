//! `FVEC` feature files, little-endian:
//!
//! ```text
//! "FVEC" | u16 version | u32 count | u32 dim | count·dim f32 (row-major)
//! | u32 source_id length | source_id UTF-8 bytes
//! ```

use std::path::Path;

use crate::{Error, Result};

const MAGIC: [u8; 4] = *b"FVEC";
const VERSION: u16 = 1;
const HEADER: usize = 4 + 2 + 4 + 4;

/// Feature rows from one extractor.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub source_id: String,
    pub dim: usize,
    pub rows: Vec<Vec<f32>>,
}

impl FeatureSet {
    pub fn new(source_id: impl Into<String>, dim: usize, rows: Vec<Vec<f32>>) -> Result<Self> {
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != dim) {
            return Err(Error::domain(format!("row {i} has length {}, expected {dim}", r.len())));
        }
        Ok(FeatureSet {
            source_id: source_id.into(),
            dim,
            rows,
        })
    }

    pub fn count(&self) -> usize {
        self.rows.len()
    }

    pub fn row_f64(&self, i: usize) -> Vec<f64> {
        self.rows[i].iter().map(|&v| v as f64).collect()
    }
}

pub fn encode_features(set: &FeatureSet) -> Result<Vec<u8>> {
    let count = u32::try_from(set.count()).map_err(|_| Error::DimOverflow {
        count: set.count() as u64,
        dim: set.dim as u64,
    })?;
    let dim = u32::try_from(set.dim).map_err(|_| Error::DimOverflow {
        count: set.count() as u64,
        dim: set.dim as u64,
    })?;
    let mut out = Vec::with_capacity(HEADER + set.count() * set.dim * 4 + 4 + set.source_id.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    for row in &set.rows {
        if row.len() != set.dim {
            return Err(Error::domain("inconsistent feature row length"));
        }
        for v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.extend_from_slice(&(set.source_id.len() as u32).to_le_bytes());
    out.extend_from_slice(set.source_id.as_bytes());
    Ok(out)
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().expect("4 bytes"))
}

/// Parses a feature file image. Sizes are validated before any allocation.
pub fn decode_features(bytes: &[u8]) -> Result<FeatureSet> {
    let avail = bytes.len() as u64;
    if bytes.len() < HEADER {
        return Err(Error::Truncated {
            needed: HEADER as u64,
            available: avail,
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
    if magic != MAGIC {
        return Err(Error::BadMagic {
            expected: MAGIC,
            found: magic,
        });
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let count = u32_at(bytes, 6) as u64;
    let dim = u32_at(bytes, 10) as u64;
    let payload = count
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .filter(|&n| usize::try_from(n).is_ok())
        .ok_or(Error::DimOverflow { count, dim })?;
    let needed = HEADER as u64 + payload + 4;
    if avail < needed {
        return Err(Error::Truncated {
            needed,
            available: avail,
        });
    }
    let p_end = HEADER + payload as usize;
    let id_len = u32_at(bytes, p_end) as u64;
    if avail < needed + id_len {
        return Err(Error::Truncated {
            needed: needed + id_len,
            available: avail,
        });
    }
    let source_id = std::str::from_utf8(&bytes[p_end + 4..p_end + 4 + id_len as usize])
        .map_err(|e| Error::domain(format!("source id is not UTF-8: {e}")))?
        .to_string();
    let dim = dim as usize;
    let rows = if dim == 0 {
        vec![Vec::new(); count as usize]
    } else {
        bytes[HEADER..p_end]
            .chunks_exact(dim * 4)
            .map(|r| {
                r.chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                    .collect()
            })
            .collect()
    };
    Ok(FeatureSet { source_id, dim, rows })
}

pub fn write_features(path: &Path, set: &FeatureSet) -> Result<()> {
    let bytes = encode_features(set)?;
    std::fs::write(path, bytes).map_err(|e| Error::file(path, e))
}

pub fn read_features(path: &Path) -> Result<FeatureSet> {
    let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
    decode_features(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FeatureSet {
        FeatureSet::new(
            "mock:k4",
            4,
            vec![vec![1.0, -2.5, 3.25, 0.0], vec![f32::MIN_POSITIVE, 7.0, -0.0, 1e30], vec![0.1; 4]],
        )
        .unwrap()
    }

    #[test]
    fn round_trip_bit_exact() {
        let s = sample();
        let back = decode_features(&encode_features(&s).unwrap()).unwrap();
        assert_eq!(back.source_id, s.source_id);
        for (a, b) in back.rows.iter().flatten().zip(s.rows.iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn empty_set() {
        let s = FeatureSet::new("x", 16, vec![]).unwrap();
        let back = decode_features(&encode_features(&s).unwrap()).unwrap();
        assert_eq!(back.count(), 0);
        assert_eq!(back.dim, 16);
    }

    #[test]
    fn truncation_and_magic() {
        let bytes = encode_features(&sample()).unwrap();
        for cut in [3, HEADER, HEADER + 10, bytes.len() - 1] {
            assert!(matches!(decode_features(&bytes[..cut]), Err(Error::Truncated { .. })), "cut {cut}");
        }
        let mut bad = bytes.clone();
        bad[1] = b'!';
        assert!(matches!(decode_features(&bad), Err(Error::BadMagic { .. })));
        let mut bad = bytes;
        bad[4] = 2;
        assert!(matches!(decode_features(&bad), Err(Error::UnsupportedVersion(2))));
    }

    #[test]
    fn huge_header_is_rejected_before_allocating() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"FVEC");
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&u32::MAX.to_le_bytes());
        bytes.extend_from_slice(&u32::MAX.to_le_bytes());
        let err = decode_features(&bytes).unwrap_err();
        assert!(matches!(err, Error::DimOverflow { .. } | Error::Truncated { .. }));
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(FeatureSet::new("x", 2, vec![vec![1.0]]).is_err());
    }
}
