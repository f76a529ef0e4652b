//! Binary head format, little-endian throughout:
//!
//! ```text
//! "HEAD" | u16 version | u8 kind | u32 layer count
//! | layer count × (u32 in_dim, u32 out_dim)
//! | per layer: in·out f64 weights (row-major), out f64 bias
//! ```

use std::io::{Read, Write};

use super::{Dense, DenseHead, LocHead, POWER_EXPAND};
use crate::{Error, Result};

const MAGIC: [u8; 4] = *b"HEAD";
const VERSION: u16 = 1;
const KIND_DENSE: u8 = 1;
const KIND_LOC: u8 = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum SavedHead {
    Dense(DenseHead),
    Localization(LocHead),
}

impl SavedHead {
    fn layers(&self) -> Vec<&Dense> {
        match self {
            SavedHead::Dense(h) => vec![&h.layer],
            SavedHead::Localization(h) => vec![&h.power_expand, &h.hidden1, &h.hidden2, &h.out],
        }
    }

    fn kind(&self) -> u8 {
        match self {
            SavedHead::Dense(_) => KIND_DENSE,
            SavedHead::Localization(_) => KIND_LOC,
        }
    }
}

pub fn write_head<W: Write>(head: &SavedHead, mut w: W) -> Result<()> {
    let layers = head.layers();
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[head.kind()])?;
    w.write_all(&(layers.len() as u32).to_le_bytes())?;
    for l in &layers {
        w.write_all(&(l.in_dim as u32).to_le_bytes())?;
        w.write_all(&(l.out_dim as u32).to_le_bytes())?;
    }
    for l in &layers {
        for v in l.weights.iter().chain(&l.bias) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_exact<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Truncated {
            needed: N as u64,
            available: 0,
        },
        _ => Error::Io(e),
    })?;
    Ok(b)
}

pub fn read_head<R: Read>(mut r: R) -> Result<SavedHead> {
    let magic = read_exact::<_, 4>(&mut r)?;
    if magic != MAGIC {
        return Err(Error::BadMagic {
            expected: MAGIC,
            found: magic,
        });
    }
    let version = u16::from_le_bytes(read_exact(&mut r)?);
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let [kind] = read_exact::<_, 1>(&mut r)?;
    let count = u32::from_le_bytes(read_exact(&mut r)?) as usize;
    let expected = match kind {
        KIND_DENSE => 1,
        KIND_LOC => 4,
        k => return Err(Error::domain(format!("unknown head kind {k}"))),
    };
    if count != expected {
        return Err(Error::domain(format!("head kind {kind} expects {expected} layers, file has {count}")));
    }
    let mut dims = Vec::with_capacity(count);
    for _ in 0..count {
        let i = u32::from_le_bytes(read_exact(&mut r)?) as usize;
        let o = u32::from_le_bytes(read_exact(&mut r)?) as usize;
        i.checked_mul(o).ok_or(Error::DimOverflow {
            count: i as u64,
            dim: o as u64,
        })?;
        dims.push((i, o));
    }
    let mut layers = Vec::with_capacity(count);
    for (i, o) in dims {
        let mut take = |n: usize| -> Result<Vec<f64>> {
            let mut buf = Vec::new();
            (&mut r).take(n as u64 * 8).read_to_end(&mut buf)?;
            if buf.len() != n * 8 {
                return Err(Error::Truncated {
                    needed: n as u64 * 8,
                    available: buf.len() as u64,
                });
            }
            Ok(buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect())
        };
        let weights = take(i * o)?;
        let bias = take(o)?;
        layers.push(Dense {
            in_dim: i,
            out_dim: o,
            weights,
            bias,
        });
    }
    match kind {
        KIND_DENSE => Ok(SavedHead::Dense(DenseHead {
            layer: layers.remove(0),
        })),
        _ => {
            let mut it = layers.into_iter();
            let head = LocHead {
                power_expand: it.next().expect("4 layers"),
                hidden1: it.next().expect("4 layers"),
                hidden2: it.next().expect("4 layers"),
                out: it.next().expect("4 layers"),
            };
            let shape_ok = head.power_expand.in_dim == 1
                && head.power_expand.out_dim == POWER_EXPAND
                && head.hidden1.in_dim > POWER_EXPAND
                && head.hidden1.out_dim == 32
                && (head.hidden2.in_dim, head.hidden2.out_dim) == (32, 16)
                && (head.out.in_dim, head.out.out_dim) == (16, 2);
            if !shape_ok {
                return Err(Error::domain("layer dimensions do not form a localisation head"));
            }
            Ok(SavedHead::Localization(head))
        }
    }
}
