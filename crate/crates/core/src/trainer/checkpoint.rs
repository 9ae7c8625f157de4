//! The "WSR1" tensor-file format: a magic tag, a format version, and a
//! count-prefixed list of named tensors stored as 32-bit little-endian
//! floats. Used for checkpoints, exported models, and external
//! feature-extractor weights. Writes are atomic (temp file + rename) and
//! reads report the byte offset of any corruption.
//!
//! Layout:
//! ```text
//! magic   4 bytes  "WSR1"
//! version u32      1
//! count   u32      number of entries
//! entry:  name_len u32, name utf-8, rank u32, extents u32×rank, f32×∏extents
//! ```

use crate::error::{Error, Result};
use std::io::Write;
use std::path::Path;

pub const MAGIC: [u8; 4] = *b"WSR1";
pub const VERSION: u32 = 1;

/// One named tensor as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub extents: Vec<usize>,
    pub data: Vec<f32>,
}

impl NamedTensor {
    pub fn new(name: impl Into<String>, extents: Vec<usize>, data: Vec<f32>) -> Self {
        let t = NamedTensor {
            name: name.into(),
            extents,
            data,
        };
        debug_assert_eq!(t.extents.iter().product::<usize>(), t.data.len());
        t
    }

    /// Scalar f64 slice quantized to f32 storage.
    pub fn from_f64(name: impl Into<String>, extents: Vec<usize>, data: &[f64]) -> Self {
        NamedTensor::new(name, extents, data.iter().map(|&v| v as f32).collect())
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }
}

/// Encodes a u64 counter/seed as four u16 limbs (most significant first),
/// each exactly representable in f32.
pub fn encode_u64(x: u64) -> Vec<f32> {
    (0..4)
        .map(|i| ((x >> (48 - 16 * i)) & 0xffff) as f32)
        .collect()
}

/// Inverse of [`encode_u64`].
pub fn decode_u64(limbs: &[f32]) -> Result<u64> {
    if limbs.len() != 4 {
        return Err(Error::dimension(format!(
            "u64 limb encoding needs 4 values, got {}",
            limbs.len()
        )));
    }
    let mut x = 0u64;
    for &l in limbs {
        if !(0.0..=65535.0).contains(&l) || l.fract() != 0.0 {
            return Err(Error::config(format!("invalid u64 limb value {l}")));
        }
        x = (x << 16) | l as u64;
    }
    Ok(x)
}

/// Serializes entries in the given order (byte-deterministic).
pub fn write_tensor_file(path: &Path, entries: &[NamedTensor]) -> Result<()> {
    let mut buf = Vec::with_capacity(64);
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for e in entries {
        let count: usize = e.extents.iter().product();
        if count != e.data.len() {
            return Err(Error::dimension(format!(
                "entry {:?}: extents {:?} do not match data length {}",
                e.name,
                e.extents,
                e.data.len()
            )));
        }
        buf.extend_from_slice(&(e.name.len() as u32).to_le_bytes());
        buf.extend_from_slice(e.name.as_bytes());
        buf.extend_from_slice(&(e.extents.len() as u32).to_le_bytes());
        for &x in &e.extents {
            buf.extend_from_slice(&(x as u32).to_le_bytes());
        }
        for &v in &e.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }

    // Atomic write: a crash mid-write never leaves a torn checkpoint behind.
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| Error::file(path, format!("cannot create temp file: {e}")))?;
    tmp.write_all(&buf)
        .map_err(|e| Error::file(path, format!("write failed: {e}")))?;
    tmp.persist(path)
        .map_err(|e| Error::file(path, format!("rename failed: {e}")))?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.offset + n > self.bytes.len() {
            return Err(Error::Format {
                offset: self.offset as u64,
                message: format!(
                    "truncated file: needed {n} bytes for {what}, {} remain",
                    self.bytes.len() - self.offset
                ),
            });
        }
        let s = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Parses a tensor file, validating magic, version, and structure.
pub fn read_tensor_file(path: &Path) -> Result<Vec<NamedTensor>> {
    let bytes =
        std::fs::read(path).map_err(|e| Error::file(path, format!("cannot read: {e}")))?;
    let mut cur = Cursor {
        bytes: &bytes,
        offset: 0,
    };

    let magic = cur.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: format!("bad magic {:?}, expected {:?}", magic, &MAGIC[..]),
        });
    }
    let version = cur.u32("version")?;
    if version != VERSION {
        return Err(Error::Format {
            offset: 4,
            message: format!("unsupported format version {version}, expected {VERSION}"),
        });
    }
    let count = cur.u32("entry count")?;
    let mut entries = Vec::with_capacity(count as usize);
    for i in 0..count {
        let name_off = cur.offset as u64;
        let name_len = cur.u32("name length")? as usize;
        if name_len > 4096 {
            return Err(Error::Format {
                offset: name_off,
                message: format!("entry {i}: implausible name length {name_len}"),
            });
        }
        let name = std::str::from_utf8(cur.take(name_len, "name")?)
            .map_err(|e| Error::Format {
                offset: name_off + 4,
                message: format!("entry {i}: name is not utf-8: {e}"),
            })?
            .to_string();
        let rank = cur.u32("rank")? as usize;
        if rank > 8 {
            return Err(Error::Format {
                offset: (cur.offset - 4) as u64,
                message: format!("entry {name:?}: implausible rank {rank}"),
            });
        }
        let mut extents = Vec::with_capacity(rank);
        for _ in 0..rank {
            extents.push(cur.u32("extent")? as usize);
        }
        let n: usize = extents.iter().product();
        let raw = cur.take(4 * n, "tensor data")?;
        let data = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        entries.push(NamedTensor {
            name,
            extents,
            data,
        });
    }
    if cur.offset != bytes.len() {
        return Err(Error::Format {
            offset: cur.offset as u64,
            message: format!("{} trailing bytes after last entry", bytes.len() - cur.offset),
        });
    }
    Ok(entries)
}
