//! Binary checkpoint codec for parameter maps.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    4 bytes  b"FSCP"
//! version  u32      currently 1
//! spec     u64      ModelSpec digest
//! count    u32      number of entries
//! entry*   u32 key length | key UTF-8 bytes | u32 value count | f32 values
//! ```
//!
//! Entries are written in key order and values keep their exact bit
//! patterns, so encode/decode round-trips bit-exactly.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::params::ParameterMap;

pub const MAGIC: [u8; 4] = *b"FSCP";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CheckpointError {
    BadMagic,
    UnsupportedVersion { version: u32 },
    Truncated,
    InvalidKey,
    DuplicateKey { key: String },
    TrailingBytes { extra: usize },
}

impl fmt::Display for CheckpointError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckpointError::BadMagic => write!(f, "not a checkpoint file (bad magic)"),
            CheckpointError::UnsupportedVersion { version } => {
                write!(f, "unsupported checkpoint version {version}")
            }
            CheckpointError::Truncated => write!(f, "checkpoint truncated"),
            CheckpointError::InvalidKey => write!(f, "checkpoint key is not valid UTF-8"),
            CheckpointError::DuplicateKey { key } => {
                write!(f, "checkpoint has duplicate key '{key}'")
            }
            CheckpointError::TrailingBytes { extra } => {
                write!(f, "{extra} trailing bytes after last entry")
            }
        }
    }
}

impl core::error::Error for CheckpointError {}

/// Header fields of a decoded checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckpointHeader {
    pub version: u32,
    pub spec_digest: u64,
}

pub fn encode(map: &ParameterMap, spec_digest: u64) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + map.value_count() * 4);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&spec_digest.to_le_bytes());
    out.extend_from_slice(&(map.len() as u32).to_le_bytes());
    for (key, values) in map.iter() {
        out.extend_from_slice(&(key.len() as u32).to_le_bytes());
        out.extend_from_slice(key.as_bytes());
        out.extend_from_slice(&(values.len() as u32).to_le_bytes());
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<(CheckpointHeader, ParameterMap), CheckpointError> {
    let mut cursor = Reader { bytes, pos: 0 };
    if cursor.take(4)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = cursor.u32()?;
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion { version });
    }
    let spec_digest = cursor.u64()?;
    let count = cursor.u32()? as usize;

    let mut map = ParameterMap::new();
    for _ in 0..count {
        let key_len = cursor.u32()? as usize;
        let key =
            core::str::from_utf8(cursor.take(key_len)?).map_err(|_| CheckpointError::InvalidKey)?;
        let value_count = cursor.u32()? as usize;
        let mut values = Vec::with_capacity(value_count);
        for _ in 0..value_count {
            let raw = cursor.take(4)?;
            values.push(f32::from_le_bytes([raw[0], raw[1], raw[2], raw[3]]));
        }
        if map.contains_key(key) {
            return Err(CheckpointError::DuplicateKey {
                key: String::from(key),
            });
        }
        map.insert(key, values);
    }
    if cursor.pos != bytes.len() {
        return Err(CheckpointError::TrailingBytes {
            extra: bytes.len() - cursor.pos,
        });
    }
    Ok((
        CheckpointHeader {
            version,
            spec_digest,
        },
        map,
    ))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.pos + n > self.bytes.len() {
            return Err(CheckpointError::Truncated);
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        let b = self.take(8)?;
        Ok(u64::from_le_bytes([
            b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7],
        ]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, ModelSpec};

    #[test]
    fn round_trip_is_bit_exact() {
        let spec = ModelSpec::new(64, 4, 2, 3);
        let params = init_params(&spec, 17);
        let bytes = encode(&params, spec.digest());
        let (header, decoded) = decode(&bytes).unwrap();
        assert_eq!(header.version, VERSION);
        assert_eq!(header.spec_digest, spec.digest());
        assert!(decoded.bits_eq(&params));
        // Re-encoding reproduces the same bytes.
        assert_eq!(encode(&decoded, header.spec_digest), bytes);
    }

    #[test]
    fn decode_rejects_garbage() {
        assert_eq!(decode(b"FS"), Err(CheckpointError::Truncated));
        assert_eq!(
            decode(b"XXXX\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0"),
            Err(CheckpointError::BadMagic)
        );
        let spec = ModelSpec::new(64, 4, 1, 0);
        let params = init_params(&spec, 1);
        let mut bytes = encode(&params, spec.digest());
        bytes.truncate(bytes.len() - 3);
        assert_eq!(decode(&bytes), Err(CheckpointError::Truncated));
        let mut with_tail = encode(&params, spec.digest());
        with_tail.push(0);
        assert_eq!(
            decode(&with_tail),
            Err(CheckpointError::TrailingBytes { extra: 1 })
        );
    }

    #[test]
    fn version_gate() {
        let spec = ModelSpec::new(64, 4, 1, 0);
        let mut bytes = encode(&init_params(&spec, 2), spec.digest());
        bytes[4] = 99;
        assert_eq!(
            decode(&bytes),
            Err(CheckpointError::UnsupportedVersion { version: 99 })
        );
    }
}
