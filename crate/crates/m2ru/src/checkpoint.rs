//! Versioned, checksummed run snapshots.
//!
//! Layout: 8-byte magic, u32 version, u64 payload length, u32 CRC-32 of the
//! payload (all little-endian), then the payload as JSON. JSON floats are
//! written in shortest round-trip form and parsed exactly, so a reload is
//! bit-identical.

use std::fs;
use std::path::Path;

use m2ru_core::harness::ContinualRun;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{io_err, Error, Result};

pub const MAGIC: &[u8; 8] = b"M2RUCKPT";
pub const VERSION: u32 = 1;
const HEADER: usize = 8 + 4 + 8 + 4;

/// Everything needed to continue a run: the configuration rebuilds the task
/// stream, the run state carries weights, arrays, buffer, sampler and RNGs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub run: ContinualRun,
}

pub fn encode(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    let payload = serde_json::to_vec(ckpt)?;
    let mut out = Vec::with_capacity(HEADER + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
    let bad = |detail: String| Error::Checkpoint {
        path: path.to_path_buf(),
        detail,
    };
    if bytes.len() < HEADER {
        return Err(bad(format!(
            "{} bytes is shorter than the {HEADER}-byte header",
            bytes.len()
        )));
    }
    if &bytes[..8] != MAGIC {
        return Err(bad("not a checkpoint file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::CheckpointVersion {
            path: path.to_path_buf(),
            found: version,
            expected: VERSION,
        });
    }
    let len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes"));
    let stored = u32::from_le_bytes(bytes[20..24].try_into().expect("4 bytes"));
    let payload = &bytes[HEADER..];
    if payload.len() as u64 != len {
        return Err(bad(format!("payload is {} bytes, header says {len}", payload.len())));
    }
    let computed = crc32fast::hash(payload);
    if computed != stored {
        return Err(Error::Checksum {
            path: path.to_path_buf(),
            stored,
            computed,
        });
    }
    serde_json::from_slice(payload).map_err(|e| bad(format!("payload: {e}")))
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    let bytes = encode(ckpt)?;
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode(&bytes, path)
}
