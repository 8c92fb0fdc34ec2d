//! Binary model checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic        8 bytes   "EXTSUMNN"
//! version      u32       FORMAT_VERSION
//! input_dim    u32
//! hidden_dim   u32
//! doc_dim      u32
//! layers       u32
//! seed         u64       seed the parameters were initialized from (informational)
//! tensors      u32       number of tensors that follow
//! per tensor:  u64 length, then `length` f64 values as IEEE-754 bits
//! ```
//!
//! Tensors follow [`ModelParams::named_tensors`] order: for each encoder
//! layer the forward cell then the backward cell (`w_z w_r w_h u_z u_r u_h
//! b_z b_r b_h`), then the head (`w_content w_salience w_novelty w_doc
//! b_doc bias`). Matrices are row-major.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{ModelDims, ModelParams};

pub const MAGIC: &[u8; 8] = b"EXTSUMNN";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("not a model checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
}

fn header_bytes(params: &ModelParams, seed: u64) -> Vec<u8> {
    let d = params.dims;
    let mut out = Vec::with_capacity(48);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for v in [d.input, d.hidden, d.doc, d.layers] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&seed.to_le_bytes());
    out
}

/// Serializes `params` into the checkpoint byte layout.
pub fn write_params(params: &ModelParams, seed: u64) -> Vec<u8> {
    let tensors = params.named_tensors();
    let mut out = header_bytes(params, seed);
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (_, t) in tensors {
        out.extend_from_slice(&(t.len() as u64).to_le_bytes());
        for v in t {
            out.extend_from_slice(&v.to_bits().to_le_bytes());
        }
    }
    out
}

pub fn save_params(params: &ModelParams, seed: u64, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
    let path = path.as_ref();
    let io_err = |source| CheckpointError::Io {
        path: path.to_owned(),
        source,
    };
    let mut file = fs::File::create(path).map_err(io_err)?;
    file.write_all(&write_params(params, seed)).map_err(io_err)?;
    file.sync_all().map_err(io_err)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], CheckpointError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| CheckpointError::Corrupt(format!("truncated while reading {what}")))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}

/// Parses checkpoint bytes; returns the parameters and the stored seed.
pub fn read_params(bytes: &[u8]) -> Result<(ModelParams, u64), CheckpointError> {
    let mut cur = Cursor { bytes, pos: 0 };
    if bytes.len() < MAGIC.len() || cur.take(MAGIC.len(), "magic")? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = cur.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(CheckpointError::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let mut dim = |what| cur.u32(what).map(|v| v as usize);
    let dims = ModelDims {
        input: dim("input dim")?,
        hidden: dim("hidden dim")?,
        doc: dim("doc dim")?,
        layers: dim("layer count")?,
    };
    dims.validate()
        .map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
    let seed = cur.u64("seed")?;

    let mut params = ModelParams::zeros(dims);
    let count = cur.u32("tensor count")? as usize;
    let mut slots = params.tensors_mut();
    if count != slots.len() {
        return Err(CheckpointError::Corrupt(format!(
            "{count} tensors stored, dims imply {}",
            slots.len()
        )));
    }
    for (i, slot) in slots.iter_mut().enumerate() {
        let len = cur.u64("tensor length")?;
        if len != slot.len() as u64 {
            return Err(CheckpointError::Corrupt(format!(
                "tensor {i} has length {len}, dims imply {}",
                slot.len()
            )));
        }
        for v in slot.iter_mut() {
            let x = f64::from_bits(cur.u64("tensor values")?);
            if !x.is_finite() {
                return Err(CheckpointError::Corrupt(format!("non-finite value in tensor {i}")));
            }
            *v = x;
        }
    }
    if cur.pos != bytes.len() {
        return Err(CheckpointError::Corrupt(format!(
            "{} trailing bytes",
            bytes.len() - cur.pos
        )));
    }
    Ok((params, seed))
}

pub fn load_params(path: impl AsRef<Path>) -> Result<(ModelParams, u64), CheckpointError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.to_owned(),
        source,
    })?;
    read_params(&bytes)
}
