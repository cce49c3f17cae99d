//! Binary parameter dump, little-endian:
//!
//! ```text
//! b"DGNP" u32 version u32 count
//! ([u32 rows][u32 cols][f64 value] * rows*cols) * count
//! ```
//!
//! Matrices appear in [`ParamSet::tensors`] order. Loading needs a template
//! with the expected shapes.

use std::fs;
use std::path::Path;

use super::ParamSet;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"DGNP";
const VERSION: u32 = 1;

pub fn encode_params(params: &ParamSet) -> Vec<u8> {
    let tensors = params.tensors();
    let mut out = Vec::with_capacity(12 + 8 * params.num_scalars() + 8 * tensors.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in tensors {
        out.extend_from_slice(&(t.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(t.cols() as u32).to_le_bytes());
        for v in t.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn bad(message: impl Into<String>) -> Error {
    Error::Parse {
        line: 0,
        message: message.into(),
    }
}

/// Decodes into a copy of `template`, which fixes the expected shapes.
pub fn decode_params(bytes: &[u8], template: &ParamSet) -> Result<ParamSet> {
    let mut pos = 0;
    let mut take = |n: usize| -> Result<&[u8]> {
        let chunk = bytes
            .get(pos..pos + n)
            .ok_or_else(|| bad(format!("parameter dump truncated at byte {pos}")))?;
        pos += n;
        Ok(chunk)
    };
    let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize;
    if take(4)? != MAGIC {
        return Err(bad("not a parameter dump"));
    }
    let version = u32_at(take(4)?);
    if version != VERSION as usize {
        return Err(bad(format!("unsupported parameter dump version {version}")));
    }
    let mut out = template.clone();
    let count = u32_at(take(4)?);
    let mut tensors = out.tensors_mut();
    if count != tensors.len() {
        return Err(bad(format!(
            "dump holds {count} matrices, model has {}",
            tensors.len()
        )));
    }
    for (i, t) in tensors.iter_mut().enumerate() {
        let rows = u32_at(take(4)?);
        let cols = u32_at(take(4)?);
        if (rows, cols) != t.shape() {
            return Err(bad(format!(
                "matrix {i} is {rows}x{cols}, expected {}x{}",
                t.rows(),
                t.cols()
            )));
        }
        for v in t.values_mut() {
            *v = f64::from_le_bytes(take(8)?.try_into().expect("8 bytes"));
        }
    }
    drop(tensors);
    if pos != bytes.len() {
        return Err(bad("trailing bytes after parameter dump"));
    }
    Ok(out)
}

pub fn write_params(path: impl AsRef<Path>, params: &ParamSet) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_params(params)).map_err(|e| Error::io(path, e))
}

pub fn read_params(path: impl AsRef<Path>, template: &ParamSet) -> Result<ParamSet> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_params(&bytes, template)
}
