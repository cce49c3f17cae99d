//! Binary delta-stream records, little-endian:
//!
//! ```text
//! [u32 count_ext_prev][u32 row, u32 col] * count_ext_prev
//! [u32 count_ext_next][u32 row, u32 col] * count_ext_next
//! [u32 count_values][f64 value] * count_values
//! ```
//!
//! Records are concatenated without padding. The dimension is not stored.

use std::fs;
use std::path::Path;

use super::{Index, SnapshotDelta};
use crate::error::{Error, Result};

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::invalid("count exceeds u32 in delta record"))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_pairs(out: &mut Vec<u8>, pairs: &[Index]) -> Result<()> {
    put_u32(out, pairs.len())?;
    for &(r, c) in pairs {
        out.extend_from_slice(&r.to_le_bytes());
        out.extend_from_slice(&c.to_le_bytes());
    }
    Ok(())
}

pub fn encode_delta_stream(deltas: &[SnapshotDelta]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for d in deltas {
        put_pairs(&mut out, &d.ext_prev)?;
        put_pairs(&mut out, &d.ext_next)?;
        put_u32(&mut out, d.values_next.len())?;
        for v in &d.values_next {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    record: usize,
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let chunk = self.bytes.get(self.pos..end).ok_or_else(|| Error::Parse {
            line: self.record,
            message: format!("delta record truncated at byte {}", self.pos),
        })?;
        self.pos = end;
        Ok(chunk.try_into().expect("slice length equals N"))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn pairs(&mut self) -> Result<Vec<Index>> {
        let n = self.u32()? as usize;
        (0..n).map(|_| Ok((self.u32()?, self.u32()?))).collect()
    }
}

/// Parses concatenated records. `Error::Parse::line` carries the 1-based
/// record number on failure.
pub fn decode_delta_stream(bytes: &[u8], dim: usize) -> Result<Vec<SnapshotDelta>> {
    let mut cur = Cursor {
        bytes,
        pos: 0,
        record: 0,
    };
    let mut out = Vec::new();
    while cur.pos < bytes.len() {
        cur.record += 1;
        let ext_prev = cur.pairs()?;
        let ext_next = cur.pairs()?;
        let n = cur.u32()? as usize;
        let values_next = (0..n)
            .map(|_| Ok(f64::from_le_bytes(cur.take()?)))
            .collect::<Result<_>>()?;
        out.push(SnapshotDelta {
            dim,
            ext_prev,
            ext_next,
            values_next,
        });
    }
    Ok(out)
}

pub fn write_delta_stream(path: impl AsRef<Path>, deltas: &[SnapshotDelta]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_delta_stream(deltas)?).map_err(|e| Error::io(path, e))
}

pub fn read_delta_stream(path: impl AsRef<Path>, dim: usize) -> Result<Vec<SnapshotDelta>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_delta_stream(&bytes, dim)
}
