//! `.gfa` grid-set container.
//!
//! ```text
//! magic "GFA1" | a u16 | b u16 | c u16 | record count u32
//! per record:   metadata length u32 | metadata (UTF-8 JSON) | ceil(a*b*c/8) packed bytes
//! ```
//!
//! All integers little-endian. Bit `((i_t*b)+i_v)*a + i_u` lives in byte `index/8`, LSB first.
//! Trailing bits of the last byte must be zero.

use crate::error::{Error, Result};
use crate::geometry::GridDims;

pub const GFA_MAGIC: &[u8; 4] = b"GFA1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridRecord {
    pub metadata: String,
    pub bits: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridSet {
    pub dims: GridDims,
    pub records: Vec<GridRecord>,
}

fn check_dims(dims: GridDims) -> Result<()> {
    let ok = |n: usize| (1..=u16::MAX as usize).contains(&n);
    if ok(dims.a) && ok(dims.b) && ok(dims.c) {
        Ok(())
    } else {
        Err(Error::Format(format!("dims {dims} outside [1, 65535]")))
    }
}

fn check_padding(dims: GridDims, bits: &[u8]) -> Result<()> {
    let used = dims.voxel_count() % 8;
    if used != 0 {
        let last = *bits.last().expect("packed length is nonzero");
        if last >> used != 0 {
            return Err(Error::Format("nonzero padding bits".into()));
        }
    }
    Ok(())
}

pub fn write_grid_set(dims: GridDims, records: &[GridRecord]) -> Result<Vec<u8>> {
    check_dims(dims)?;
    let packed = dims.packed_len();
    let count = u32::try_from(records.len())
        .map_err(|_| Error::Format("too many records for a u32 count".into()))?;
    let mut out = Vec::with_capacity(14 + records.len() * (packed + 64));
    out.extend_from_slice(GFA_MAGIC);
    for d in [dims.a, dims.b, dims.c] {
        out.extend_from_slice(&(d as u16).to_le_bytes());
    }
    out.extend_from_slice(&count.to_le_bytes());
    for (i, rec) in records.iter().enumerate() {
        if rec.bits.len() != packed {
            return Err(Error::Format(format!(
                "record {i} has {} packed bytes, expected {packed}",
                rec.bits.len()
            )));
        }
        check_padding(dims, &rec.bits)?;
        serde_json::from_str::<serde_json::Value>(&rec.metadata)
            .map_err(|e| Error::Format(format!("record {i} metadata is not JSON: {e}")))?;
        let meta_len = u32::try_from(rec.metadata.len())
            .map_err(|_| Error::Format(format!("record {i} metadata too long")))?;
        out.extend_from_slice(&meta_len.to_le_bytes());
        out.extend_from_slice(rec.metadata.as_bytes());
        out.extend_from_slice(&rec.bits);
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Format(format!("truncated stream while reading {what} at offset {}", self.pos))
        })?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn read_grid_set(bytes: &[u8]) -> Result<GridSet> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4, "magic")? != GFA_MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let dims = GridDims {
        a: cur.u16("dims")? as usize,
        b: cur.u16("dims")? as usize,
        c: cur.u16("dims")? as usize,
    };
    check_dims(dims)?;
    let count = cur.u32("record count")? as usize;
    let packed = dims.packed_len();
    let mut records = Vec::with_capacity(count.min(1 << 20));
    for i in 0..count {
        let meta_len = cur.u32("metadata length")? as usize;
        let meta = cur.take(meta_len, "metadata")?;
        let metadata = std::str::from_utf8(meta)
            .map_err(|_| Error::Format(format!("record {i} metadata is not UTF-8")))?
            .to_owned();
        serde_json::from_str::<serde_json::Value>(&metadata)
            .map_err(|e| Error::Format(format!("record {i} metadata is not JSON: {e}")))?;
        let bits = cur.take(packed, "packed bits")?.to_vec();
        check_padding(dims, &bits)?;
        records.push(GridRecord { metadata, bits });
    }
    if cur.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes", bytes.len() - cur.pos)));
    }
    Ok(GridSet { dims, records })
}
