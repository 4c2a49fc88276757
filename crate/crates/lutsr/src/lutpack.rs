//! `.lutpack` binary format.
//!
//! Little-endian throughout:
//!
//! ```text
//! "SLUT" u16:version
//! u8:variant u8:n_blocks u16:channels u8:scale u8:msb_bits u8:lsb_bits
//! u8:index_bits u32:residual_flags (i8:dx i8:dy)*(n_blocks*channels)
//! f32:eps (NaN when uncompressed)
//! u32:table_count
//! per table: u8:role u8:position u16:in_channel u16:out_channel
//!            u8:in_bits u8:stride u32:entry_count i8*entry_count
//! ```

use std::fs;
use std::path::Path;

use lutsr_core::engine::{LayerRole, Lut1D, LutPack, TableSlot};
use lutsr_core::model::{ModelDescriptor, Variant};
use lutsr_core::tensor::{BitSplit, ShiftTable};
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"SLUT";
pub const VERSION: u16 = 1;
/// Bytes of a table record before its entries.
pub const TABLE_HEADER_BYTES: usize = 12;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("not a lutpack file (bad magic)")]
    BadMagic,
    #[error("unsupported lutpack version {0}")]
    UnsupportedVersion(u16),
    #[error("file truncated at byte {offset}: {what} needs {needed} more bytes")]
    Truncated {
        offset: usize,
        needed: usize,
        what: &'static str,
    },
    #[error("{0} unexpected bytes after the last table")]
    TrailingBytes(usize),
    #[error("invalid {field}: {value}")]
    BadField { field: &'static str, value: u64 },
    #[error("invalid pack: {0}")]
    Invalid(#[from] lutsr_core::Error),
}

impl FormatError {
    /// True for damage to the container itself, as opposed to well-formed
    /// bytes that describe an invalid model.
    pub fn is_structural(&self) -> bool {
        matches!(
            self,
            Self::BadMagic | Self::UnsupportedVersion(_) | Self::Truncated { .. } | Self::TrailingBytes(_)
        )
    }
}

/// Bytes before the first table record: magic, version, descriptor and table count.
pub fn overhead_bytes(desc: &ModelDescriptor) -> usize {
    4 + 2 + 12 + 2 * desc.n_blocks as usize * desc.channels as usize + 4 + 4
}

pub fn serialize(pack: &LutPack) -> Vec<u8> {
    let d = pack.descriptor();
    let entries: usize = pack.tables().iter().map(|t| t.entries().len()).sum();
    let mut out = Vec::with_capacity(overhead_bytes(d) + TABLE_HEADER_BYTES * pack.tables().len() + entries);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(d.variant.code());
    out.push(d.n_blocks);
    out.extend_from_slice(&d.channels.to_le_bytes());
    out.push(d.scale);
    out.push(d.bit_split.msb_bits());
    out.push(d.bit_split.lsb_bits());
    out.push(d.index_bits);
    out.extend_from_slice(&d.residual_flags.to_le_bytes());
    for st in &d.shift_tables {
        for &(dx, dy) in st.offsets() {
            out.extend_from_slice(&[dx as u8, dy as u8]);
        }
    }
    out.extend_from_slice(&pack.eas_epsilon().unwrap_or(f32::NAN).to_le_bytes());
    out.extend_from_slice(&(pack.tables().len() as u32).to_le_bytes());
    for t in pack.tables() {
        let s = t.slot();
        out.push(s.role.code());
        out.push(s.position);
        out.extend_from_slice(&s.in_channel.to_le_bytes());
        out.extend_from_slice(&s.out_channel.to_le_bytes());
        out.push(s.in_bits);
        out.push(t.stride() as u8);
        out.extend_from_slice(&(t.entries().len() as u32).to_le_bytes());
        out.extend(t.entries().iter().map(|&e| e as u8));
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], FormatError> {
        let rest = self.buf.len() - self.pos;
        if rest < n {
            return Err(FormatError::Truncated {
                offset: self.buf.len(),
                needed: n - rest,
                what,
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self, what: &'static str) -> Result<[u8; N], FormatError> {
        Ok(self.take(N, what)?.try_into().expect("length checked"))
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, FormatError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &'static str) -> Result<u16, FormatError> {
        self.array(what).map(u16::from_le_bytes)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, FormatError> {
        self.array(what).map(u32::from_le_bytes)
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

pub fn parse(bytes: &[u8]) -> Result<LutPack, FormatError> {
    let n = bytes.len().min(4);
    if bytes[..n] != MAGIC[..n] {
        return Err(FormatError::BadMagic);
    }
    let mut r = Reader { buf: bytes, pos: 0 };
    r.take(4, "magic")?;
    let version = r.u16("version")?;
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }

    let code = r.u8("descriptor")?;
    let variant = Variant::from_code(code).ok_or(FormatError::BadField {
        field: "variant code",
        value: code.into(),
    })?;
    let n_blocks = r.u8("descriptor")?;
    let channels = r.u16("descriptor")?;
    let scale = r.u8("descriptor")?;
    let msb = r.u8("descriptor")?;
    let lsb = r.u8("descriptor")?;
    let bit_split = BitSplit::new(msb, lsb)?;
    let index_bits = r.u8("descriptor")?;
    let residual_flags = r.u32("descriptor")?;
    let mut shift_tables = Vec::with_capacity(n_blocks as usize);
    for _ in 0..n_blocks {
        let raw = r.take(2 * channels as usize, "shift table")?;
        let offsets = raw.chunks_exact(2).map(|p| (p[0] as i8, p[1] as i8)).collect();
        shift_tables.push(ShiftTable::new(offsets)?);
    }
    let eps = f32::from_le_bytes(r.array("epsilon")?);
    let eas_epsilon = if eps.is_nan() {
        None
    } else if eps > 0.0 && eps.is_finite() {
        Some(eps)
    } else {
        return Err(FormatError::BadField {
            field: "epsilon",
            value: eps.to_bits().into(),
        });
    };
    let descriptor = ModelDescriptor {
        variant,
        n_blocks,
        channels,
        scale,
        bit_split,
        index_bits,
        residual_flags,
        shift_tables,
    };
    descriptor.validate()?;

    let count = r.u32("table count")? as usize;
    if count.saturating_mul(TABLE_HEADER_BYTES) > r.remaining() {
        return Err(FormatError::Truncated {
            offset: bytes.len(),
            needed: count.saturating_mul(TABLE_HEADER_BYTES) - r.remaining(),
            what: "table records",
        });
    }
    let mut tables = Vec::with_capacity(count);
    for _ in 0..count {
        let code = r.u8("table header")?;
        let role = LayerRole::from_code(code).ok_or(FormatError::BadField {
            field: "role code",
            value: code.into(),
        })?;
        let slot = TableSlot {
            role,
            position: r.u8("table header")?,
            in_channel: r.u16("table header")?,
            out_channel: r.u16("table header")?,
            in_bits: r.u8("table header")?,
        };
        let stride = r.u8("table header")?;
        let len = r.u32("table header")? as usize;
        let entries = r.take(len, "table entries")?.iter().map(|&b| b as i8).collect();
        tables.push(Lut1D::new(slot, stride.into(), entries)?);
    }
    if r.remaining() != 0 {
        return Err(FormatError::TrailingBytes(r.remaining()));
    }
    Ok(LutPack::new(descriptor, tables, eas_epsilon)?)
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Format {
        path: String,
        #[source]
        source: FormatError,
    },
}

pub fn load(path: &Path) -> Result<LutPack, LoadError> {
    let bytes = fs::read(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse(&bytes).map_err(|source| LoadError::Format {
        path: path.display().to_string(),
        source,
    })
}

pub fn save(pack: &LutPack, path: &Path) -> Result<(), LoadError> {
    fs::write(path, serialize(pack)).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })
}
