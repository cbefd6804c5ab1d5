//! Indirection entries and the per-kernel table image.

use std::fmt;

use serde::Serialize;

/// Slices per 32-bit physical register.
pub const SLICES_PER_REG: u32 = 8;
/// Bits per slice.
pub const SLICE_BITS: u32 = 4;
/// Architectural registers addressable through the table.
pub const TABLE_ROWS: usize = 256;

/// Maps one architectural register to at most two (physical register,
/// slice mask) parts. Bit `i` of a mask selects slice `i` (bits `4i..4i+3`).
/// Data slices fill set bits in ascending order, `r0` before `r1`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct IndirectionEntry {
    pub r0: u8,
    pub m0: u8,
    pub r1: u8,
    pub m1: u8,
}

impl fmt::Display for IndirectionEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}:{:08b}", self.r0, self.m0)?;
        if self.m1 != 0 {
            write!(f, " r{}:{:08b}", self.r1, self.m1)?;
        }
        Ok(())
    }
}

impl IndirectionEntry {
    /// A whole register.
    pub fn full(r: u8) -> Self {
        IndirectionEntry { r0: r, m0: 0xff, r1: 0, m1: 0 }
    }

    /// `[r0:8 | m0:8 | r1:8 | m1:8]`
    pub fn encode(self) -> u32 {
        u32::from_be_bytes([self.r0, self.m0, self.r1, self.m1])
    }

    pub fn decode(word: u32) -> Self {
        let [r0, m0, r1, m1] = word.to_be_bytes();
        IndirectionEntry { r0, m0, r1, m1 }
    }

    pub fn is_split(self) -> bool {
        self.m1 != 0
    }

    pub fn slice_count(self) -> u32 {
        self.m0.count_ones() + self.m1.count_ones()
    }

    /// Physical registers referenced, `r0` first.
    pub fn registers(self) -> impl Iterator<Item = u8> {
        std::iter::once(self.r0).chain(self.is_split().then_some(self.r1))
    }

    /// `(register, physical slice)` of every data slice, least significant first.
    pub fn data_slices(self) -> Vec<(u8, u32)> {
        let mut out = Vec::with_capacity(self.slice_count() as usize);
        for (r, m) in [(self.r0, self.m0), (self.r1, self.m1)] {
            for s in 0..SLICES_PER_REG {
                if m >> s & 1 == 1 {
                    out.push((r, s));
                }
            }
        }
        out
    }
}

pub fn round_width_to_slices(bits: u32) -> Result<u32, WidthOutOfRange> {
    if (1..=32).contains(&bits) {
        Ok(bits.div_ceil(SLICE_BITS))
    } else {
        Err(WidthOutOfRange(bits))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("width {0} is outside 1..=32 bits")]
pub struct WidthOutOfRange(pub u32);

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TableError {
    #[error("line {0}: expected 8 hex digits")]
    BadRow(usize),
    #[error("expected {TABLE_ROWS} rows, found {0}")]
    RowCount(usize),
}

/// Full 256-row table, unused rows zero.
pub fn table_words(entries: &[IndirectionEntry]) -> Vec<u32> {
    let mut words = vec![0u32; TABLE_ROWS];
    for (w, e) in words.iter_mut().zip(entries) {
        *w = e.encode();
    }
    words
}

/// One row per line, 8 lowercase hex digits.
pub fn dump_text(entries: &[IndirectionEntry]) -> String {
    table_words(entries).iter().map(|w| format!("{w:08x}\n")).collect()
}

/// 1024 bytes, rows in order, each big-endian.
pub fn dump_binary(entries: &[IndirectionEntry]) -> Vec<u8> {
    table_words(entries).iter().flat_map(|w| w.to_be_bytes()).collect()
}

pub fn load_text(text: &str) -> Result<Vec<IndirectionEntry>, TableError> {
    let rows: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    if rows.len() != TABLE_ROWS {
        return Err(TableError::RowCount(rows.len()));
    }
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            if r.len() != 8 {
                return Err(TableError::BadRow(i + 1));
            }
            u32::from_str_radix(r, 16).map(IndirectionEntry::decode).map_err(|_| TableError::BadRow(i + 1))
        })
        .collect()
}

pub fn load_binary(bytes: &[u8]) -> Result<Vec<IndirectionEntry>, TableError> {
    if bytes.len() != TABLE_ROWS * 4 {
        return Err(TableError::RowCount(bytes.len() / 4));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| IndirectionEntry::decode(u32::from_be_bytes([c[0], c[1], c[2], c[3]])))
        .collect())
}
