//! Bit-level model of the value extractor, converter and truncator, and a
//! value store that keeps every operand in packed physical registers.

use crate::alloc::{IndirectionEntry, ValueLayout, SLICES_PER_REG, SLICE_BITS};
use crate::ir::{ScalarType, ValueId};
use crate::minifloat::{convert_down, convert_up, NarrowFloatBits};
use crate::tuner::ValueStore;

/// One masked register write.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SliceWrite {
    pub reg: u8,
    pub mask: u8,
    /// Operand slices at their mask positions, zero elsewhere.
    pub data: u32,
}

/// Bitline mask of a slice mask.
pub fn bit_mask(mask: u8) -> u32 {
    (0..SLICES_PER_REG)
        .filter(|s| mask >> s & 1 == 1)
        .fold(0, |acc, s| acc | 0xf << (s * SLICE_BITS))
}

fn low_bits(n: u32) -> u32 {
    if n >= 32 {
        u32::MAX
    } else {
        (1u32 << n) - 1
    }
}

/// Aligns part `part` (0 or 1) of an operand from the raw contents of its
/// physical register. Unused positions are zero; the part that holds the
/// operand's top bit fills every position from `width` upwards with that
/// bit when `signed` is set.
pub fn value_extract(raw: u32, entry: IndirectionEntry, part: usize, signed: bool, width: u32) -> u32 {
    let (mask, first) = match part {
        0 => (entry.m0, 0),
        _ => (entry.m1, entry.m0.count_ones()),
    };
    let mut out = 0u32;
    let mut slot = first;
    for s in 0..SLICES_PER_REG {
        if mask >> s & 1 == 1 {
            out |= ((raw >> (s * SLICE_BITS)) & 0xf) << (slot * SLICE_BITS);
            slot += 1;
        }
    }
    let width = width.min(32);
    out &= low_bits(width);
    let top_slot = (width - 1) / SLICE_BITS;
    let holds_top = top_slot >= first && top_slot < slot;
    if signed && width < 32 && holds_top && out >> (width - 1) & 1 == 1 {
        out |= !low_bits(width);
    }
    out
}

/// The bits a value occupies in storage: narrowed float bits, or the low
/// `bits` of an integer.
pub fn storage_bits(operand: u32, layout: ValueLayout) -> u32 {
    match layout.float {
        Some(fmt) if fmt.total < 32 => convert_down(f32::from_bits(operand), fmt).bits,
        _ => operand & low_bits(layout.bits),
    }
}

/// What a read of stored bits returns: widened floats, or integers padded
/// back to 32 bits.
pub fn widen_storage(stored: u32, layout: ValueLayout) -> u32 {
    match layout.float {
        Some(fmt) if fmt.total < 32 => convert_up(NarrowFloatBits { bits: stored, format: fmt }).to_bits(),
        _ => stored,
    }
}

/// Converts and splits an operand into at most two masked register writes.
pub fn value_truncate(operand: u32, entry: IndirectionEntry, layout: ValueLayout) -> Vec<SliceWrite> {
    let stored = storage_bits(operand, layout);
    let mut writes = vec![SliceWrite { reg: entry.r0, mask: entry.m0, data: 0 }];
    if entry.is_split() {
        writes.push(SliceWrite { reg: entry.r1, mask: entry.m1, data: 0 });
    }
    for (slot, (reg, s)) in entry.data_slices().into_iter().enumerate() {
        let nibble = (stored >> (slot as u32 * SLICE_BITS)) & 0xf;
        let w = writes.iter_mut().find(|w| w.reg == reg && w.mask >> s & 1 == 1).expect("slice belongs to a part");
        w.data |= nibble << (s * SLICE_BITS);
    }
    writes
}

/// Fetches both parts, OR-merges them and widens the result.
pub fn fetch(regs: &[u32], entry: IndirectionEntry, layout: ValueLayout) -> u32 {
    let signed = layout.signed && layout.float.is_none();
    let mut merged = value_extract(regs[entry.r0 as usize], entry, 0, signed, layout.bits);
    if entry.is_split() {
        merged |= value_extract(regs[entry.r1 as usize], entry, 1, signed, layout.bits);
    }
    widen_storage(merged, layout)
}

/// Applies writes with bitline masking.
pub fn commit(regs: &mut [u32], writes: &[SliceWrite]) {
    for w in writes {
        let m = bit_mask(w.mask);
        let r = &mut regs[w.reg as usize];
        *r = (*r & !m) | (w.data & m);
    }
}

/// Keeps every allocated value in the physical registers of one thread.
pub struct PackedMachine<'a> {
    pub regs: Vec<u32>,
    entries: &'a [Option<IndirectionEntry>],
    layouts: &'a [Option<ValueLayout>],
}

impl<'a> PackedMachine<'a> {
    pub fn new(entries: &'a [Option<IndirectionEntry>], layouts: &'a [Option<ValueLayout>], registers: usize) -> Self {
        PackedMachine { regs: vec![0; registers.max(1)], entries, layouts }
    }
}

impl ValueStore for PackedMachine<'_> {
    fn write(&mut self, v: ValueId, _ty: ScalarType, bits: u32) {
        if let (Some(e), Some(l)) = (self.entries[v.index()], self.layouts[v.index()]) {
            commit(&mut self.regs, &value_truncate(bits, e, l));
        }
    }

    fn read(&self, v: ValueId, _ty: ScalarType) -> u32 {
        match (self.entries[v.index()], self.layouts[v.index()]) {
            (Some(e), Some(l)) => fetch(&self.regs, e, l),
            _ => 0,
        }
    }
}
