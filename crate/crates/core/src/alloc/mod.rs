//! Slice allocation: packs width-annotated values into 4-bit slices of
//! physical registers, splitting a value over at most two registers, and
//! builds the per-kernel indirection table.

mod table;

pub use table::{
    dump_binary, dump_text, load_binary, load_text, round_width_to_slices, table_words, IndirectionEntry,
    TableError, WidthOutOfRange, SLICES_PER_REG, SLICE_BITS, TABLE_ROWS,
};

use std::collections::BTreeSet;

use serde::Serialize;

use crate::ir::{Kernel, LiveRanges, ValueId};
use crate::minifloat::FloatFormat;
use crate::range::RangeAnalysis;
use crate::tuner::PrecisionAssignment;

/// How a value is stored.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ValueLayout {
    pub bits: u32,
    /// Pad with copies of the top bit when widening (signed integers).
    pub signed: bool,
    /// Storage format for float values.
    pub float: Option<FloatFormat>,
}

impl ValueLayout {
    pub fn slices(&self) -> u32 {
        self.bits.div_ceil(SLICE_BITS)
    }
}

/// Layouts from the range analysis and a precision assignment. Dead values
/// get none; integers without an annotation keep all 32 bits.
pub fn packed_layouts(
    k: &Kernel,
    ranges: &RangeAnalysis,
    pa: Option<&PrecisionAssignment>,
    live: &LiveRanges,
) -> Vec<Option<ValueLayout>> {
    k.value_ids()
        .map(|v| {
            if live.is_dead(v) {
                return None;
            }
            Some(if k.ty(v).is_float() {
                let fmt = pa.and_then(|p| p.get(v)).unwrap_or(FloatFormat::F32);
                ValueLayout { bits: fmt.total, signed: false, float: Some(fmt) }
            } else {
                match ranges.widths.get(v.index()).copied().flatten() {
                    Some(w) => ValueLayout { bits: w.bits, signed: w.signed, float: None },
                    None => ValueLayout { bits: 32, signed: false, float: None },
                }
            })
        })
        .collect()
}

/// Every live value in a full 32-bit register.
pub fn baseline_layouts(k: &Kernel, live: &LiveRanges) -> Vec<Option<ValueLayout>> {
    k.value_ids()
        .map(|v| {
            (!live.is_dead(v)).then(|| ValueLayout {
                bits: 32,
                signed: false,
                float: k.ty(v).is_float().then_some(FloatFormat::F32),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum AllocError {
    #[error("{0} physical registers exceed the 256 addressable by the table")]
    TooManyPhysical(usize),
    #[error("{0} architectural registers exceed the 256-row table")]
    TooManyArchitectural(usize),
    #[error(transparent)]
    Width(#[from] WidthOutOfRange),
}

#[derive(Clone, Debug, Serialize)]
pub struct Allocation {
    pub layouts: Vec<Option<ValueLayout>>,
    pub entries: Vec<Option<IndirectionEntry>>,
    /// Architectural register of every allocated value.
    pub arch: Vec<Option<u8>>,
    /// Table contents indexed by architectural register.
    pub table: Vec<IndirectionEntry>,
    /// Largest number of physical registers referenced by simultaneously live values.
    pub register_pressure: usize,
    /// Physical registers the kernel occupies per thread.
    pub registers_used: usize,
    pub max_wasted_slices: usize,
    pub mean_wasted_slices: f64,
    /// The packed placement did worse than one register per value and was replaced.
    pub used_baseline_fallback: bool,
}

impl Allocation {
    /// Checks that live values never share a slice, every entry holds its
    /// value's width in at most two registers, and the reported pressure
    /// matches a recount.
    pub fn verify(&self, live: &LiveRanges) -> Result<(), String> {
        for (i, (e, l)) in self.entries.iter().zip(&self.layouts).enumerate() {
            match (e, l) {
                (Some(e), Some(l)) => {
                    if e.slice_count() < l.slices() {
                        return Err(format!("value {i}: {} slices for {} bits", e.slice_count(), l.bits));
                    }
                    if e.m0 == 0 || (e.is_split() && e.r0 == e.r1) {
                        return Err(format!("value {i}: malformed entry {e}"));
                    }
                }
                (None, None) => {}
                _ => return Err(format!("value {i}: entry and layout disagree")),
            }
        }
        for p in 0..live.points().len() {
            let mut used = std::collections::BTreeMap::<u8, u8>::new();
            for v in live.live_at(p) {
                let Some(e) = self.entry(*v) else {
                    return Err(format!("live value {} has no entry", v.0));
                };
                for (r, m) in [(e.r0, e.m0), (e.r1, e.m1)] {
                    let slot = used.entry(r).or_default();
                    if *slot & m != 0 {
                        return Err(format!("slices of r{r} shared at point {p}"));
                    }
                    *slot |= m;
                }
            }
        }
        let recount = register_pressure(&self.entries, live);
        if recount != self.register_pressure {
            return Err(format!("pressure {} but recount gives {recount}", self.register_pressure));
        }
        Ok(())
    }

    pub fn entry(&self, v: ValueId) -> Option<IndirectionEntry> {
        self.entries.get(v.index()).copied().flatten()
    }

    pub fn layout(&self, v: ValueId) -> Option<ValueLayout> {
        self.layouts.get(v.index()).copied().flatten()
    }
}

struct Placer<'a> {
    live: &'a LiveRanges,
    /// `occupants[r][s]`: values placed in slice `s` of register `r`.
    occupants: Vec<[Vec<ValueId>; 8]>,
}

fn lowest_bits(mask: u8, n: u32) -> u8 {
    let mut out = 0u8;
    let mut left = n;
    for s in 0..8 {
        if left == 0 {
            break;
        }
        if mask >> s & 1 == 1 {
            out |= 1 << s;
            left -= 1;
        }
    }
    out
}

fn contiguous_run(mask: u8, n: u32) -> Option<u8> {
    let run = ((1u16 << n) - 1) as u8;
    (0..=(8 - n)).map(|s| run << s).find(|m| mask & m == *m)
}

impl Placer<'_> {
    fn free_mask(&self, r: usize, v: ValueId) -> u8 {
        let mut mask = 0u8;
        for (s, occ) in self.occupants[r].iter().enumerate() {
            if occ.iter().all(|&o| !self.live.interferes(o, v)) {
                mask |= 1 << s;
            }
        }
        mask
    }

    fn occupy(&mut self, r: u8, mask: u8, v: ValueId) {
        for s in 0..8 {
            if mask >> s & 1 == 1 {
                self.occupants[r as usize][s].push(v);
            }
        }
    }

    fn new_register(&mut self) -> u8 {
        self.occupants.push(Default::default());
        (self.occupants.len() - 1) as u8
    }

    /// First fit: a contiguous run in one register, any free slices in one
    /// register, a two-way split, or a fresh register, in that order.
    fn place(&mut self, v: ValueId, n: u32) -> IndirectionEntry {
        let free: Vec<u8> = (0..self.occupants.len()).map(|r| self.free_mask(r, v)).collect();
        let entry = if let Some((r, m)) =
            free.iter().enumerate().find_map(|(r, &f)| contiguous_run(f, n).map(|m| (r, m)))
        {
            IndirectionEntry { r0: r as u8, m0: m, r1: 0, m1: 0 }
        } else if let Some(r) = free.iter().position(|f| f.count_ones() >= n) {
            IndirectionEntry { r0: r as u8, m0: lowest_bits(free[r], n), r1: 0, m1: 0 }
        } else if let Some((r0, r1)) = self.split_pair(&free, n) {
            let first = free[r0].count_ones();
            IndirectionEntry { r0: r0 as u8, m0: free[r0], r1: r1 as u8, m1: lowest_bits(free[r1], n - first) }
        } else {
            let r = self.new_register();
            IndirectionEntry { r0: r, m0: lowest_bits(0xff, n), r1: 0, m1: 0 }
        };
        self.occupy(entry.r0, entry.m0, v);
        if entry.m1 != 0 {
            self.occupy(entry.r1, entry.m1, v);
        }
        entry
    }

    fn split_pair(&self, free: &[u8], n: u32) -> Option<(usize, usize)> {
        for (r0, f0) in free.iter().enumerate() {
            let a = f0.count_ones();
            if a == 0 || a >= n {
                continue;
            }
            for (r1, f1) in free.iter().enumerate() {
                if r1 != r0 && f1.count_ones() >= n - a {
                    return Some((r0, r1));
                }
            }
        }
        None
    }
}

/// Definition order compatible with dominance: parameters, then
/// instruction results with blocks in reverse postorder.
fn dominance_order(k: &Kernel) -> Vec<ValueId> {
    let mut order: Vec<ValueId> = k.scalar_params().map(|(v, _)| v).collect();
    let cfg = k.cfg();
    let mut seen = vec![false; k.blocks.len()];
    for &b in cfg.rpo() {
        seen[b.index()] = true;
        order.extend(k.block(b).insts.iter().filter_map(|i| i.dest));
    }
    for b in k.block_ids().filter(|b| !seen[b.index()]) {
        order.extend(k.block(b).insts.iter().filter_map(|i| i.dest));
    }
    order
}

fn place_all(k: &Kernel, layouts: &[Option<ValueLayout>], live: &LiveRanges, slices: impl Fn(ValueLayout) -> u32) -> (Vec<Option<IndirectionEntry>>, usize) {
    let mut placer = Placer { live, occupants: Vec::new() };
    let mut entries = vec![None; k.values.len()];
    for v in dominance_order(k) {
        if let Some(layout) = layouts[v.index()] {
            entries[v.index()] = Some(placer.place(v, slices(layout)));
        }
    }
    (entries, placer.occupants.len())
}

/// Largest number of distinct physical registers referenced by the values
/// live at any one point.
pub fn register_pressure(entries: &[Option<IndirectionEntry>], live: &LiveRanges) -> usize {
    (0..live.points().len())
        .map(|p| {
            live.live_at(p)
                .iter()
                .filter_map(|v| entries[v.index()])
                .flat_map(|e| e.registers())
                .collect::<BTreeSet<u8>>()
                .len()
        })
        .max()
        .unwrap_or(0)
}

/// Packs every value with a layout. The result never uses more registers
/// than giving each value a register of its own.
pub fn allocate(k: &Kernel, layouts: &[Option<ValueLayout>], live: &LiveRanges) -> Result<Allocation, AllocError> {
    for l in layouts.iter().flatten() {
        round_width_to_slices(l.bits)?;
    }
    let (packed, packed_regs) = place_all(k, layouts, live, |l| l.slices());
    let (baseline, baseline_regs) = place_all(k, layouts, live, |_| SLICES_PER_REG);
    let packed_pressure = register_pressure(&packed, live);
    let baseline_pressure = register_pressure(&baseline, live);

    let fallback = packed_pressure > baseline_pressure || packed_regs > baseline_regs;
    let (entries, registers_used) = if fallback {
        let narrowed = baseline
            .iter()
            .zip(layouts)
            .map(|(e, l)| match (e, l) {
                (Some(e), Some(l)) => Some(IndirectionEntry { r0: e.r0, m0: lowest_bits(0xff, l.slices()), r1: 0, m1: 0 }),
                _ => None,
            })
            .collect();
        (narrowed, baseline_regs)
    } else {
        (packed, packed_regs)
    };
    if registers_used > 256 {
        return Err(AllocError::TooManyPhysical(registers_used));
    }

    let distinct: BTreeSet<IndirectionEntry> = entries.iter().flatten().copied().collect();
    if distinct.len() > TABLE_ROWS {
        return Err(AllocError::TooManyArchitectural(distinct.len()));
    }
    let table: Vec<IndirectionEntry> = distinct.into_iter().collect();
    let arch = entries
        .iter()
        .map(|e| e.map(|e| table.binary_search(&e).expect("entry is in the table") as u8))
        .collect();

    let mut wasted = Vec::with_capacity(live.points().len());
    for p in 0..live.points().len() {
        let set = live.live_at(p);
        let regs: BTreeSet<u8> = set.iter().filter_map(|v| entries[v.index()]).flat_map(|e| e.registers()).collect();
        let used: u32 = set.iter().filter_map(|v| entries[v.index()]).map(|e| e.slice_count()).sum();
        wasted.push(regs.len() * SLICES_PER_REG as usize - used as usize);
    }
    let register_pressure = register_pressure(&entries, live);
    Ok(Allocation {
        layouts: layouts.to_vec(),
        entries,
        arch,
        table,
        register_pressure,
        registers_used,
        max_wasted_slices: wasted.iter().copied().max().unwrap_or(0),
        mean_wasted_slices: if wasted.is_empty() { 0.0 } else { wasted.iter().sum::<usize>() as f64 / wasted.len() as f64 },
        used_baseline_fallback: fallback,
    })
}
