use serde::Serialize;

use super::interval::{Bound, Interval};
use super::EssaKernel;
use crate::ir::{InstKind, ValueId};

/// Widths above this many bits are annotated as a full 32-bit register.
pub const FULL_WIDTH_CUTOFF: u32 = 28;

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum WidthError {
    #[error("empty interval: the value never exists")]
    EmptyInterval,
}

/// Minimal binary width for every point of `iv`: unsigned when `signed` is
/// false and the interval is non-negative, two's complement otherwise.
/// Infinite bounds need all 32 bits.
pub fn bitwidth(iv: Interval, signed: bool) -> Result<u32, WidthError> {
    let Interval::Range { lo, hi } = iv else {
        return Err(WidthError::EmptyInterval);
    };
    let (Bound::Fin(lo), Bound::Fin(hi)) = (lo, hi) else {
        return Ok(32);
    };
    let bits = if !signed && lo >= 0 {
        (64 - (hi as u64).leading_zeros()).max(1)
    } else {
        // Smallest n with -2^(n-1) <= lo and hi <= 2^(n-1) - 1.
        let need = |x: i64| if x < 0 { 65 - (!x as u64).leading_zeros() } else { 65 - (x as u64).leading_zeros() };
        need(lo).max(need(hi))
    };
    Ok(bits.min(32))
}

/// Partition of e-SSA values into original variables: phi operands and
/// sigma sources join the group of the value they define.
pub fn variable_groups(e: &EssaKernel) -> Vec<usize> {
    let n = e.kernel.values.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut union = |a: usize, b: usize| {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            parent[hi] = lo;
        }
    };
    for b in &e.kernel.blocks {
        for inst in &b.insts {
            let Some(d) = inst.dest else { continue };
            if matches!(inst.kind, InstKind::Phi(_) | InstKind::Sigma(_)) {
                for a in inst.args.iter().filter_map(|a| a.value()) {
                    union(d.index(), a.index());
                }
            }
        }
    }
    (0..n).map(|i| find(&mut parent, i)).collect()
}

/// Hull of each group's intervals, indexed by group representative. Empty
/// members contribute nothing.
pub fn merge_ranges(ranges: &[Option<Interval>], groups: &[usize]) -> Vec<Option<Interval>> {
    let mut merged: Vec<Option<Interval>> = vec![None; ranges.len()];
    for (i, r) in ranges.iter().enumerate() {
        if let Some(iv) = r {
            let slot = &mut merged[groups[i]];
            *slot = Some(slot.unwrap_or(Interval::Empty).hull(*iv));
        }
    }
    merged
}

/// Width annotation of one integer value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct WidthAnnotation {
    pub lo: Bound,
    pub hi: Bound,
    pub bits: u32,
    /// True when the stored bits are two's complement and must be sign-extended.
    pub signed: bool,
}

impl WidthAnnotation {
    pub fn interval(&self) -> Interval {
        Interval::bounds(self.lo, self.hi)
    }

    /// Annotation for a merged variable interval. Non-negative values are
    /// stored unsigned even when their type is `i32`; `None` when the
    /// variable never holds a value.
    pub fn for_interval(iv: Interval, type_signed: bool) -> Option<WidthAnnotation> {
        let Interval::Range { lo, hi } = iv else {
            return None;
        };
        let signed = type_signed && lo < Bound::Fin(0);
        let mut bits = bitwidth(iv, signed).ok()?;
        if bits > FULL_WIDTH_CUTOFF {
            bits = 32;
        }
        Some(WidthAnnotation { lo, hi, bits, signed })
    }
}

/// Per-value annotation lookup for the original (non e-SSA) values.
pub fn annotate(e: &EssaKernel, ranges: &[Option<Interval>]) -> Vec<Option<WidthAnnotation>> {
    let groups = variable_groups(e);
    let merged = merge_ranges(ranges, &groups);
    (0..e.original_values)
        .map(|i| {
            let ty = e.kernel.ty(ValueId(i as u32));
            if ty.is_float() {
                return None;
            }
            let iv = merged[groups[i]].unwrap_or(Interval::Empty);
            WidthAnnotation::for_interval(iv, ty.is_signed())
        })
        .collect()
}
