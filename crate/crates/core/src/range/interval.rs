use std::cmp::{max, min};
use std::fmt;

use serde::{Serialize, Serializer};

use crate::ir::{CmpOp, ScalarType};

/// An extended integer bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bound {
    NegInf,
    Fin(i64),
    PosInf,
}

impl Bound {
    pub fn is_finite(self) -> bool {
        matches!(self, Bound::Fin(_))
    }

    fn to_i128(self, ty: ScalarType) -> i128 {
        let (lo, hi) = type_limits(ty);
        match self {
            Bound::NegInf => lo as i128,
            Bound::Fin(v) => v as i128,
            Bound::PosInf => hi as i128,
        }
    }

    fn add_const(self, c: i64) -> Bound {
        match self {
            Bound::Fin(v) => Bound::Fin(v + c),
            inf => inf,
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::NegInf => f.write_str("-inf"),
            Bound::Fin(v) => write!(f, "{v}"),
            Bound::PosInf => f.write_str("+inf"),
        }
    }
}

impl Serialize for Bound {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Bound::Fin(v) => s.serialize_i64(*v),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

/// Inclusive numeric limits of a 32-bit integer type.
pub fn type_limits(ty: ScalarType) -> (i64, i64) {
    match ty {
        ScalarType::I32 | ScalarType::F32 => (i32::MIN as i64, i32::MAX as i64),
        ScalarType::U32 => (0, u32::MAX as i64),
    }
}

/// An integer interval over extended integers, or empty.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Interval {
    Empty,
    Range { lo: Bound, hi: Bound },
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Interval::Empty => f.write_str("empty"),
            Interval::Range { lo, hi } => write!(f, "[{lo},{hi}]"),
        }
    }
}

impl Interval {
    pub const TOP: Interval = Interval::Range { lo: Bound::NegInf, hi: Bound::PosInf };

    pub fn new(lo: i64, hi: i64) -> Interval {
        if lo > hi {
            Interval::Empty
        } else {
            Interval::Range { lo: Bound::Fin(lo), hi: Bound::Fin(hi) }
        }
    }

    pub fn bounds(lo: Bound, hi: Bound) -> Interval {
        if lo > hi || lo == Bound::PosInf || hi == Bound::NegInf {
            Interval::Empty
        } else {
            Interval::Range { lo, hi }
        }
    }

    pub fn point(v: i64) -> Interval {
        Interval::new(v, v)
    }

    /// The full range of a type, with the lower bound of `u32` pinned at zero.
    pub fn top_of(ty: ScalarType) -> Interval {
        Interval::TOP.normalize(ty)
    }

    pub fn is_empty(self) -> bool {
        self == Interval::Empty
    }

    pub fn lo(self) -> Option<Bound> {
        match self {
            Interval::Range { lo, .. } => Some(lo),
            Interval::Empty => None,
        }
    }

    pub fn hi(self) -> Option<Bound> {
        match self {
            Interval::Range { hi, .. } => Some(hi),
            Interval::Empty => None,
        }
    }

    pub fn as_point(self) -> Option<i64> {
        match self {
            Interval::Range { lo: Bound::Fin(a), hi: Bound::Fin(b) } if a == b => Some(a),
            _ => None,
        }
    }

    pub fn is_bounded(self) -> bool {
        matches!(self, Interval::Range { lo: Bound::Fin(_), hi: Bound::Fin(_) })
    }

    pub fn contains(self, v: i64) -> bool {
        match self {
            Interval::Empty => false,
            Interval::Range { lo, hi } => lo <= Bound::Fin(v) && Bound::Fin(v) <= hi,
        }
    }

    /// `self ⊆ other`.
    pub fn is_subset_of(self, other: Interval) -> bool {
        match (self, other) {
            (Interval::Empty, _) => true,
            (_, Interval::Empty) => false,
            (Interval::Range { lo: a, hi: b }, Interval::Range { lo: c, hi: d }) => c <= a && b <= d,
        }
    }

    pub fn hull(self, other: Interval) -> Interval {
        match (self, other) {
            (Interval::Empty, x) | (x, Interval::Empty) => x,
            (Interval::Range { lo: a, hi: b }, Interval::Range { lo: c, hi: d }) => {
                Interval::Range { lo: min(a, c), hi: max(b, d) }
            }
        }
    }

    pub fn intersect(self, other: Interval) -> Interval {
        match (self, other) {
            (Interval::Empty, _) | (_, Interval::Empty) => Interval::Empty,
            (Interval::Range { lo: a, hi: b }, Interval::Range { lo: c, hi: d }) => {
                Interval::bounds(max(a, c), min(b, d))
            }
        }
    }

    /// Pins bounds that lie at or beyond the type limits: the `u32` lower
    /// bound becomes 0, everything else past the limits becomes infinite.
    pub fn normalize(self, ty: ScalarType) -> Interval {
        let Interval::Range { lo, hi } = self else {
            return self;
        };
        let (tlo, thi) = type_limits(ty);
        let lo = match lo {
            Bound::Fin(v) if v > tlo => Bound::Fin(v),
            _ if ty == ScalarType::U32 => Bound::Fin(0),
            _ => Bound::NegInf,
        };
        let hi = match hi {
            Bound::Fin(v) if v < thi => Bound::Fin(v),
            _ => Bound::PosInf,
        };
        Interval::bounds(lo, hi)
    }

    /// Widening: bounds that moved outward since `old` jump to infinity.
    pub fn widen(old: Interval, new: Interval) -> Interval {
        match (old, new) {
            (Interval::Empty, x) | (x, Interval::Empty) => x,
            (Interval::Range { lo: a, hi: b }, Interval::Range { lo: c, hi: d }) => Interval::Range {
                lo: if c < a { Bound::NegInf } else { a },
                hi: if d > b { Bound::PosInf } else { b },
            },
        }
    }

    /// Values `x` for which `x op y` can hold for some `y` in `self`.
    pub fn constraint(op: CmpOp, bound: Interval) -> Interval {
        let Interval::Range { lo, hi } = bound else {
            return Interval::Empty;
        };
        match op {
            CmpOp::Lt => Interval::bounds(Bound::NegInf, hi.add_const(-1)),
            CmpOp::Le => Interval::bounds(Bound::NegInf, hi),
            CmpOp::Gt => Interval::bounds(lo.add_const(1), Bound::PosInf),
            CmpOp::Ge => Interval::bounds(lo, Bound::PosInf),
            CmpOp::Eq => bound,
            CmpOp::Ne => Interval::TOP,
        }
    }
}

/// Exact-or-top interval arithmetic for 32-bit integers: infinite bounds are
/// read as type limits, and any result leaving the type range becomes top.
pub(crate) struct Arith {
    pub ty: ScalarType,
}

impl Arith {
    fn finish(&self, lo: i128, hi: i128) -> Interval {
        let (tlo, thi) = type_limits(self.ty);
        if lo < tlo as i128 || hi > thi as i128 {
            Interval::top_of(self.ty)
        } else {
            Interval::new(lo as i64, hi as i64).normalize(self.ty)
        }
    }

    fn parts(&self, a: Interval) -> Option<(i128, i128)> {
        match a {
            Interval::Empty => None,
            Interval::Range { lo, hi } => Some((lo.to_i128(self.ty), hi.to_i128(self.ty))),
        }
    }

    pub fn add(&self, a: Interval, b: Interval) -> Interval {
        match (self.parts(a), self.parts(b)) {
            (Some((a0, a1)), Some((b0, b1))) => self.finish(a0 + b0, a1 + b1),
            _ => Interval::Empty,
        }
    }

    pub fn sub(&self, a: Interval, b: Interval) -> Interval {
        match (self.parts(a), self.parts(b)) {
            (Some((a0, a1)), Some((b0, b1))) => self.finish(a0 - b1, a1 - b0),
            _ => Interval::Empty,
        }
    }

    pub fn mul(&self, a: Interval, b: Interval) -> Interval {
        match (self.parts(a), self.parts(b)) {
            (Some((a0, a1)), Some((b0, b1))) => {
                let c = [a0 * b0, a0 * b1, a1 * b0, a1 * b1];
                self.finish(*c.iter().min().unwrap(), *c.iter().max().unwrap())
            }
            _ => Interval::Empty,
        }
    }

    pub fn min(&self, a: Interval, b: Interval) -> Interval {
        match (a, b) {
            (Interval::Range { lo: a0, hi: a1 }, Interval::Range { lo: b0, hi: b1 }) => {
                Interval::Range { lo: min(a0, b0), hi: min(a1, b1) }
            }
            _ => Interval::Empty,
        }
    }

    pub fn max(&self, a: Interval, b: Interval) -> Interval {
        match (a, b) {
            (Interval::Range { lo: a0, hi: a1 }, Interval::Range { lo: b0, hi: b1 }) => {
                Interval::Range { lo: max(a0, b0), hi: max(a1, b1) }
            }
            _ => Interval::Empty,
        }
    }

    /// Shift left by a constant amount (taken modulo 32, as executed).
    pub fn shl(&self, a: Interval, by: Interval) -> Interval {
        let (Some((a0, a1)), Some(s)) = (self.parts(a), by.as_point()) else {
            return if a.is_empty() || by.is_empty() { Interval::Empty } else { Interval::top_of(self.ty) };
        };
        let s = (s & 31) as u32;
        self.finish(a0 << s, a1 << s)
    }

    /// Shift right by a constant amount: arithmetic for `i32`, logical for `u32`.
    pub fn shr(&self, a: Interval, by: Interval) -> Interval {
        let (Some((a0, a1)), Some(s)) = (self.parts(a), by.as_point()) else {
            return if a.is_empty() || by.is_empty() { Interval::Empty } else { Interval::top_of(self.ty) };
        };
        let s = (s & 31) as u32;
        self.finish(a0 >> s, a1 >> s)
    }
}
