//! Reduced-precision floating-point formats and the one-step conversions
//! performed by the value converter (widening) and value truncator
//! (narrowing).
//!
//! Encodings are `[sign | exponent | mantissa]`, right-aligned in a `u32`.
//! There are no denormals: anything that would land below the smallest
//! normal becomes a signed zero.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FloatFormat {
    pub total: u32,
    pub exp: u32,
    pub man: u32,
}

impl fmt::Display for FloatFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.total, self.exp, self.man)
    }
}

impl FloatFormat {
    pub const F32: FloatFormat = FloatFormat { total: 32, exp: 8, man: 23 };
    pub const F28: FloatFormat = FloatFormat { total: 28, exp: 7, man: 20 };
    pub const F24: FloatFormat = FloatFormat { total: 24, exp: 6, man: 17 };
    pub const F20: FloatFormat = FloatFormat { total: 20, exp: 5, man: 14 };
    pub const F16: FloatFormat = FloatFormat { total: 16, exp: 5, man: 10 };
    pub const F12: FloatFormat = FloatFormat { total: 12, exp: 4, man: 7 };
    pub const F8: FloatFormat = FloatFormat { total: 8, exp: 3, man: 4 };

    /// All supported formats, widest first.
    pub const ALL: [FloatFormat; 7] = [
        FloatFormat::F32,
        FloatFormat::F28,
        FloatFormat::F24,
        FloatFormat::F20,
        FloatFormat::F16,
        FloatFormat::F12,
        FloatFormat::F8,
    ];

    pub fn from_total(bits: u32) -> Option<FloatFormat> {
        FloatFormat::ALL.into_iter().find(|f| f.total == bits)
    }

    pub fn bias(self) -> i32 {
        (1 << (self.exp - 1)) - 1
    }

    fn exp_all_ones(self) -> u32 {
        (1 << self.exp) - 1
    }

    fn man_mask(self) -> u32 {
        (1u32 << self.man) - 1
    }

    fn sign_shift(self) -> u32 {
        self.total - 1
    }

    pub fn infinity(self, negative: bool) -> u32 {
        ((negative as u32) << self.sign_shift()) | (self.exp_all_ones() << self.man)
    }

    /// All-ones exponent with the mantissa MSB set, positive sign.
    pub fn canonical_nan(self) -> u32 {
        (self.exp_all_ones() << self.man) | (1 << (self.man - 1))
    }

    /// Largest finite encoding of the given sign.
    pub fn max_finite_bits(self, negative: bool) -> u32 {
        self.infinity(negative) - 1
    }

    pub fn max_finite(self) -> f32 {
        convert_up(NarrowFloatBits { bits: self.max_finite_bits(false), format: self })
    }

    pub fn min_normal(self) -> f32 {
        convert_up(NarrowFloatBits { bits: 1 << self.man, format: self })
    }

    pub fn classify(self, bits: u32) -> FloatClass {
        let e = (bits >> self.man) & self.exp_all_ones();
        let m = bits & self.man_mask();
        match (e, m) {
            (0, 0) => FloatClass::Zero,
            (0, _) => FloatClass::Denormal,
            (e, 0) if e == self.exp_all_ones() => FloatClass::Infinite,
            (e, _) if e == self.exp_all_ones() => FloatClass::Nan,
            _ => FloatClass::Normal,
        }
    }

    /// True for encodings this module can produce: no denormals, only the
    /// canonical NaN, and nothing above the top bit.
    pub fn is_well_formed(self, bits: u32) -> bool {
        if self.total < 32 && bits >> self.total != 0 {
            return false;
        }
        match self.classify(bits) {
            FloatClass::Denormal => false,
            FloatClass::Nan => bits == self.canonical_nan(),
            _ => true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FloatClass {
    Zero,
    Denormal,
    Normal,
    Infinite,
    Nan,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rounding {
    #[default]
    NearestEven,
    TowardZero,
}

/// A narrow float bit pattern tagged with its format.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NarrowFloatBits {
    pub bits: u32,
    pub format: FloatFormat,
}

pub fn convert_down(x: f32, fmt: FloatFormat) -> NarrowFloatBits {
    convert_down_with(x, fmt, Rounding::NearestEven)
}

/// Narrows a single-precision value. Source denormals and results below
/// the smallest normal flush to signed zero; overflow gives infinity
/// (or the largest finite value when rounding toward zero).
pub fn convert_down_with(x: f32, fmt: FloatFormat, rounding: Rounding) -> NarrowFloatBits {
    let src = x.to_bits();
    let negative = src >> 31 == 1;
    let sign = (negative as u32) << fmt.sign_shift();
    let src_exp = (src >> 23) & 0xff;
    let src_man = src & 0x7f_ffff;
    let bits = if x.is_nan() {
        fmt.canonical_nan()
    } else if x.is_infinite() {
        fmt.infinity(negative)
    } else if src_exp == 0 {
        sign
    } else {
        let mut e = src_exp as i32 - 127 + fmt.bias();
        let shift = 23 - fmt.man;
        let mut m = src_man >> shift;
        if shift > 0 && rounding == Rounding::NearestEven {
            let rem = src_man & ((1 << shift) - 1);
            let half = 1 << (shift - 1);
            if rem > half || (rem == half && m & 1 == 1) {
                m += 1;
                if m > fmt.man_mask() {
                    m = 0;
                    e += 1;
                }
            }
        }
        if e <= 0 {
            sign
        } else if e >= fmt.exp_all_ones() as i32 {
            match rounding {
                Rounding::NearestEven => fmt.infinity(negative),
                Rounding::TowardZero => fmt.max_finite_bits(negative),
            }
        } else {
            sign | ((e as u32) << fmt.man) | m
        }
    };
    NarrowFloatBits { bits, format: fmt }
}

/// Widens to single precision. Exact for every zero, normal and infinity;
/// any NaN encoding widens to a quiet NaN.
pub fn convert_up(b: NarrowFloatBits) -> f32 {
    let fmt = b.format;
    let negative = (b.bits >> fmt.sign_shift()) & 1 == 1;
    let sign = (negative as u32) << 31;
    let e = (b.bits >> fmt.man) & fmt.exp_all_ones();
    let m = b.bits & fmt.man_mask();
    let out = if e == fmt.exp_all_ones() {
        if m == 0 {
            sign | 0x7f80_0000
        } else {
            0x7fc0_0000
        }
    } else if e == 0 {
        sign
    } else {
        let e32 = (e as i32 - fmt.bias() + 127) as u32;
        sign | (e32 << 23) | (m << (23 - fmt.man))
    };
    f32::from_bits(out)
}

/// The value a float holds after being stored in `fmt`. Full-width
/// values are stored untouched.
pub fn quantize(x: f32, fmt: FloatFormat) -> f32 {
    if fmt.total >= 32 {
        x
    } else {
        convert_up(convert_down(x, fmt))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format_invariants() {
        for f in FloatFormat::ALL {
            assert_eq!(1 + f.exp + f.man, f.total);
            assert_eq!(f.total % 4, 0);
        }
        assert_eq!(FloatFormat::F16.bias(), 15);
        assert_eq!(FloatFormat::F16.max_finite(), 65504.0);
        assert_eq!(FloatFormat::F16.min_normal(), 2f32.powi(-14));
    }

    #[test]
    fn one_in_half() {
        let b = convert_down(1.0, FloatFormat::F16).bits;
        assert_eq!(b, 15 << 10);
        for f in FloatFormat::ALL {
            assert_eq!(convert_up(convert_down(1.0, f)), 1.0);
        }
    }

    #[test]
    fn specials() {
        for f in FloatFormat::ALL {
            assert_eq!(convert_down(f32::INFINITY, f).bits, f.infinity(false));
            assert_eq!(convert_down(f32::NEG_INFINITY, f).bits, f.infinity(true));
            assert_eq!(convert_down(f32::NAN, f).bits, f.canonical_nan());
            assert!(convert_up(convert_down(f32::NAN, f)).is_nan());
            assert_eq!(convert_down(f.min_normal() / 2.0, f).bits, 0);
            assert_eq!(convert_down(-f.min_normal() / 2.0, f).bits, 1 << (f.total - 1));
        }
        assert_eq!(convert_down(f32::from_bits(1), FloatFormat::F32).bits, 0);
    }

    #[test]
    fn rounding_modes() {
        // 1 + 2^-11 is a tie in half precision: even mantissa wins.
        let tie = 1.0 + 2f32.powi(-11);
        assert_eq!(convert_down(tie, FloatFormat::F16).bits, 15 << 10);
        let above = 1.0 + 3.0 * 2f32.powi(-11);
        assert_eq!(convert_down(above, FloatFormat::F16).bits, (15 << 10) | 2);
        assert_eq!(convert_down_with(above, FloatFormat::F16, Rounding::TowardZero).bits, (15 << 10) | 1);
        assert_eq!(convert_down(1e6, FloatFormat::F16).bits, FloatFormat::F16.infinity(false));
        assert_eq!(
            convert_down_with(1e6, FloatFormat::F16, Rounding::TowardZero).bits,
            FloatFormat::F16.max_finite_bits(false)
        );
    }

    #[test]
    fn exhaustive_small_formats_are_idempotent() {
        for f in [FloatFormat::F8, FloatFormat::F12, FloatFormat::F16] {
            for bits in 0..(1u32 << f.total) {
                if f.is_well_formed(bits) {
                    let b = NarrowFloatBits { bits, format: f };
                    assert_eq!(convert_down(convert_up(b), f), b, "{f} {bits:#x}");
                }
            }
        }
    }
}
