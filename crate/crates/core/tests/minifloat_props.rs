mod common;

use proptest::prelude::*;
use regpack::minifloat::{convert_down, convert_down_with, convert_up, quantize, FloatFormat, NarrowFloatBits, Rounding};

#[test]
fn narrow_formats_match_the_encoding_table() {
    let mut rng = common::rng(21);
    for fmt in FloatFormat::ALL.into_iter().filter(|f| f.total <= 20) {
        let table = common::EncodingTable::new(fmt);
        for _ in 0..50_000 {
            let x = common::random_f32(&mut rng, fmt);
            assert_eq!(common::minifloat_mismatch(fmt, Some(&table), x), None);
        }
    }
}

#[test]
fn every_format_matches_the_bracket_oracle() {
    let mut rng = common::rng(22);
    for fmt in FloatFormat::ALL {
        for _ in 0..50_000 {
            let x = common::random_f32(&mut rng, fmt);
            assert_eq!(common::minifloat_mismatch(fmt, None, x), None);
        }
    }
}

#[test]
fn half_precision_round_trips_every_encoding() {
    let fmt = FloatFormat::F16;
    for bits in 0..=u16::MAX as u32 {
        let e = bits >> 10 & 0x1f;
        let m = bits & 0x3ff;
        let sign = bits & 0x8000;
        let want = match (e, m) {
            (0x1f, m) if m != 0 => fmt.canonical_nan(),
            (0, _) => sign,
            _ => bits,
        };
        let up = convert_up(NarrowFloatBits { bits, format: fmt });
        assert_eq!(convert_down(up, fmt).bits, want, "{bits:#06x}");
    }
}

#[test]
fn denormal_inputs_flush_to_signed_zero() {
    for fmt in FloatFormat::ALL {
        for bits in [1u32, 0x40_0000, 0x7f_ffff] {
            for sign in [0, 0x8000_0000] {
                let x = f32::from_bits(sign | bits);
                let y = quantize(x, fmt);
                if fmt.total < 32 {
                    assert_eq!(y.to_bits(), sign, "{fmt}");
                }
                assert_eq!(convert_down(x, fmt).bits, (sign != 0) as u32 * (1 << (fmt.total - 1)), "{fmt}");
            }
        }
    }
}

#[test]
fn specials_are_preserved() {
    for fmt in FloatFormat::ALL {
        assert_eq!(convert_down(f32::NAN, fmt).bits, fmt.canonical_nan());
        assert_eq!(convert_down(-f32::NAN, fmt).bits, fmt.canonical_nan());
        assert_eq!(convert_down(f32::INFINITY, fmt).bits, fmt.infinity(false));
        assert_eq!(convert_down(f32::NEG_INFINITY, fmt).bits, fmt.infinity(true));
        assert!(quantize(f32::NAN, fmt).is_nan());
        assert_eq!(quantize(f32::NEG_INFINITY, fmt), f32::NEG_INFINITY);
    }
}

#[test]
fn single_precision_storage_is_identity() {
    let mut rng = common::rng(23);
    for _ in 0..10_000 {
        let x = f32::from_bits(rand::Rng::gen(&mut rng));
        assert_eq!(quantize(x, FloatFormat::F32).to_bits(), x.to_bits());
    }
}

fn finite() -> impl Strategy<Value = f32> {
    any::<u32>().prop_map(f32::from_bits).prop_filter("finite", |x| x.is_finite())
}

fn format() -> impl Strategy<Value = FloatFormat> {
    prop::sample::select(FloatFormat::ALL.to_vec())
}

proptest! {
    #[test]
    fn quantize_is_idempotent(x in finite(), fmt in format()) {
        let once = quantize(x, fmt);
        prop_assert_eq!(quantize(once, fmt).to_bits(), once.to_bits());
    }

    #[test]
    fn quantize_is_monotone(a in finite(), b in finite(), fmt in format()) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(quantize(lo, fmt) <= quantize(hi, fmt));
    }

    #[test]
    fn toward_zero_never_grows(x in finite(), fmt in format()) {
        let y = convert_up(convert_down_with(x, fmt, Rounding::TowardZero));
        prop_assert!(y.is_finite());
        prop_assert!(y.abs() <= x.abs());
    }

    #[test]
    fn nearest_is_no_farther_than_toward_zero(x in finite(), fmt in format()) {
        let n = convert_up(convert_down(x, fmt));
        let z = convert_up(convert_down_with(x, fmt, Rounding::TowardZero));
        if n.is_finite() {
            prop_assert!((n as f64 - x as f64).abs() <= (z as f64 - x as f64).abs());
        }
    }
}

#[test]
fn oracles_agree_on_known_half_precision_cases() {
    let t = common::EncodingTable::new(FloatFormat::F16);
    let cases = [
        (1.0 + 2f32.powi(-11), 0x3c00),
        (1.0 + 3.0 * 2f32.powi(-11), 0x3c02),
        (65519.0, 0x7bff),
        (65520.0, 0x7c00),
        (2f32.powi(-14), 0x0400),
        (2f32.powi(-14) * (1.0 - 2f32.powi(-12)), 0x0400),
        (2f32.powi(-15), 0),
        (-0.0, 0x8000),
    ];
    for (x, want) in cases {
        assert_eq!(t.nearest(x), want, "{x:e}");
        let v = common::nearest_value(x, FloatFormat::F16);
        let decoded = convert_up(NarrowFloatBits { bits: want, format: FloatFormat::F16 }) as f64;
        assert_eq!(v.to_bits(), decoded.to_bits(), "{x:e}");
    }
}
