//! Concrete 32-bit semantics shared by the interpreter and constant folding.
//! Values travel as raw bit patterns.

use super::{BinOp, CmpOp, Imm, ScalarType, SpecialFn};

/// Integer arithmetic wraps; division by zero yields 0; shift amounts are
/// taken modulo 32; `shr` is arithmetic on `i32` and logical on `u32`.
pub fn int_binop(op: BinOp, ty: ScalarType, a: u32, b: u32) -> u32 {
    let signed = ty.is_signed();
    let (sa, sb) = (a as i32, b as i32);
    match op {
        BinOp::Add => a.wrapping_add(b),
        BinOp::Sub => a.wrapping_sub(b),
        BinOp::Mul => a.wrapping_mul(b),
        BinOp::Div => match (b, signed) {
            (0, _) => 0,
            (_, true) => sa.wrapping_div(sb) as u32,
            (_, false) => a / b,
        },
        BinOp::Min => {
            if signed {
                sa.min(sb) as u32
            } else {
                a.min(b)
            }
        }
        BinOp::Max => {
            if signed {
                sa.max(sb) as u32
            } else {
                a.max(b)
            }
        }
        BinOp::And => a & b,
        BinOp::Or => a | b,
        BinOp::Xor => a ^ b,
        BinOp::Shl => a.wrapping_shl(b & 31),
        BinOp::Shr => {
            if signed {
                (sa >> (b & 31)) as u32
            } else {
                a >> (b & 31)
            }
        }
    }
}

/// IEEE single-precision arithmetic; bitwise operations are not defined on floats.
pub fn float_binop(op: BinOp, a: f32, b: f32) -> f32 {
    match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div => a / b,
        BinOp::Min => a.min(b),
        BinOp::Max => a.max(b),
        _ => f32::NAN,
    }
}

pub fn compare(op: CmpOp, ty: ScalarType, a: u32, b: u32) -> bool {
    match ty {
        ScalarType::F32 => {
            let (x, y) = (f32::from_bits(a), f32::from_bits(b));
            match op {
                CmpOp::Lt => x < y,
                CmpOp::Le => x <= y,
                CmpOp::Gt => x > y,
                CmpOp::Ge => x >= y,
                CmpOp::Eq => x == y,
                CmpOp::Ne => x != y,
            }
        }
        ScalarType::I32 => ordered(op, (a as i32).cmp(&(b as i32))),
        ScalarType::U32 => ordered(op, a.cmp(&b)),
    }
}

fn ordered(op: CmpOp, o: std::cmp::Ordering) -> bool {
    use std::cmp::Ordering::*;
    match op {
        CmpOp::Lt => o == Less,
        CmpOp::Le => o != Greater,
        CmpOp::Gt => o == Greater,
        CmpOp::Ge => o != Less,
        CmpOp::Eq => o == Equal,
        CmpOp::Ne => o != Equal,
    }
}

pub fn special(f: SpecialFn, x: f32) -> f32 {
    match f {
        SpecialFn::Sin => x.sin(),
        SpecialFn::Cos => x.cos(),
        SpecialFn::Log => x.ln(),
        SpecialFn::Exp => x.exp(),
        SpecialFn::Rsqrt => 1.0 / x.sqrt(),
    }
}

/// Type conversion. Integer to integer reinterprets the bits; float to
/// integer truncates and saturates.
pub fn convert(from: ScalarType, to: ScalarType, bits: u32) -> u32 {
    match (from, to) {
        (ScalarType::F32, ScalarType::F32) => bits,
        (ScalarType::F32, ScalarType::I32) => f32::from_bits(bits) as i32 as u32,
        (ScalarType::F32, ScalarType::U32) => f32::from_bits(bits) as u32,
        (ScalarType::I32, ScalarType::F32) => (bits as i32 as f32).to_bits(),
        (ScalarType::U32, ScalarType::F32) => (bits as f32).to_bits(),
        _ => bits,
    }
}

/// Bit pattern of an immediate at a given type.
pub fn imm_bits(imm: Imm, ty: ScalarType) -> u32 {
    match (imm, ty.is_float()) {
        (Imm::Int(v), false) => v as u32,
        (Imm::Int(v), true) => (v as f32).to_bits(),
        (Imm::Float(f), true) => f.to_bits(),
        (Imm::Float(f), false) => f as i64 as u32,
    }
}

/// Numeric value of an integer bit pattern under its type.
pub fn int_value(ty: ScalarType, bits: u32) -> i64 {
    if ty.is_signed() {
        bits as i32 as i64
    } else {
        bits as i64
    }
}
