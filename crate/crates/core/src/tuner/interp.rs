//! Reference interpreter. Every instruction computes at 32-bit precision;
//! where results live between instructions is up to a [`ValueStore`].

use std::collections::BTreeMap;

use serde::Serialize;

use super::PrecisionAssignment;
use crate::ir::eval::{self, imm_bits, int_value};
use crate::ir::{BlockId, InstKind, Kernel, Operand, Param, ScalarType, Terminator, ValueId};
use crate::minifloat::quantize;

/// Storage for SSA values. `write` receives the exact 32-bit result; a store
/// may keep a narrowed copy, and `read` returns what the next user sees.
pub trait ValueStore {
    fn write(&mut self, v: ValueId, ty: ScalarType, bits: u32);
    fn read(&self, v: ValueId, ty: ScalarType) -> u32;
}

/// Plain storage with per-value float rounding.
pub struct RoundingStore<'a> {
    values: Vec<u32>,
    pa: Option<&'a PrecisionAssignment>,
}

impl<'a> RoundingStore<'a> {
    pub fn new(k: &Kernel, pa: Option<&'a PrecisionAssignment>) -> Self {
        RoundingStore { values: vec![0; k.values.len()], pa }
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }
}

impl ValueStore for RoundingStore<'_> {
    fn write(&mut self, v: ValueId, ty: ScalarType, bits: u32) {
        let stored = match (ty.is_float(), self.pa.and_then(|pa| pa.get(v))) {
            (true, Some(fmt)) => quantize(f32::from_bits(bits), fmt).to_bits(),
            _ => bits,
        };
        self.values[v.index()] = stored;
    }

    fn read(&self, v: ValueId, _ty: ScalarType) -> u32 {
        self.values[v.index()]
    }
}

/// One scalar input, or an array.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum InputValue {
    Scalar(f64),
    Array(Vec<f64>),
}

/// Named input values for one kernel invocation.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct InputBinding {
    pub values: BTreeMap<String, InputValue>,
}

impl InputBinding {
    pub fn scalar(mut self, name: &str, v: f64) -> Self {
        self.values.insert(name.to_string(), InputValue::Scalar(v));
        self
    }

    pub fn array(mut self, name: &str, v: Vec<f64>) -> Self {
        self.values.insert(name.to_string(), InputValue::Array(v));
        self
    }
}

/// A typed output element.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct OutputValue {
    pub ty: ScalarType,
    pub bits: u32,
}

impl OutputValue {
    pub fn as_f64(self) -> f64 {
        match self.ty {
            ScalarType::F32 => f32::from_bits(self.bits) as f64,
            ty => int_value(ty, self.bits) as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum InterpError {
    #[error("missing input `{0}`")]
    MissingInput(String),
    #[error("input `{name}`: {reason}")]
    BadInput { name: String, reason: String },
    #[error("load from `{array}` at index {index} is out of bounds")]
    OutOfBounds { array: String, index: i64 },
    #[error("step limit of {0} instructions exceeded")]
    StepLimit(u64),
    #[error("reached a value that was never written")]
    Undefined,
}

/// Result of one run: the emitted values followed by the returned values.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Execution {
    pub outputs: Vec<OutputValue>,
    /// Executed instruction count, terminators included.
    pub steps: u64,
    /// `(block, index)` of every executed instruction when path recording is on.
    pub path: Vec<(BlockId, usize)>,
}

#[derive(Clone, Copy, Debug)]
pub struct InterpConfig {
    pub step_limit: u64,
    pub record_path: bool,
}

impl Default for InterpConfig {
    fn default() -> Self {
        InterpConfig { step_limit: 1_000_000, record_path: false }
    }
}

fn to_bits(name: &str, ty: ScalarType, v: f64) -> Result<u32, InterpError> {
    let bad = |reason: &str| InterpError::BadInput { name: name.into(), reason: reason.into() };
    match ty {
        ScalarType::F32 => Ok((v as f32).to_bits()),
        ScalarType::I32 | ScalarType::U32 => {
            if v.fract() != 0.0 || !v.is_finite() {
                return Err(bad("expected an integer"));
            }
            let (lo, hi) = crate::range::type_limits(ty);
            if v < lo as f64 || v > hi as f64 {
                return Err(bad("out of 32-bit range"));
            }
            Ok(v as i64 as u32)
        }
    }
}

/// Runs `k` with full-precision plain storage.
pub fn interpret_plain(k: &Kernel, input: &InputBinding) -> Result<Execution, InterpError> {
    let mut store = RoundingStore::new(k, None);
    run(k, input, &mut store, InterpConfig::default())
}

/// Runs `k` with every float value rounded through its assigned format.
pub fn interpret(k: &Kernel, input: &InputBinding, pa: &PrecisionAssignment) -> Result<Execution, InterpError> {
    let mut store = RoundingStore::new(k, Some(pa));
    run(k, input, &mut store, InterpConfig::default())
}

/// Executes `k` against an arbitrary store.
pub fn run<S: ValueStore>(
    k: &Kernel,
    input: &InputBinding,
    store: &mut S,
    cfg: InterpConfig,
) -> Result<Execution, InterpError> {
    let mut by_id: Vec<Vec<u32>> = vec![Vec::new(); k.arrays.len()];
    for p in &k.params {
        match p {
            Param::Scalar { value, range } => {
                let name = k.name_of(*value);
                let ty = k.ty(*value);
                let Some(InputValue::Scalar(x)) = input.values.get(name) else {
                    return Err(InterpError::MissingInput(name.into()));
                };
                let bits = to_bits(name, ty, *x)?;
                if let Some((lo, hi)) = range {
                    let n = int_value(ty, bits);
                    if n < *lo || n > *hi {
                        return Err(InterpError::BadInput {
                            name: name.into(),
                            reason: format!("{n} outside declared range [{lo}, {hi}]"),
                        });
                    }
                }
                store.write(*value, ty, bits);
            }
            Param::Array(a) => {
                let arr = &k.arrays[a.index()];
                let Some(InputValue::Array(xs)) = input.values.get(&arr.name) else {
                    return Err(InterpError::MissingInput(arr.name.clone()));
                };
                if xs.len() != arr.len {
                    return Err(InterpError::BadInput {
                        name: arr.name.clone(),
                        reason: format!("expected {} elements, found {}", arr.len, xs.len()),
                    });
                }
                let bits = xs.iter().map(|x| to_bits(&arr.name, arr.elem, *x)).collect::<Result<_, _>>()?;
                by_id[a.index()] = bits;
            }
        }
    }

    let mut exec = Execution::default();
    let read = |store: &S, op: Operand, ty: ScalarType| match op {
        Operand::Value(v) => store.read(v, k.ty(v)),
        Operand::Imm(i) => imm_bits(i, ty),
    };
    let mut prev: Option<BlockId> = None;
    let mut cur = BlockId(0);
    loop {
        let block = k.block(cur);
        // Phis read their operands simultaneously on entry.
        let n_phi = block.insts.iter().take_while(|i| i.is_phi()).count();
        let mut phi_vals = Vec::with_capacity(n_phi);
        for inst in &block.insts[..n_phi] {
            let InstKind::Phi(preds) = &inst.kind else { unreachable!() };
            let from = prev.ok_or(InterpError::Undefined)?;
            let slot = preds.iter().position(|p| *p == from).ok_or(InterpError::Undefined)?;
            phi_vals.push(read(store, inst.args[slot], inst.ty));
        }
        for (i, (inst, bits)) in block.insts[..n_phi].iter().zip(phi_vals).enumerate() {
            step(&mut exec, cfg, cur, i)?;
            store.write(inst.dest.expect("phi has a destination"), inst.ty, bits);
        }
        for (i, inst) in block.insts.iter().enumerate().skip(n_phi) {
            step(&mut exec, cfg, cur, i)?;
            let arg = |j: usize| read(store, inst.args[j], inst.ty);
            let ty = inst.ty;
            let result = match &inst.kind {
                InstKind::Const | InstKind::Mov | InstKind::Sigma(_) => arg(0),
                InstKind::Bin(op) => {
                    if ty.is_float() {
                        eval::float_binop(*op, f32::from_bits(arg(0)), f32::from_bits(arg(1))).to_bits()
                    } else {
                        eval::int_binop(*op, ty, arg(0), arg(1))
                    }
                }
                InstKind::Cmp(op) => eval::compare(*op, ty, arg(0), arg(1)) as u32,
                InstKind::Select => {
                    let c = read(store, inst.args[0], ScalarType::U32);
                    if c != 0 {
                        arg(1)
                    } else {
                        arg(2)
                    }
                }
                InstKind::Cvt => {
                    let from = match inst.args[0] {
                        Operand::Value(v) => k.ty(v),
                        Operand::Imm(_) => ty,
                    };
                    eval::convert(from, ty, read(store, inst.args[0], from))
                }
                InstKind::Special(f) => eval::special(*f, f32::from_bits(arg(0))).to_bits(),
                InstKind::Ld(a) => {
                    let idx_ty = match inst.args[0] {
                        Operand::Value(v) => k.ty(v),
                        Operand::Imm(_) => ScalarType::I32,
                    };
                    let idx = int_value(idx_ty, read(store, inst.args[0], idx_ty));
                    let data = &by_id[a.index()];
                    if idx < 0 || idx as usize >= data.len() {
                        return Err(InterpError::OutOfBounds { array: k.arrays[a.index()].name.clone(), index: idx });
                    }
                    data[idx as usize]
                }
                InstKind::Emit => {
                    exec.outputs.push(OutputValue { ty, bits: arg(0) });
                    continue;
                }
                InstKind::Phi(_) => unreachable!("phis lead the block"),
            };
            let dest = inst.dest.expect("non-emit instructions define a value");
            store.write(dest, k.ty(dest), result);
        }
        step(&mut exec, cfg, cur, block.insts.len())?;
        match &block.term {
            Terminator::Jmp(t) => {
                prev = Some(cur);
                cur = *t;
            }
            Terminator::Br { cond, then_to, else_to } => {
                let c = store.read(*cond, k.ty(*cond));
                prev = Some(cur);
                cur = if c != 0 { *then_to } else { *else_to };
            }
            Terminator::Ret(ops) => {
                for op in ops {
                    let (ty, bits) = match op {
                        Operand::Value(v) => (k.ty(*v), store.read(*v, k.ty(*v))),
                        Operand::Imm(i @ crate::ir::Imm::Float(_)) => (ScalarType::F32, imm_bits(*i, ScalarType::F32)),
                        Operand::Imm(i) => (ScalarType::I32, imm_bits(*i, ScalarType::I32)),
                    };
                    exec.outputs.push(OutputValue { ty, bits });
                }
                return Ok(exec);
            }
        }
    }
}

fn step(exec: &mut Execution, cfg: InterpConfig, b: BlockId, i: usize) -> Result<(), InterpError> {
    exec.steps += 1;
    if exec.steps > cfg.step_limit {
        return Err(InterpError::StepLimit(cfg.step_limit));
    }
    if cfg.record_path {
        exec.path.push((b, i));
    }
    Ok(())
}
