//! Textual SSA kernel IR.
//!
//! A [`Kernel`] is a list of basic blocks over typed SSA values. Source-level
//! values are always 32 bits wide; narrower widths exist only as annotations
//! produced by the range analysis and the precision tuner.

mod cfg;
pub mod eval;
mod liveness;
mod parse;
mod print;
mod validate;

pub use cfg::Cfg;
pub use liveness::{compute_live_ranges, LiveRanges, Point};
pub use parse::{parse, ParseError, ParseErrorKind};
pub use validate::{validate, Violation, ViolationKind};

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ValueId(pub u32);

impl ValueId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BlockId(pub u32);

impl BlockId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ArrayId(pub u32);

impl ArrayId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScalarType {
    I32,
    U32,
    F32,
}

impl ScalarType {
    pub fn is_float(self) -> bool {
        self == ScalarType::F32
    }

    pub fn is_int(self) -> bool {
        !self.is_float()
    }

    pub fn is_signed(self) -> bool {
        self == ScalarType::I32
    }

    pub fn name(self) -> &'static str {
        match self {
            ScalarType::I32 => "i32",
            ScalarType::U32 => "u32",
            ScalarType::F32 => "f32",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "i32" => Some(ScalarType::I32),
            "u32" => Some(ScalarType::U32),
            "f32" => Some(ScalarType::F32),
            _ => None,
        }
    }
}

impl fmt::Display for ScalarType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An immediate. Integer immediates hold the mathematical value; they are
/// reduced to 32-bit two's complement when executed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Imm {
    Int(i64),
    Float(f32),
}

impl Imm {
    pub fn bits(self) -> u32 {
        match self {
            Imm::Int(v) => v as u32,
            Imm::Float(f) => f.to_bits(),
        }
    }

    /// Bitwise equality (so `NaN == NaN` for identical payloads).
    pub fn same(self, other: Imm) -> bool {
        match (self, other) {
            (Imm::Int(a), Imm::Int(b)) => a == b,
            (Imm::Float(a), Imm::Float(b)) => a.to_bits() == b.to_bits(),
            _ => false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Operand {
    Value(ValueId),
    Imm(Imm),
}

impl Operand {
    pub fn value(self) -> Option<ValueId> {
        match self {
            Operand::Value(v) => Some(v),
            Operand::Imm(_) => None,
        }
    }

    pub fn same(self, other: Operand) -> bool {
        match (self, other) {
            (Operand::Value(a), Operand::Value(b)) => a == b,
            (Operand::Imm(a), Operand::Imm(b)) => a.same(b),
            _ => false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Min,
    Max,
    And,
    Or,
    Xor,
    Shl,
    Shr,
}

impl BinOp {
    pub const ALL: [BinOp; 11] = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::Div,
        BinOp::Min,
        BinOp::Max,
        BinOp::And,
        BinOp::Or,
        BinOp::Xor,
        BinOp::Shl,
        BinOp::Shr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::Div => "div",
            BinOp::Min => "min",
            BinOp::Max => "max",
            BinOp::And => "and",
            BinOp::Or => "or",
            BinOp::Xor => "xor",
            BinOp::Shl => "shl",
            BinOp::Shr => "shr",
        }
    }

    /// Bitwise and shift operations are only defined on integers.
    pub fn int_only(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or | BinOp::Xor | BinOp::Shl | BinOp::Shr)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub const ALL: [CmpOp; 6] = [CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge, CmpOp::Eq, CmpOp::Ne];

    pub fn name(self) -> &'static str {
        match self {
            CmpOp::Lt => "lt",
            CmpOp::Le => "le",
            CmpOp::Gt => "gt",
            CmpOp::Ge => "ge",
            CmpOp::Eq => "eq",
            CmpOp::Ne => "ne",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        CmpOp::ALL.into_iter().find(|op| op.name() == s)
    }

    /// The relation that holds when this one does not.
    pub fn negate(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Ge => CmpOp::Lt,
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
        }
    }

    /// `a op b` ⇔ `b op.swap() a`.
    pub fn swap(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            CmpOp::Eq => CmpOp::Eq,
            CmpOp::Ne => CmpOp::Ne,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpecialFn {
    Sin,
    Cos,
    Log,
    Exp,
    Rsqrt,
}

impl SpecialFn {
    pub const ALL: [SpecialFn; 5] =
        [SpecialFn::Sin, SpecialFn::Cos, SpecialFn::Log, SpecialFn::Exp, SpecialFn::Rsqrt];

    pub fn name(self) -> &'static str {
        match self {
            SpecialFn::Sin => "sin",
            SpecialFn::Cos => "cos",
            SpecialFn::Log => "log",
            SpecialFn::Exp => "exp",
            SpecialFn::Rsqrt => "rsqrt",
        }
    }
}

/// Branch-implied fact carried by a sigma definition: `source op bound`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub op: CmpOp,
    pub bound: Operand,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum InstKind {
    /// `[imm]`
    Const,
    /// `[x]`
    Mov,
    /// `[a, b]`
    Bin(BinOp),
    /// `[a, b]`; the instruction type is the operand type, the result is `u32` 0/1.
    Cmp(CmpOp),
    /// `[cond, a, b]`
    Select,
    /// `[x]`; the instruction type is the destination type.
    Cvt,
    /// `[x]`
    Special(SpecialFn),
    /// `[index]`; element load from an array parameter.
    Ld(ArrayId),
    /// `[x]`; appends to the kernel's output stream. No destination.
    Emit,
    /// One operand per listed predecessor block.
    Phi(Vec<BlockId>),
    /// `[source]`; only present in e-SSA form.
    Sigma(Constraint),
}

impl InstKind {
    pub fn mnemonic(&self) -> String {
        match self {
            InstKind::Const => "const".into(),
            InstKind::Mov => "mov".into(),
            InstKind::Bin(op) => op.name().into(),
            InstKind::Cmp(op) => format!("cmp.{}", op.name()),
            InstKind::Select => "select".into(),
            InstKind::Cvt => "cvt".into(),
            InstKind::Special(f) => f.name().into(),
            InstKind::Ld(_) => "ld".into(),
            InstKind::Emit => "emit".into(),
            InstKind::Phi(_) => "phi".into(),
            InstKind::Sigma(_) => "sigma".into(),
        }
    }

    pub fn arity(&self) -> Option<usize> {
        match self {
            InstKind::Const
            | InstKind::Mov
            | InstKind::Cvt
            | InstKind::Special(_)
            | InstKind::Ld(_)
            | InstKind::Emit
            | InstKind::Sigma(_) => Some(1),
            InstKind::Bin(_) | InstKind::Cmp(_) => Some(2),
            InstKind::Select => Some(3),
            InstKind::Phi(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Inst {
    pub dest: Option<ValueId>,
    pub kind: InstKind,
    pub ty: ScalarType,
    pub args: Vec<Operand>,
}

impl Inst {
    pub fn is_phi(&self) -> bool {
        matches!(self.kind, InstKind::Phi(_))
    }

    /// Value operands, in operand order.
    pub fn uses(&self) -> impl Iterator<Item = ValueId> + '_ {
        let sigma_bound = match &self.kind {
            InstKind::Sigma(c) => c.bound.value(),
            _ => None,
        };
        self.args.iter().filter_map(|a| a.value()).chain(sigma_bound)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Terminator {
    Jmp(BlockId),
    Br { cond: ValueId, then_to: BlockId, else_to: BlockId },
    Ret(Vec<Operand>),
}

impl Terminator {
    pub fn successors(&self) -> Vec<BlockId> {
        match self {
            Terminator::Jmp(b) => vec![*b],
            Terminator::Br { then_to, else_to, .. } => vec![*then_to, *else_to],
            Terminator::Ret(_) => Vec::new(),
        }
    }

    pub fn uses(&self) -> Vec<ValueId> {
        match self {
            Terminator::Jmp(_) => Vec::new(),
            Terminator::Br { cond, .. } => vec![*cond],
            Terminator::Ret(ops) => ops.iter().filter_map(|o| o.value()).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub label: String,
    pub insts: Vec<Inst>,
    pub term: Terminator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueInfo {
    pub name: String,
    pub ty: ScalarType,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrayParam {
    pub name: String,
    pub elem: ScalarType,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Param {
    /// A scalar parameter, optionally with a declared inclusive integer range.
    Scalar { value: ValueId, range: Option<(i64, i64)> },
    Array(ArrayId),
}

/// An SSA kernel. `blocks[0]` is the entry block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub name: String,
    pub params: Vec<Param>,
    pub arrays: Vec<ArrayParam>,
    pub blocks: Vec<Block>,
    pub values: Vec<ValueInfo>,
}

/// Where a value is defined.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DefSite {
    Param,
    Inst { block: BlockId, index: usize },
}

impl Kernel {
    pub fn value(&self, v: ValueId) -> &ValueInfo {
        &self.values[v.index()]
    }

    pub fn ty(&self, v: ValueId) -> ScalarType {
        self.values[v.index()].ty
    }

    pub fn name_of(&self, v: ValueId) -> &str {
        &self.values[v.index()].name
    }

    pub fn block(&self, b: BlockId) -> &Block {
        &self.blocks[b.index()]
    }

    pub fn block_ids(&self) -> impl Iterator<Item = BlockId> {
        (0..self.blocks.len() as u32).map(BlockId)
    }

    pub fn value_ids(&self) -> impl Iterator<Item = ValueId> {
        (0..self.values.len() as u32).map(ValueId)
    }

    pub fn find_value(&self, name: &str) -> Option<ValueId> {
        self.values.iter().position(|v| v.name == name).map(|i| ValueId(i as u32))
    }

    pub fn find_block(&self, label: &str) -> Option<BlockId> {
        self.blocks.iter().position(|b| b.label == label).map(|i| BlockId(i as u32))
    }

    pub fn scalar_params(&self) -> impl Iterator<Item = (ValueId, Option<(i64, i64)>)> + '_ {
        self.params.iter().filter_map(|p| match p {
            Param::Scalar { value, range } => Some((*value, *range)),
            Param::Array(_) => None,
        })
    }

    /// Definition site of every value, `None` for values that are never defined.
    pub fn def_sites(&self) -> Vec<Option<DefSite>> {
        let mut sites = vec![None; self.values.len()];
        for (v, _) in self.scalar_params() {
            sites[v.index()] = Some(DefSite::Param);
        }
        for b in self.block_ids() {
            for (index, inst) in self.block(b).insts.iter().enumerate() {
                if let Some(d) = inst.dest {
                    sites[d.index()] = Some(DefSite::Inst { block: b, index });
                }
            }
        }
        sites
    }

    /// Values in definition order: parameters first, then instruction
    /// destinations in block and instruction order.
    pub fn definition_order(&self) -> Vec<ValueId> {
        let mut order: Vec<ValueId> = self.scalar_params().map(|(v, _)| v).collect();
        for block in &self.blocks {
            order.extend(block.insts.iter().filter_map(|i| i.dest));
        }
        order
    }

    /// Instruction count including terminators.
    pub fn instruction_count(&self) -> usize {
        self.blocks.iter().map(|b| b.insts.len() + 1).sum()
    }

    pub fn cfg(&self) -> Cfg {
        Cfg::new(self)
    }

    /// True when the control-flow graph contains a cycle reachable from entry.
    pub fn has_loops(&self) -> bool {
        let cfg = self.cfg();
        let rpo_index = cfg.rpo_index();
        self.block_ids().any(|b| {
            rpo_index[b.index()].is_some()
                && cfg.succs(b).iter().any(|s| rpo_index[s.index()] <= rpo_index[b.index()])
        })
    }
}
