use std::fmt::{self, Write};

use super::{Imm, InstKind, Kernel, Operand, Param, Terminator};

pub(crate) fn fmt_imm(imm: Imm) -> String {
    match imm {
        Imm::Int(v) => v.to_string(),
        Imm::Float(f) if f.is_finite() => format!("{f:?}"),
        Imm::Float(f) => format!("0f{:08x}", f.to_bits()),
    }
}

impl Kernel {
    fn operand_text(&self, op: Operand) -> String {
        match op {
            Operand::Value(v) => self.name_of(v).to_string(),
            Operand::Imm(i) => fmt_imm(i),
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let params: Vec<String> = self
            .params
            .iter()
            .map(|p| match p {
                Param::Scalar { value, range } => {
                    let mut s = format!("{}: {}", self.name_of(*value), self.ty(*value));
                    if let Some((lo, hi)) = range {
                        let _ = write!(s, " in [{lo}, {hi}]");
                    }
                    s
                }
                Param::Array(a) => {
                    let arr = &self.arrays[a.index()];
                    format!("{}: {}[{}]", arr.name, arr.elem, arr.len)
                }
            })
            .collect();
        writeln!(f, "kernel {}({}) {{", self.name, params.join(", "))?;
        for block in &self.blocks {
            writeln!(f, "block {}:", block.label)?;
            for inst in &block.insts {
                f.write_str("  ")?;
                if let Some(d) = inst.dest {
                    write!(f, "{} = ", self.name_of(d))?;
                }
                write!(f, "{} {}", inst.kind.mnemonic(), inst.ty)?;
                let args: Vec<String> = match &inst.kind {
                    InstKind::Phi(preds) => preds
                        .iter()
                        .zip(&inst.args)
                        .map(|(b, a)| format!("[{}, {}]", self.operand_text(*a), self.block(*b).label))
                        .collect(),
                    InstKind::Ld(arr) => {
                        vec![self.arrays[arr.index()].name.clone(), self.operand_text(inst.args[0])]
                    }
                    InstKind::Sigma(c) => vec![
                        self.operand_text(inst.args[0]),
                        c.op.name().to_string(),
                        self.operand_text(c.bound),
                    ],
                    _ => inst.args.iter().map(|a| self.operand_text(*a)).collect(),
                };
                if !args.is_empty() {
                    write!(f, " {}", args.join(", "))?;
                }
                writeln!(f)?;
            }
            match &block.term {
                Terminator::Jmp(b) => writeln!(f, "  jmp {}", self.block(*b).label)?,
                Terminator::Br { cond, then_to, else_to } => writeln!(
                    f,
                    "  br {}, {}, {}",
                    self.name_of(*cond),
                    self.block(*then_to).label,
                    self.block(*else_to).label
                )?,
                Terminator::Ret(ops) if ops.is_empty() => writeln!(f, "  ret")?,
                Terminator::Ret(ops) => {
                    let ops: Vec<String> = ops.iter().map(|o| self.operand_text(*o)).collect();
                    writeln!(f, "  ret {}", ops.join(", "))?
                }
            }
        }
        writeln!(f, "}}")
    }
}
