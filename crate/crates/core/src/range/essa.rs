use std::collections::HashSet;

use crate::ir::{
    BlockId, Constraint, Inst, InstKind, Kernel, Operand, Terminator, ValueId, ValueInfo,
};

/// A kernel in e-SSA form. Sigma values are appended after the original
/// values, so ids below `original_values` are shared with the input kernel.
#[derive(Clone, Debug)]
pub struct EssaKernel {
    pub kernel: Kernel,
    pub original_values: usize,
    /// For every sigma value, the value it renames.
    pub sigma_source: Vec<Option<ValueId>>,
}

impl EssaKernel {
    /// The original value a (possibly sigma) value descends from.
    pub fn root(&self, mut v: ValueId) -> ValueId {
        while let Some(Some(s)) = self.sigma_source.get(v.index()) {
            v = *s;
        }
        v
    }

    /// Removes every sigma and renames uses back to the original values.
    pub fn strip(&self) -> Kernel {
        let mut k = self.kernel.clone();
        let rename = |op: &mut Operand| {
            if let Operand::Value(v) = op {
                *v = self.root(*v);
            }
        };
        for b in &mut k.blocks {
            b.insts.retain(|i| !matches!(i.kind, InstKind::Sigma(_)));
            for inst in &mut b.insts {
                inst.args.iter_mut().for_each(rename);
            }
            match &mut b.term {
                Terminator::Br { cond, .. } => *cond = self.root(*cond),
                Terminator::Ret(ops) => ops.iter_mut().for_each(rename),
                Terminator::Jmp(_) => {}
            }
        }
        k.values.truncate(self.original_values);
        k
    }
}

/// Splits integer values compared by conditional branches into per-edge
/// sigma versions carrying the branch constraint.
///
/// Sigmas are placed on edges into blocks with a single predecessor, where
/// the edge dominates the target region.
pub fn to_essa(k: &Kernel) -> EssaKernel {
    let mut out = k.clone();
    let original_values = k.values.len();
    let mut sigma_source: Vec<Option<ValueId>> = vec![None; original_values];
    let cfg = k.cfg();
    let mut taken_names: HashSet<String> = k.values.iter().map(|v| v.name.clone()).collect();

    for &b in cfg.rpo() {
        let Terminator::Br { cond, then_to, else_to } = out.block(b).term.clone() else {
            continue;
        };
        if then_to == else_to {
            continue;
        }
        // The comparison feeding the branch, as currently renamed.
        let Some(cmp) = out.blocks.iter().flat_map(|b| &b.insts).find(|i| i.dest == Some(cond)).cloned()
        else {
            continue;
        };
        let InstKind::Cmp(op) = cmp.kind else {
            continue;
        };
        if cmp.ty.is_float() {
            continue;
        }
        let (lhs, rhs) = (cmp.args[0], cmp.args[1]);
        for (target, edge_op) in [(then_to, op), (else_to, op.negate())] {
            if cfg.preds(target).len() != 1 {
                continue;
            }
            let mut renames: Vec<(ValueId, ValueId)> = Vec::new();
            let mut sigmas = Vec::new();
            let pairs = [(lhs, edge_op, rhs), (rhs, edge_op.swap(), lhs)];
            for (subject, sop, bound) in pairs {
                let Operand::Value(src) = subject else {
                    continue;
                };
                if bound.same(subject) || renames.iter().any(|(s, _)| *s == src) {
                    continue;
                }
                let suffix = if target == then_to { "t" } else { "f" };
                let name = fresh_name(&mut taken_names, &format!("{}.{suffix}", out.name_of(src)));
                let dest = ValueId(out.values.len() as u32);
                out.values.push(ValueInfo { name, ty: cmp.ty });
                sigma_source.push(Some(src));
                sigmas.push(Inst {
                    dest: Some(dest),
                    kind: InstKind::Sigma(Constraint { op: sop, bound }),
                    ty: cmp.ty,
                    args: vec![Operand::Value(src)],
                });
                renames.push((src, dest));
            }
            if sigmas.is_empty() {
                continue;
            }
            let n_sigmas = sigmas.len();
            let first_non_phi = out.block(target).insts.iter().take_while(|i| i.is_phi()).count();
            let block = &mut out.blocks[target.index()];
            block.insts.splice(first_non_phi..first_non_phi, sigmas);
            rewrite_region(&mut out, &cfg, target, first_non_phi + n_sigmas, &renames);
        }
    }
    EssaKernel { kernel: out, original_values, sigma_source }
}

fn fresh_name(taken: &mut HashSet<String>, base: &str) -> String {
    let mut name = base.to_string();
    let mut n = 1;
    while taken.contains(&name) {
        name = format!("{base}{n}");
        n += 1;
    }
    taken.insert(name.clone());
    name
}

/// Rewrites uses in every block dominated by `head` (from instruction
/// `start` on in `head` itself), including phi operands arriving from
/// dominated predecessors.
fn rewrite_region(
    k: &mut Kernel,
    cfg: &crate::ir::Cfg,
    head: BlockId,
    start: usize,
    renames: &[(ValueId, ValueId)],
) {
    let map = |v: ValueId| renames.iter().find(|(s, _)| *s == v).map_or(v, |(_, d)| *d);
    let map_op = |op: &mut Operand| {
        if let Operand::Value(v) = op {
            *v = map(*v);
        }
    };
    for b in 0..k.blocks.len() {
        let bid = BlockId(b as u32);
        let dominated = cfg.dominates(head, bid);
        let block = &mut k.blocks[b];
        for (i, inst) in block.insts.iter_mut().enumerate() {
            match &mut inst.kind {
                InstKind::Phi(preds) => {
                    for (p, a) in preds.iter().zip(inst.args.iter_mut()) {
                        if cfg.dominates(head, *p) {
                            map_op(a);
                        }
                    }
                }
                kind => {
                    if dominated && (bid != head || i >= start) {
                        if let InstKind::Sigma(c) = kind {
                            map_op(&mut c.bound);
                        }
                        inst.args.iter_mut().for_each(map_op);
                    }
                }
            }
        }
        if dominated {
            match &mut block.term {
                Terminator::Br { cond, .. } => *cond = map(*cond),
                Terminator::Ret(ops) => ops.iter_mut().for_each(map_op),
                Terminator::Jmp(_) => {}
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{parse, validate};

    const SRC: &str = "kernel k(n: i32) {
block entry:
  c = cmp.lt i32 n, 10
  br c, small, big
block small:
  a = add i32 n, 1
  ret a
block big:
  ret n
}";

    #[test]
    fn inserts_sigmas_on_both_edges() {
        let k = parse(SRC).unwrap();
        let e = to_essa(&k);
        assert!(validate(&e.kernel).is_empty());
        let t = e.kernel.find_value("n.t").unwrap();
        let f = e.kernel.find_value("n.f").unwrap();
        assert_eq!(e.root(t), k.find_value("n").unwrap());
        let small = e.kernel.block(e.kernel.find_block("small").unwrap());
        assert_eq!(small.insts[1].args[0], Operand::Value(t));
        assert_eq!(e.kernel.block(e.kernel.find_block("big").unwrap()).term, Terminator::Ret(vec![Operand::Value(f)]));
    }

    #[test]
    fn strip_restores_input() {
        let k = parse(SRC).unwrap();
        assert_eq!(to_essa(&k).strip(), k);
    }

    #[test]
    fn branch_free_kernel_is_unchanged() {
        let k = parse("kernel k(a: i32) {\nblock entry:\n  b = add i32 a, 1\n  ret b\n}").unwrap();
        assert_eq!(to_essa(&k).kernel, k);
    }
}
