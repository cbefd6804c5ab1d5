use std::fmt;

use super::{BlockId, DefSite, Imm, Inst, InstKind, Kernel, Operand, ScalarType, Terminator, ValueId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ViolationKind {
    DuplicateDefinition,
    Undefined,
    NotDominated,
    PhiArity,
    Type,
    Cfg,
}

/// A broken IR invariant. `location` is `(block, index)`, where index
/// `insts.len()` names the terminator.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Violation {
    pub location: Option<(BlockId, usize)>,
    pub kind: ViolationKind,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.location {
            Some((b, i)) => write!(f, "block {} inst {}: {}", b.0, i, self.message),
            None => f.write_str(&self.message),
        }
    }
}

struct Checker<'k> {
    k: &'k Kernel,
    out: Vec<Violation>,
}

impl Checker<'_> {
    fn report(&mut self, loc: Option<(BlockId, usize)>, kind: ViolationKind, message: String) {
        self.out.push(Violation { location: loc, kind, message });
    }

    fn name(&self, v: ValueId) -> String {
        self.k.values.get(v.index()).map_or_else(|| format!("%{}", v.0), |i| i.name.clone())
    }

    fn operand_type(&mut self, loc: (BlockId, usize), op: Operand, want: Option<ScalarType>, int_only: bool) {
        let (ty_ok, desc) = match op {
            Operand::Value(v) => {
                let Some(info) = self.k.values.get(v.index()) else {
                    self.report(Some(loc), ViolationKind::Undefined, format!("value %{} out of range", v.0));
                    return;
                };
                let ok = match want {
                    Some(t) => info.ty == t,
                    None => !int_only || info.ty.is_int(),
                };
                (ok, format!("value `{}` has type {}", info.name, info.ty))
            }
            Operand::Imm(imm) => {
                let float = matches!(imm, Imm::Float(_));
                let ok = match want {
                    Some(t) => t.is_float() == float,
                    None => !int_only || !float,
                };
                (ok, "immediate of the wrong kind".to_string())
            }
        };
        if !ty_ok {
            self.report(Some(loc), ViolationKind::Type, desc);
        }
    }

    fn inst_types(&mut self, loc: (BlockId, usize), inst: &Inst) {
        if let Some(n) = inst.kind.arity() {
            if inst.args.len() != n {
                self.report(
                    Some(loc),
                    ViolationKind::Type,
                    format!("`{}` takes {n} operand(s), found {}", inst.kind.mnemonic(), inst.args.len()),
                );
                return;
            }
        }
        let ty = inst.ty;
        let expected_dest = match &inst.kind {
            InstKind::Emit => None,
            InstKind::Cmp(_) => Some(ScalarType::U32),
            _ => Some(ty),
        };
        match (inst.dest, expected_dest) {
            (Some(d), Some(t)) => {
                if let Some(info) = self.k.values.get(d.index()) {
                    if info.ty != t {
                        self.report(
                            Some(loc),
                            ViolationKind::Type,
                            format!("destination `{}` is {} but the result is {t}", info.name, info.ty),
                        );
                    }
                }
            }
            (None, None) => {}
            (Some(_), None) => {
                self.report(Some(loc), ViolationKind::Type, "`emit` has a destination".into())
            }
            (None, Some(_)) => self.report(
                Some(loc),
                ViolationKind::Type,
                format!("`{}` has no destination", inst.kind.mnemonic()),
            ),
        }
        match &inst.kind {
            InstKind::Const => {
                if !matches!(inst.args[0], Operand::Imm(_)) {
                    self.report(Some(loc), ViolationKind::Type, "`const` takes an immediate".into());
                }
                self.operand_type(loc, inst.args[0], Some(ty), false);
            }
            InstKind::Bin(op) if op.int_only() && ty.is_float() => {
                self.report(Some(loc), ViolationKind::Type, format!("`{}` on f32", op.name()));
            }
            InstKind::Special(f) if ty.is_int() => {
                self.report(Some(loc), ViolationKind::Type, format!("`{}` on {ty}", f.name()));
            }
            InstKind::Select => {
                self.operand_type(loc, inst.args[0], None, true);
                self.operand_type(loc, inst.args[1], Some(ty), false);
                self.operand_type(loc, inst.args[2], Some(ty), false);
            }
            InstKind::Cvt => self.operand_type(loc, inst.args[0], None, false),
            InstKind::Ld(a) => {
                match self.k.arrays.get(a.index()) {
                    Some(arr) if arr.elem != ty => self.report(
                        Some(loc),
                        ViolationKind::Type,
                        format!("array `{}` holds {}", arr.name, arr.elem),
                    ),
                    Some(_) => {}
                    None => self.report(Some(loc), ViolationKind::Undefined, format!("array #{} missing", a.0)),
                }
                self.operand_type(loc, inst.args[0], None, true);
            }
            InstKind::Sigma(c) => {
                self.operand_type(loc, inst.args[0], Some(ty), false);
                self.operand_type(loc, c.bound, Some(ty), false);
            }
            _ => {}
        }
        if matches!(
            inst.kind,
            InstKind::Mov | InstKind::Bin(_) | InstKind::Cmp(_) | InstKind::Special(_) | InstKind::Emit | InstKind::Phi(_)
        ) {
            for &a in &inst.args {
                self.operand_type(loc, a, Some(ty), false);
            }
        }
    }
}

/// Checks SSA, dominance, phi, type and CFG invariants. The result is sorted.
pub fn validate(k: &Kernel) -> Vec<Violation> {
    let mut c = Checker { k, out: Vec::new() };
    let nb = k.blocks.len();
    if nb == 0 {
        c.report(None, ViolationKind::Cfg, "kernel has no blocks".into());
        return c.out;
    }

    // CFG shape.
    let mut targets_ok = true;
    for (bi, b) in k.blocks.iter().enumerate() {
        let loc = Some((BlockId(bi as u32), b.insts.len()));
        for s in b.term.successors() {
            if s.index() >= nb {
                c.report(loc, ViolationKind::Cfg, format!("branch to missing block #{}", s.0));
                targets_ok = false;
            } else if s.index() == 0 {
                c.report(loc, ViolationKind::Cfg, "the entry block cannot be a branch target".into());
            }
        }
        if let Terminator::Br { cond, .. } = &b.term {
            match k.values.get(cond.index()) {
                Some(info) if info.ty.is_float() => {
                    c.report(loc, ViolationKind::Type, format!("branch on f32 value `{}`", info.name))
                }
                _ => {}
            }
        }
        let mut seen_non_phi = false;
        for (ii, inst) in b.insts.iter().enumerate() {
            if inst.is_phi() {
                if seen_non_phi {
                    c.report(
                        Some((BlockId(bi as u32), ii)),
                        ViolationKind::Cfg,
                        "phi after a non-phi instruction".into(),
                    );
                }
            } else {
                seen_non_phi = true;
            }
        }
    }
    if !targets_ok {
        c.out.sort();
        return c.out;
    }

    // Single definition.
    let mut def_count = vec![0usize; k.values.len()];
    let mut def_at: Vec<Option<(BlockId, usize)>> = vec![None; k.values.len()];
    for (v, _) in k.scalar_params() {
        if let Some(n) = def_count.get_mut(v.index()) {
            *n += 1;
        }
    }
    for b in k.block_ids() {
        for (ii, inst) in k.block(b).insts.iter().enumerate() {
            if let Some(d) = inst.dest {
                if d.index() >= k.values.len() {
                    c.report(Some((b, ii)), ViolationKind::Undefined, format!("value %{} out of range", d.0));
                    continue;
                }
                def_count[d.index()] += 1;
                if def_count[d.index()] > 1 {
                    let msg = format!("value `{}` defined more than once", c.name(d));
                    c.report(Some((b, ii)), ViolationKind::DuplicateDefinition, msg);
                }
                def_at[d.index()].get_or_insert((b, ii));
            }
        }
    }

    let cfg = k.cfg();
    let sites = k.def_sites();
    for b in k.block_ids() {
        let block = k.block(b);
        for (ii, inst) in block.insts.iter().enumerate() {
            let loc = (b, ii);
            c.inst_types(loc, inst);
            if let InstKind::Phi(preds) = &inst.kind {
                let mut listed = preds.clone();
                listed.sort();
                let mut actual = cfg.preds(b).to_vec();
                actual.sort();
                let dup = listed.windows(2).any(|w| w[0] == w[1]);
                if preds.len() != inst.args.len() || dup || listed != actual {
                    c.report(
                        Some(loc),
                        ViolationKind::PhiArity,
                        format!("phi must list each of the {} predecessor(s) once", actual.len()),
                    );
                    continue;
                }
                for (&p, op) in preds.iter().zip(&inst.args) {
                    if let Some(v) = op.value() {
                        check_use(&mut c, &cfg, &sites, loc, v, UseAt::EndOf(p));
                    }
                }
            } else {
                for v in inst.uses().collect::<Vec<_>>() {
                    check_use(&mut c, &cfg, &sites, loc, v, UseAt::Inst(b, ii));
                }
            }
        }
        let loc = (b, block.insts.len());
        for v in block.term.uses() {
            check_use(&mut c, &cfg, &sites, loc, v, UseAt::Inst(b, block.insts.len()));
        }
    }
    c.out.sort();
    c.out.dedup();
    c.out
}

#[derive(Clone, Copy)]
enum UseAt {
    Inst(BlockId, usize),
    /// A phi operand flowing in from the end of this predecessor.
    EndOf(BlockId),
}

fn check_use(
    c: &mut Checker<'_>,
    cfg: &super::Cfg,
    sites: &[Option<DefSite>],
    loc: (BlockId, usize),
    v: ValueId,
    at: UseAt,
) {
    let Some(site) = sites.get(v.index()) else {
        c.report(Some(loc), ViolationKind::Undefined, format!("value %{} out of range", v.0));
        return;
    };
    let Some(site) = site else {
        let msg = format!("value `{}` is never defined", c.name(v));
        c.report(Some(loc), ViolationKind::Undefined, msg);
        return;
    };
    let DefSite::Inst { block: db, index: di } = *site else {
        return;
    };
    let ok = match at {
        UseAt::Inst(ub, ui) => {
            if !cfg.is_reachable(ub) {
                true
            } else if db == ub {
                di < ui
            } else {
                cfg.dominates(db, ub)
            }
        }
        UseAt::EndOf(p) => !cfg.is_reachable(p) || cfg.dominates(db, p),
    };
    if !ok {
        let msg = format!("value `{}` used before its definition", c.name(v));
        c.report(Some(loc), ViolationKind::NotDominated, msg);
    }
}
