use std::collections::VecDeque;

use super::interval::{Arith, Interval};
use crate::ir::eval::{self, int_value};
use crate::ir::{BinOp, Imm, Inst, InstKind, Kernel, Operand, ScalarType, ValueId};

/// Updates of a phi after which its growing bounds jump to infinity.
pub const WIDEN_AFTER: u32 = 3;
/// Upper limit on descending (narrowing) passes after the ascending fixpoint.
pub const MAX_NARROWING_PASSES: usize = 8;

/// Interval for every integer value of `k`; `None` for float values.
///
/// Works on any kernel; run it on the e-SSA form to benefit from branch
/// constraints.
pub fn solve_ranges(k: &Kernel) -> Vec<Option<Interval>> {
    Solver::new(k).run()
}

struct Solver<'k> {
    k: &'k Kernel,
    defs: Vec<Option<Def<'k>>>,
    users: Vec<Vec<ValueId>>,
    reachable: Vec<bool>,
    order: Vec<ValueId>,
}

#[derive(Clone, Copy)]
enum Def<'k> {
    Param(Option<(i64, i64)>),
    Inst(&'k Inst, crate::ir::BlockId),
}

fn imm_interval(imm: Imm, ty: ScalarType) -> Interval {
    Interval::point(int_value(ty, eval::imm_bits(imm, ty)))
}

impl<'k> Solver<'k> {
    fn new(k: &'k Kernel) -> Self {
        let cfg = k.cfg();
        let reachable: Vec<bool> = k.block_ids().map(|b| cfg.is_reachable(b)).collect();
        let mut defs = vec![None; k.values.len()];
        let mut users = vec![Vec::new(); k.values.len()];
        let mut order = Vec::new();
        for (v, range) in k.scalar_params() {
            defs[v.index()] = Some(Def::Param(range));
            order.push(v);
        }
        for &b in cfg.rpo() {
            for inst in &k.block(b).insts {
                let Some(d) = inst.dest else { continue };
                defs[d.index()] = Some(Def::Inst(inst, b));
                order.push(d);
                for u in inst.uses() {
                    users[u.index()].push(d);
                }
            }
        }
        Solver { k, defs, users, reachable, order }
    }

    fn is_int(&self, v: ValueId) -> bool {
        self.k.ty(v).is_int()
    }

    fn operand(&self, cur: &[Interval], op: Operand, ty: ScalarType) -> Interval {
        match op {
            Operand::Value(v) => cur[v.index()],
            Operand::Imm(i) => imm_interval(i, ty),
        }
    }

    fn eval(&self, v: ValueId, cur: &[Interval]) -> Interval {
        let ty = self.k.ty(v);
        let Some(def) = self.defs[v.index()] else {
            return Interval::Empty;
        };
        let inst = match def {
            Def::Param(Some((lo, hi))) => {
                return Interval::new(lo, hi).intersect(Interval::top_of(ty)).normalize(ty);
            }
            Def::Param(None) => return Interval::top_of(ty),
            Def::Inst(inst, _) => inst,
        };
        let arg = |i: usize| self.operand(cur, inst.args[i], inst.ty);
        let a = Arith { ty };
        let r = match &inst.kind {
            InstKind::Const | InstKind::Mov => arg(0),
            InstKind::Cmp(_) => {
                if inst.args.iter().any(|o| matches!(o, Operand::Value(x) if self.is_int(*x) && cur[x.index()].is_empty())) {
                    Interval::Empty
                } else {
                    Interval::new(0, 1)
                }
            }
            InstKind::Select => arg(1).hull(arg(2)),
            InstKind::Phi(preds) => preds
                .iter()
                .zip(&inst.args)
                .filter(|(p, _)| self.reachable[p.index()])
                .map(|(_, o)| self.operand(cur, *o, ty))
                .fold(Interval::Empty, Interval::hull),
            InstKind::Sigma(c) => {
                let bound = self.operand(cur, c.bound, ty);
                arg(0).intersect(Interval::constraint(c.op, bound))
            }
            InstKind::Cvt => match inst.args[0] {
                Operand::Value(s) if self.is_int(s) => {
                    let src = cur[s.index()];
                    if src.is_subset_of(Interval::top_of(ty)) && src.is_bounded() {
                        src
                    } else if src.is_empty() {
                        Interval::Empty
                    } else {
                        Interval::top_of(ty)
                    }
                }
                _ => Interval::top_of(ty),
            },
            InstKind::Ld(_) => Interval::top_of(ty),
            InstKind::Bin(op) => {
                let (x, y) = (arg(0), arg(1));
                match op {
                    BinOp::Add => a.add(x, y),
                    BinOp::Sub => a.sub(x, y),
                    BinOp::Mul => a.mul(x, y),
                    BinOp::Min => a.min(x, y),
                    BinOp::Max => a.max(x, y),
                    BinOp::Shl => a.shl(x, y),
                    BinOp::Shr => a.shr(x, y),
                    BinOp::Div | BinOp::And | BinOp::Or | BinOp::Xor => {
                        if x.is_empty() || y.is_empty() {
                            Interval::Empty
                        } else if let (Some(p), Some(q)) = (x.as_point(), y.as_point()) {
                            let bits = eval::int_binop(*op, ty, p as u32, q as u32);
                            Interval::point(int_value(ty, bits))
                        } else if *op == BinOp::And {
                            match (x.as_point(), y.as_point()) {
                                (Some(m), _) | (_, Some(m)) if m >= 0 => Interval::new(0, m),
                                _ => Interval::top_of(ty),
                            }
                        } else {
                            Interval::top_of(ty)
                        }
                    }
                }
            }
            InstKind::Special(_) | InstKind::Emit => Interval::top_of(ty),
        };
        r.normalize(ty)
    }

    fn run(&self) -> Vec<Option<Interval>> {
        let n = self.k.values.len();
        let mut cur = vec![Interval::Empty; n];
        let mut visits = vec![0u32; n];
        let mut queued = vec![false; n];
        let mut work: VecDeque<ValueId> = VecDeque::new();
        for &v in &self.order {
            if self.is_int(v) && self.block_reachable(v) {
                work.push_back(v);
                queued[v.index()] = true;
            }
        }
        while let Some(v) = work.pop_front() {
            queued[v.index()] = false;
            let old = cur[v.index()];
            let mut new = old.hull(self.eval(v, &cur));
            if new == old {
                continue;
            }
            visits[v.index()] += 1;
            if visits[v.index()] > WIDEN_AFTER && self.is_phi(v) {
                new = Interval::widen(old, new).normalize(self.k.ty(v));
            }
            cur[v.index()] = new;
            for &u in &self.users[v.index()] {
                if self.is_int(u) && !queued[u.index()] && self.block_reachable(u) {
                    queued[u.index()] = true;
                    work.push_back(u);
                }
            }
        }

        for _ in 0..MAX_NARROWING_PASSES {
            let mut changed = false;
            for &v in &self.order {
                if !self.is_int(v) || !self.block_reachable(v) {
                    continue;
                }
                let narrowed = self.eval(v, &cur).intersect(cur[v.index()]);
                if narrowed != cur[v.index()] {
                    cur[v.index()] = narrowed;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }

        (0..n)
            .map(|i| if self.k.values[i].ty.is_int() { Some(cur[i]) } else { None })
            .collect()
    }

    /// Every cycle in SSA form passes through a phi, so widening there alone
    /// guarantees termination without discarding sigma constraints.
    fn is_phi(&self, v: ValueId) -> bool {
        matches!(self.defs[v.index()], Some(Def::Inst(inst, _)) if inst.is_phi())
    }

    fn block_reachable(&self, v: ValueId) -> bool {
        match self.defs[v.index()] {
            Some(Def::Inst(_, b)) => self.reachable[b.index()],
            Some(Def::Param(_)) => true,
            None => false,
        }
    }
}
