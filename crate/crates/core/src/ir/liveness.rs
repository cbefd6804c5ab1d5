use std::collections::BTreeSet;

use super::{BlockId, InstKind, Kernel, ValueId};

/// A program point. `After { block, index }` sits after instruction `index`;
/// `index == insts.len()` is after the terminator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Point {
    Entry,
    After { block: BlockId, index: usize },
}

/// Live value sets at every program point.
///
/// A value is live at a point when some path from the point reaches a use
/// without passing its definition. Values that are never used are live nowhere.
#[derive(Clone, Debug)]
pub struct LiveRanges {
    points: Vec<Point>,
    live: Vec<Vec<ValueId>>,
    by_value: Vec<Vec<usize>>,
    live_in: Vec<BTreeSet<ValueId>>,
    live_out: Vec<BTreeSet<ValueId>>,
}

impl LiveRanges {
    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Sorted live set at the `i`-th point.
    pub fn live_at(&self, i: usize) -> &[ValueId] {
        &self.live[i]
    }

    pub fn live_sets(&self) -> impl Iterator<Item = (Point, &[ValueId])> {
        self.points.iter().copied().zip(self.live.iter().map(Vec::as_slice))
    }

    /// Indices of the points where `v` is live, ascending.
    pub fn points_of(&self, v: ValueId) -> &[usize] {
        &self.by_value[v.index()]
    }

    pub fn is_dead(&self, v: ValueId) -> bool {
        self.by_value[v.index()].is_empty()
    }

    pub fn interferes(&self, a: ValueId, b: ValueId) -> bool {
        if a == b {
            return false;
        }
        let (pa, pb) = (&self.by_value[a.index()], &self.by_value[b.index()]);
        let (mut i, mut j) = (0, 0);
        while i < pa.len() && j < pb.len() {
            match pa[i].cmp(&pb[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    }

    /// Largest number of simultaneously live values.
    pub fn max_live(&self) -> usize {
        self.live.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn live_in(&self, b: BlockId) -> &BTreeSet<ValueId> {
        &self.live_in[b.index()]
    }

    pub fn live_out(&self, b: BlockId) -> &BTreeSet<ValueId> {
        &self.live_out[b.index()]
    }
}

/// Backward dataflow liveness. Phi operands are live at the end of the
/// matching predecessor, not at the start of the phi's block.
pub fn compute_live_ranges(k: &Kernel) -> LiveRanges {
    let nb = k.blocks.len();
    let cfg = k.cfg();

    // Upward-exposed uses and definitions per block.
    let mut gen = vec![BTreeSet::new(); nb];
    let mut kill = vec![BTreeSet::new(); nb];
    for b in k.block_ids() {
        let block = k.block(b);
        let (g, d) = (&mut gen[b.index()], &mut kill[b.index()]);
        for inst in &block.insts {
            if !inst.is_phi() {
                for u in inst.uses() {
                    if !d.contains(&u) {
                        g.insert(u);
                    }
                }
            }
            if let Some(dest) = inst.dest {
                d.insert(dest);
            }
        }
        for u in block.term.uses() {
            if !d.contains(&u) {
                g.insert(u);
            }
        }
    }
    // Phi operands flowing out of each predecessor.
    let mut phi_out = vec![BTreeSet::new(); nb];
    for b in k.block_ids() {
        for inst in &k.block(b).insts {
            if let InstKind::Phi(preds) = &inst.kind {
                for (p, a) in preds.iter().zip(&inst.args) {
                    if let Some(v) = a.value() {
                        phi_out[p.index()].insert(v);
                    }
                }
            }
        }
    }

    let mut live_in: Vec<BTreeSet<ValueId>> = vec![BTreeSet::new(); nb];
    let mut live_out: Vec<BTreeSet<ValueId>> = vec![BTreeSet::new(); nb];
    let order: Vec<BlockId> = cfg.rpo().iter().rev().copied().chain(
        k.block_ids().filter(|b| !cfg.is_reachable(*b)),
    ).collect();
    let mut changed = true;
    while changed {
        changed = false;
        for &b in &order {
            let mut out = phi_out[b.index()].clone();
            for s in cfg.succs(b) {
                out.extend(live_in[s.index()].iter().copied());
            }
            let mut inn: BTreeSet<ValueId> = out.difference(&kill[b.index()]).copied().collect();
            inn.extend(gen[b.index()].iter().copied());
            if out != live_out[b.index()] || inn != live_in[b.index()] {
                live_out[b.index()] = out;
                live_in[b.index()] = inn;
                changed = true;
            }
        }
    }

    let mut points = vec![Point::Entry];
    let mut live = vec![live_in.first().map(|s| s.iter().copied().collect()).unwrap_or_default()];
    for b in k.block_ids() {
        let block = k.block(b);
        let n = block.insts.len();
        let mut sets = vec![Vec::new(); n + 1];
        let mut cur = live_out[b.index()].clone();
        sets[n] = cur.iter().copied().collect();
        cur.extend(block.term.uses());
        for i in (0..n).rev() {
            sets[i] = cur.iter().copied().collect();
            let inst = &block.insts[i];
            if let Some(d) = inst.dest {
                cur.remove(&d);
            }
            if !inst.is_phi() {
                cur.extend(inst.uses());
            }
        }
        for (i, s) in sets.into_iter().enumerate() {
            points.push(Point::After { block: b, index: i });
            live.push(s);
        }
    }

    let mut by_value = vec![Vec::new(); k.values.len()];
    for (pi, set) in live.iter().enumerate() {
        for v in set {
            by_value[v.index()].push(pi);
        }
    }
    LiveRanges { points, live, by_value, live_in, live_out }
}
