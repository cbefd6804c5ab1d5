use super::{BlockId, Kernel};

/// Predecessor/successor lists, reverse postorder and dominators.
#[derive(Clone, Debug)]
pub struct Cfg {
    succs: Vec<Vec<BlockId>>,
    preds: Vec<Vec<BlockId>>,
    rpo: Vec<BlockId>,
    idom: Vec<Option<BlockId>>,
}

impl Cfg {
    pub fn new(k: &Kernel) -> Self {
        let n = k.blocks.len();
        let succs: Vec<Vec<BlockId>> = k
            .blocks
            .iter()
            .map(|b| b.term.successors().into_iter().filter(|s| s.index() < n).collect())
            .collect();
        let mut preds = vec![Vec::new(); n];
        for (i, ss) in succs.iter().enumerate() {
            for s in ss {
                if !preds[s.index()].contains(&BlockId(i as u32)) {
                    preds[s.index()].push(BlockId(i as u32));
                }
            }
        }
        let rpo = reverse_postorder(&succs);
        let idom = dominators(&preds, &rpo, n);
        Cfg { succs, preds, rpo, idom }
    }

    pub fn succs(&self, b: BlockId) -> &[BlockId] {
        &self.succs[b.index()]
    }

    pub fn preds(&self, b: BlockId) -> &[BlockId] {
        &self.preds[b.index()]
    }

    /// Reachable blocks in reverse postorder, entry first.
    pub fn rpo(&self) -> &[BlockId] {
        &self.rpo
    }

    pub fn rpo_index(&self) -> Vec<Option<usize>> {
        let mut idx = vec![None; self.succs.len()];
        for (i, b) in self.rpo.iter().enumerate() {
            idx[b.index()] = Some(i);
        }
        idx
    }

    pub fn is_reachable(&self, b: BlockId) -> bool {
        b.index() == 0 || self.idom[b.index()].is_some()
    }

    pub fn idom(&self, b: BlockId) -> Option<BlockId> {
        self.idom[b.index()]
    }

    /// Block-level dominance; unreachable blocks dominate nothing and are
    /// dominated by nothing.
    pub fn dominates(&self, a: BlockId, b: BlockId) -> bool {
        if !self.is_reachable(a) || !self.is_reachable(b) {
            return false;
        }
        let mut cur = b;
        loop {
            if cur == a {
                return true;
            }
            match self.idom[cur.index()] {
                Some(p) => cur = p,
                None => return false,
            }
        }
    }
}

fn reverse_postorder(succs: &[Vec<BlockId>]) -> Vec<BlockId> {
    if succs.is_empty() {
        return Vec::new();
    }
    let mut visited = vec![false; succs.len()];
    let mut post = Vec::with_capacity(succs.len());
    let mut stack: Vec<(BlockId, usize)> = vec![(BlockId(0), 0)];
    visited[0] = true;
    while let Some((b, i)) = stack.last_mut() {
        if let Some(&s) = succs[b.index()].get(*i) {
            *i += 1;
            if !visited[s.index()] {
                visited[s.index()] = true;
                stack.push((s, 0));
            }
        } else {
            post.push(*b);
            stack.pop();
        }
    }
    post.reverse();
    post
}

/// Cooper/Harvey/Kennedy iterative dominators. The entry has no idom.
fn dominators(preds: &[Vec<BlockId>], rpo: &[BlockId], n: usize) -> Vec<Option<BlockId>> {
    let mut order = vec![usize::MAX; n];
    for (i, b) in rpo.iter().enumerate() {
        order[b.index()] = i;
    }
    let mut idom: Vec<Option<usize>> = vec![None; n];
    if n == 0 {
        return Vec::new();
    }
    idom[0] = Some(0);
    let mut changed = true;
    while changed {
        changed = false;
        for &b in rpo.iter().skip(1) {
            let mut new_idom: Option<usize> = None;
            for p in &preds[b.index()] {
                let p = p.index();
                if idom[p].is_none() {
                    continue;
                }
                new_idom = Some(match new_idom {
                    None => p,
                    Some(cur) => intersect(&idom, &order, p, cur),
                });
            }
            if new_idom.is_some() && idom[b.index()] != new_idom {
                idom[b.index()] = new_idom;
                changed = true;
            }
        }
    }
    idom.iter()
        .enumerate()
        .map(|(i, d)| if i == 0 { None } else { d.map(|d| BlockId(d as u32)) })
        .collect()
}

fn intersect(idom: &[Option<usize>], order: &[usize], mut a: usize, mut b: usize) -> usize {
    while a != b {
        while order[a] > order[b] {
            a = idom[a].expect("processed block has an idom");
        }
        while order[b] > order[a] {
            b = idom[b].expect("processed block has an idom");
        }
    }
    a
}
