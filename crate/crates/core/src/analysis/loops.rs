use std::collections::BTreeSet;

use crate::ir::{successor_indices, Function};

/// Immediate dominators over block indices (entry is block 0).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dominators {
    /// `idom[0] == 0`.
    pub idom: Vec<usize>,
    /// Reverse post-order of the blocks reachable from the entry.
    pub rpo: Vec<usize>,
    rpo_pos: Vec<usize>,
}

impl Dominators {
    pub fn dominates(&self, a: usize, mut b: usize) -> bool {
        loop {
            if a == b {
                return true;
            }
            if b == 0 {
                return false;
            }
            b = self.idom[b];
        }
    }

    pub fn rpo_position(&self, b: usize) -> usize {
        self.rpo_pos[b]
    }
}

fn reverse_post_order(succ: &[Vec<usize>]) -> Vec<usize> {
    let n = succ.len();
    let mut seen = vec![false; n];
    let mut post = Vec::with_capacity(n);
    // explicit stack of (block, next successor index)
    let mut stack = vec![(0usize, 0usize)];
    seen[0] = true;
    while let Some(&(b, k)) = stack.last() {
        if k < succ[b].len() {
            stack.last_mut().unwrap().1 += 1;
            let s = succ[b][k];
            if !seen[s] {
                seen[s] = true;
                stack.push((s, 0));
            }
        } else {
            post.push(b);
            stack.pop();
        }
    }
    post.reverse();
    post
}

/// Iterative dominator computation of Cooper, Harvey and Kennedy.
pub fn dominators(f: &Function) -> Dominators {
    let succ = successor_indices(f);
    let n = succ.len();
    let rpo = reverse_post_order(&succ);
    let mut rpo_pos = vec![usize::MAX; n];
    for (i, &b) in rpo.iter().enumerate() {
        rpo_pos[b] = i;
    }
    let mut preds = vec![Vec::new(); n];
    for (b, ss) in succ.iter().enumerate() {
        for &s in ss {
            preds[s].push(b);
        }
    }
    const UNDEF: usize = usize::MAX;
    let mut idom = vec![UNDEF; n];
    idom[0] = 0;
    let intersect = |idom: &[usize], mut a: usize, mut b: usize| {
        while a != b {
            while rpo_pos[a] > rpo_pos[b] {
                a = idom[a];
            }
            while rpo_pos[b] > rpo_pos[a] {
                b = idom[b];
            }
        }
        a
    };
    let mut changed = true;
    while changed {
        changed = false;
        for &b in rpo.iter().skip(1) {
            let mut new = UNDEF;
            for &p in &preds[b] {
                if idom[p] == UNDEF {
                    continue;
                }
                new = if new == UNDEF { p } else { intersect(&idom, p, new) };
            }
            if new != idom[b] {
                idom[b] = new;
                changed = true;
            }
        }
    }
    Dominators { idom, rpo, rpo_pos }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Loop {
    pub header: usize,
    /// Block indices, header included, ascending.
    pub blocks: Vec<usize>,
    /// 1 for outermost loops.
    pub depth: usize,
    /// Index of the immediately enclosing loop in the forest.
    pub parent: Option<usize>,
}

impl Loop {
    pub fn contains(&self, b: usize) -> bool {
        self.blocks.binary_search(&b).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LoopForest {
    /// Outer loops precede the loops they contain.
    pub loops: Vec<Loop>,
    /// A retreating edge whose target does not dominate its source exists.
    pub irreducible: bool,
}

impl LoopForest {
    pub fn outermost(&self) -> impl Iterator<Item = &Loop> {
        self.loops.iter().filter(|l| l.parent.is_none())
    }
}

/// Natural loops from back edges; loops sharing a header are fused.
pub fn natural_loops(f: &Function) -> LoopForest {
    let succ = successor_indices(f);
    let dom = dominators(f);
    let n = succ.len();
    let mut preds = vec![Vec::new(); n];
    for (b, ss) in succ.iter().enumerate() {
        for &s in ss {
            preds[s].push(b);
        }
    }
    let mut irreducible = false;
    let mut bodies: Vec<(usize, BTreeSet<usize>)> = Vec::new();
    for &u in &dom.rpo {
        for &h in &succ[u] {
            if dom.rpo_pos[h] > dom.rpo_pos[u] {
                continue;
            }
            if !dom.dominates(h, u) {
                irreducible = true;
                continue;
            }
            let mut body = BTreeSet::from([h]);
            let mut work = vec![u];
            while let Some(x) = work.pop() {
                if body.insert(x) {
                    work.extend(preds[x].iter().copied());
                }
            }
            match bodies.iter_mut().find(|(hh, _)| *hh == h) {
                Some((_, b)) => b.extend(body),
                None => bodies.push((h, body)),
            }
        }
    }
    // Larger loops first so that parents precede children.
    bodies.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(&b.0)));
    let mut loops: Vec<Loop> = Vec::new();
    for (h, body) in &bodies {
        let parent = (0..loops.len())
            .rev()
            .filter(|&i| loops[i].header != *h && loops[i].contains(*h))
            .min_by_key(|&i| loops[i].blocks.len());
        let depth = parent.map(|p| loops[p].depth + 1).unwrap_or(1);
        loops.push(Loop { header: *h, blocks: body.iter().copied().collect(), depth, parent });
    }
    LoopForest { loops, irreducible }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_module;

    fn func(src: &str) -> Function {
        parse_module(src).unwrap().functions.into_values().next().unwrap()
    }

    #[test]
    fn diamond_dominators() {
        let f = func(
            "func @d(%c: i1) -> void { a: br i1 %c, b, c  b: jmp d  c: jmp d  d: ret }",
        );
        let dom = dominators(&f);
        assert_eq!(dom.idom, vec![0, 0, 0, 0]);
        assert!(dom.dominates(0, 3));
        assert!(!dom.dominates(1, 3));
        assert!(natural_loops(&f).loops.is_empty());
    }

    #[test]
    fn while_loop_has_one_loop() {
        let f = func(
            "func @w(%n: i32) -> i32 {
             entry: %i = const i32 0  jmp head
             head: %c = icmp slt i32 %i, %n  br i1 %c, body, exit
             body: %i = add i32 %i, 1  jmp head
             exit: ret i32 %i }",
        );
        let forest = natural_loops(&f);
        assert_eq!(forest.loops.len(), 1);
        assert_eq!(forest.loops[0].header, 1);
        assert_eq!(forest.loops[0].blocks, vec![1, 2]);
        assert_eq!(forest.loops[0].depth, 1);
        assert!(!forest.irreducible);
    }
}
