use crate::ir::{successor_indices, Function};

/// A reverse post-order of the blocks. With seed 0 successors are explored
/// so that the first successor of each branch is listed first; bit `i` of
/// the seed flips that choice at the `i`-th branching block reached.
pub fn block_order(f: &Function, seed: u64) -> Vec<usize> {
    let succ = successor_indices(f);
    let n = succ.len();
    let mut seen = vec![false; n];
    let mut post = Vec::with_capacity(n);
    let mut branch_no = 0u32;
    let mut order_of = |b: usize| -> Vec<usize> {
        let mut ss = succ[b].clone();
        if ss.len() > 1 {
            let flip = branch_no < 64 && (seed >> branch_no) & 1 == 1;
            branch_no += 1;
            if !flip {
                ss.reverse();
            }
        }
        ss
    };
    let mut stack: Vec<(usize, Vec<usize>, usize)> = vec![(0, order_of(0), 0)];
    seen[0] = true;
    while let Some(top) = stack.last_mut() {
        if top.2 < top.1.len() {
            let s = top.1[top.2];
            top.2 += 1;
            if !seen[s] {
                seen[s] = true;
                let o = order_of(s);
                stack.push((s, o, 0));
            }
        } else {
            post.push(top.0);
            stack.pop();
        }
    }
    post.reverse();
    post
}

/// Instruction positions `(block, index)` with blocks kept contiguous.
pub fn linearize(f: &Function, seed: u64) -> Vec<(usize, usize)> {
    block_order(f, seed).into_iter().flat_map(|b| (0..f.blocks[b].insts.len()).map(move |i| (b, i))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_module;

    #[test]
    fn diamond_orders() {
        let m = parse_module("func @d(%c: i1) -> void { a: br i1 %c, b, c  b: jmp d  c: jmp d  d: ret }").unwrap();
        let f = &m.functions["d"];
        assert_eq!(block_order(f, 0), vec![0, 1, 2, 3]);
        assert_eq!(block_order(f, 1), vec![0, 2, 1, 3]);
        assert_eq!(linearize(f, 0), vec![(0, 0), (1, 0), (2, 0), (3, 0)]);
    }
}
