use serde::{Deserialize, Serialize};

use crate::ir::{Function, Operand, Type};

/// Which parent a merged function is standing in for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    /// `f_sel = 1`
    First,
    /// `f_sel = 0`
    Second,
}

/// Type-directed parameter correspondence between two functions.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ParamMap {
    /// (index in f1, index in f2)
    pub matched: Vec<(usize, usize)>,
    pub unmatched1: Vec<usize>,
    pub unmatched2: Vec<usize>,
}

impl ParamMap {
    /// Parameter count of the merged signature, `f_sel` included.
    pub fn merged_arity(&self) -> usize {
        self.matched.len() + self.unmatched1.len() + self.unmatched2.len() + 1
    }

    /// Arguments for a call to the merged function standing in for a call
    /// to one parent. Parameters of the other parent get neutral values.
    pub fn adapt_args(&self, side: Side, args: &[Operand], f1: &[Type], f2: &[Type]) -> Vec<Operand> {
        self.adapt(side, args, |t| Operand::Lit(t.zero()), f1, f2, Operand::Lit(crate::ir::Literal::Bool(side == Side::First)))
    }

    pub(crate) fn adapt<T: Clone>(
        &self,
        side: Side,
        args: &[T],
        neutral: impl Fn(Type) -> T,
        f1: &[Type],
        f2: &[Type],
        sel: T,
    ) -> Vec<T> {
        let mut out = Vec::with_capacity(self.merged_arity());
        for &(i, j) in &self.matched {
            out.push(args[if side == Side::First { i } else { j }].clone());
        }
        for &i in &self.unmatched1 {
            out.push(if side == Side::First { args[i].clone() } else { neutral(f1[i]) });
        }
        for &j in &self.unmatched2 {
            out.push(if side == Side::Second { args[j].clone() } else { neutral(f2[j]) });
        }
        out.push(sel);
        out
    }
}

/// Greedy in-order matching: each f1 parameter takes the next parameter
/// of the same type among the f2 parameters after the previous match.
pub fn merge_parameters(f1: &Function, f2: &Function) -> ParamMap {
    let mut map = ParamMap::default();
    let mut next = 0;
    let mut taken = vec![false; f2.params.len()];
    for (i, p) in f1.params.iter().enumerate() {
        match (next..f2.params.len()).find(|&j| f2.params[j].ty == p.ty) {
            Some(j) => {
                map.matched.push((i, j));
                taken[j] = true;
                next = j + 1;
            }
            None => map.unmatched1.push(i),
        }
    }
    map.unmatched2 = (0..f2.params.len()).filter(|&j| !taken[j]).collect();
    map
}
