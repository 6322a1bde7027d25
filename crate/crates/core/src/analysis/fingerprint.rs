use serde::{Deserialize, Serialize};

use crate::ir::{Function, Module, Opcode, NUM_OPCODES};

/// Functions smaller than this never enter a candidate pair.
pub const MIN_PAIR_SIZE: usize = 5;

/// Static opcode histogram of a function's own body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub counts: [u32; NUM_OPCODES],
    pub size: u32,
}

impl Fingerprint {
    pub fn get(&self, op: Opcode) -> u32 {
        self.counts[op.index()]
    }
}

pub fn fingerprint(f: &Function) -> Fingerprint {
    let mut counts = [0u32; NUM_OPCODES];
    for inst in f.insts() {
        counts[inst.opcode.index()] += 1;
    }
    Fingerprint { counts, size: counts.iter().sum() }
}

/// Shared-opcode mass normalised by the larger function.
pub fn similarity(a: &Fingerprint, b: &Fingerprint) -> f64 {
    let denom = a.size.max(b.size);
    if denom == 0 {
        return 0.0;
    }
    let shared: u32 = a.counts.iter().zip(&b.counts).map(|(x, y)| (*x).min(*y)).sum();
    f64::from(shared) / f64::from(denom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPair {
    /// Lexicographically smaller name.
    pub first: String,
    pub second: String,
    pub similarity: f64,
}

/// All index pairs `(i, j)`, `i < j`, of large-enough fingerprints, most
/// similar first; ties in index order.
pub fn rank_fingerprints(fps: &[Fingerprint]) -> Vec<(u32, u32, f64)> {
    let eligible: Vec<u32> =
        (0..fps.len() as u32).filter(|&i| fps[i as usize].size as usize >= MIN_PAIR_SIZE).collect();
    let mut out = Vec::with_capacity(eligible.len() * eligible.len().saturating_sub(1) / 2);
    for (k, &i) in eligible.iter().enumerate() {
        let a = &fps[i as usize];
        for &j in &eligible[k + 1..] {
            out.push((i, j, similarity(a, &fps[j as usize])));
        }
    }
    out.sort_unstable_by(|x, y| y.2.total_cmp(&x.2).then(x.0.cmp(&y.0)).then(x.1.cmp(&y.1)));
    out
}

/// Every pair of functions in `m`, ranked by fingerprint similarity.
pub fn rank_pairs(m: &Module) -> Vec<RankedPair> {
    let names: Vec<&str> = m.names().collect();
    let fps: Vec<Fingerprint> = m.functions.values().map(fingerprint).collect();
    rank_fingerprints(&fps)
        .into_iter()
        .map(|(i, j, s)| RankedPair {
            first: names[i as usize].to_owned(),
            second: names[j as usize].to_owned(),
            similarity: s,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_module;

    #[test]
    fn copies_score_one_and_disjoint_zero() {
        let m = parse_module(
            "func @a(%x: i32) -> i32 { b: %y = add i32 %x, 1 %y = add i32 %y, 1 %y = add i32 %y, 1 %y = add i32 %y, 1 ret i32 %y }
             func @b(%x: i32) -> i32 { b: %y = add i32 %x, 2 %y = add i32 %y, 1 %y = add i32 %y, 1 %y = add i32 %y, 1 ret i32 %y }
             func @c(%x: f64) -> f64 { b: %y = fmul f64 %x, 2.0 %y = fmul f64 %y, 2.0 %y = fdiv f64 %y, 2.0 %y = fsub f64 %y, 2.0 jmp e e: ret f64 %y }
             func @tiny() -> void { b: ret }",
        )
        .unwrap();
        let ranked = rank_pairs(&m);
        assert_eq!(ranked.len(), 3);
        assert_eq!((ranked[0].first.as_str(), ranked[0].second.as_str(), ranked[0].similarity), ("a", "b", 1.0));
        let ac = ranked.iter().find(|p| p.first == "a" && p.second == "c").unwrap();
        // only `ret` is shared
        assert_eq!(ac.similarity, 1.0 / 6.0);
    }
}
