use serde::{Deserialize, Serialize};

use crate::ir::{Inst, Opcode, NUM_OPCODES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlignEntry {
    /// (position in s1, position in s2)
    Aligned(usize, usize),
    /// Present only in s2.
    Gap1(usize),
    /// Present only in s1.
    Gap2(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub entries: Vec<AlignEntry>,
    pub score: f64,
    pub len1: usize,
    pub len2: usize,
}

impl Alignment {
    pub fn aligned_count(&self) -> usize {
        self.entries.iter().filter(|e| matches!(e, AlignEntry::Aligned(..))).count()
    }

    pub fn gap_count(&self) -> usize {
        self.entries.len() - self.aligned_count()
    }

    /// `2 * aligned / (len1 + len2)`
    pub fn aligned_fraction(&self) -> f64 {
        if self.len1 + self.len2 == 0 {
            return 0.0;
        }
        2.0 * self.aligned_count() as f64 / (self.len1 + self.len2) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignParams {
    /// Match score per opcode.
    pub weights: Vec<f64>,
    pub gap: f64,
}

impl Default for AlignParams {
    fn default() -> Self {
        let mut weights = vec![1.0; NUM_OPCODES];
        for op in [
            Opcode::Call,
            Opcode::Load,
            Opcode::Store,
            Opcode::Mul,
            Opcode::SDiv,
            Opcode::SRem,
            Opcode::FMul,
            Opcode::FDiv,
        ] {
            weights[op.index()] = 4.0;
        }
        AlignParams { weights, gap: 0.1 }
    }
}

impl AlignParams {
    pub fn uniform(weight: f64, gap: f64) -> AlignParams {
        AlignParams { weights: vec![weight; NUM_OPCODES], gap }
    }

    pub fn weight(&self, op: Opcode) -> f64 {
        self.weights[op.index()]
    }
}

// Scores are accumulated in fixed point so that differently ordered sums
// of the same terms compare exactly.
const UNITS: f64 = 1_000_000.0;

fn units(x: f64) -> i64 {
    (x * UNITS).round() as i64
}

/// Instructions that may share one merged instruction: same opcode,
/// annotations, callee and constant payload, and both or neither
/// producing a value.
pub fn same_shape(a: &Inst, b: &Inst) -> bool {
    a.opcode == b.opcode
        && a.ty == b.ty
        && a.pred == b.pred
        && a.cast_to == b.cast_to
        && a.callee == b.callee
        && a.dest.is_some() == b.dest.is_some()
        && a.operands.len() == b.operands.len()
        && (!matches!(a.opcode, Opcode::Const | Opcode::Alloca) || a.operands == b.operands)
}

/// Needleman-Wunsch global alignment. Only pairs accepted by `matches`
/// may align; each scores `weight(item of s1)`, and each gap costs `gap`.
pub fn align_by<T>(
    s1: &[T],
    s2: &[T],
    matches: impl Fn(&T, &T) -> bool,
    weight: impl Fn(&T) -> f64,
    gap: f64,
) -> Alignment {
    let (n, m) = (s1.len(), s2.len());
    let g = units(gap);
    let w: Vec<i64> = s1.iter().map(|x| units(weight(x))).collect();
    let cols = m + 1;
    let mut dp = vec![0i64; (n + 1) * cols];
    // 0 = diagonal, 1 = up (s1 item alone), 2 = left (s2 item alone)
    let mut from = vec![0u8; (n + 1) * cols];
    for i in 1..=n {
        dp[i * cols] = dp[(i - 1) * cols] - g;
        from[i * cols] = 1;
    }
    for j in 1..=m {
        dp[j] = dp[j - 1] - g;
        from[j] = 2;
    }
    for i in 1..=n {
        for j in 1..=m {
            let mut best = dp[(i - 1) * cols + j] - g;
            let mut dir = 1;
            if matches(&s1[i - 1], &s2[j - 1]) {
                let d = dp[(i - 1) * cols + j - 1] + w[i - 1];
                if d >= best {
                    best = d;
                    dir = 0;
                }
            }
            let l = dp[i * cols + j - 1] - g;
            if l > best {
                best = l;
                dir = 2;
            }
            dp[i * cols + j] = best;
            from[i * cols + j] = dir;
        }
    }
    let mut entries = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        match from[i * cols + j] {
            0 => {
                entries.push(AlignEntry::Aligned(i - 1, j - 1));
                i -= 1;
                j -= 1;
            }
            1 => {
                entries.push(AlignEntry::Gap2(i - 1));
                i -= 1;
            }
            _ => {
                entries.push(AlignEntry::Gap1(j - 1));
                j -= 1;
            }
        }
    }
    entries.reverse();
    Alignment { entries, score: dp[n * cols + m] as f64 / UNITS, len1: n, len2: m }
}

/// Aligns two instruction sequences.
pub fn align(s1: &[&Inst], s2: &[&Inst], params: &AlignParams) -> Alignment {
    align_by(s1, s2, |a, b| same_shape(a, b), |a| params.weight(a.opcode), params.gap)
}

/// Best score over every alignment, by explicit enumeration. Exponential;
/// meant as a test oracle for short sequences.
pub fn align_exhaustive<T>(
    s1: &[T],
    s2: &[T],
    matches: impl Fn(&T, &T) -> bool + Copy,
    weight: impl Fn(&T) -> f64 + Copy,
    gap: f64,
) -> f64 {
    fn go<T>(
        s1: &[T],
        s2: &[T],
        matches: impl Fn(&T, &T) -> bool + Copy,
        weight: impl Fn(&T) -> f64 + Copy,
        g: i64,
    ) -> i64 {
        if s1.is_empty() || s2.is_empty() {
            return -g * (s1.len() + s2.len()) as i64;
        }
        let mut best = go(&s1[1..], s2, matches, weight, g) - g;
        best = best.max(go(s1, &s2[1..], matches, weight, g) - g);
        if matches(&s1[0], &s2[0]) {
            best = best.max(go(&s1[1..], &s2[1..], matches, weight, g) + units(weight(&s1[0])));
        }
        best
    }
    go(s1, s2, matches, weight, units(gap)) as f64 / UNITS
}
