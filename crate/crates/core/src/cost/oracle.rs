//! A synthetic stand-in for HLS area reports.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::features::FeatureVector;
use crate::ir::Opcode;

/// Area of an empty accelerator (interface and FSM skeleton), in LUTs.
pub const ORACLE_FLOOR: f64 = 150.0;
const BRANCH_OVERHEAD: f64 = 35.0;
const SHARING_EXPONENT: f64 = 0.85;
const NOISE: f64 = 0.05;

/// (base LUTs, shared functional unit)
fn unit_cost(op: Opcode) -> (f64, bool) {
    use Opcode::*;
    match op {
        Add | Sub => (32.0, false),
        And | Or | Xor => (16.0, false),
        Shl | AShr => (24.0, false),
        Mul => (300.0, true),
        SDiv | SRem => (1100.0, true),
        FAdd | FSub => (450.0, true),
        FMul => (600.0, true),
        FDiv => (1500.0, true),
        ICmp => (16.0, false),
        FCmp => (120.0, true),
        Select => (20.0, false),
        ZExt | Trunc => (2.0, false),
        SIToFP | FPToSI => (180.0, true),
        Load | Store => (40.0, false),
        Gep => (24.0, false),
        Const => (4.0, false),
        Alloca => (30.0, false),
        Call => (60.0, false),
        Br => (12.0, false),
        Jmp => (4.0, false),
        Ret => (8.0, false),
    }
}

/// The deterministic part of the oracle.
pub fn oracle_noise_free(fv: &FeatureVector) -> f64 {
    let mut area = ORACLE_FLOOR + BRANCH_OVERHEAD * fv[Opcode::Br];
    for op in Opcode::ALL {
        let n = fv[op];
        if n <= 0.0 {
            continue;
        }
        let (c, shared) = unit_cost(op);
        area += if shared { c * n.powf(SHARING_EXPONENT) } else { c * n };
    }
    area
}

fn mix(seed: u64, fv: &FeatureVector) -> u64 {
    // FNV-1a over the seed and the feature bits
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for word in std::iter::once(seed).chain(fv.0.iter().map(|v| v.to_bits())) {
        for b in word.to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

/// Area in LUTs with reproducible multiplicative noise in [-5%, +5%].
pub fn synthetic_hls_oracle(fv: &FeatureVector, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, fv));
    let u: f64 = rng.gen_range(-NOISE..=NOISE);
    oracle_noise_free(fv) * (1.0 + u)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floor_and_sharing() {
        let zero = FeatureVector::default();
        assert_eq!(oracle_noise_free(&zero), ORACLE_FLOOR);
        let mut one = FeatureVector::default();
        one.0[Opcode::Mul.index()] = 1.0;
        let mut two = one;
        two.0[Opcode::Mul.index()] = 2.0;
        let a1 = oracle_noise_free(&one) - ORACLE_FLOOR;
        let a2 = oracle_noise_free(&two) - ORACLE_FLOOR;
        assert!(a2 < 2.0 * a1);
        let noisy = synthetic_hls_oracle(&one, 3);
        assert!((noisy / oracle_noise_free(&one) - 1.0).abs() <= 0.05 + 1e-12);
        assert_eq!(noisy, synthetic_hls_oracle(&one, 3));
    }
}
