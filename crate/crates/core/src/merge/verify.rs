use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ir::random::random_args;
use crate::ir::{ExecError, Interpreter, Memory, Module, Type, Value};

use super::params::{merge_parameters, Side};

/// Fuel per parent run. The merged run gets ten times as much.
pub const VERIFY_FUEL: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub trials: usize,
    pub seed: u64,
    pub fuel: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { trials: 200, seed: 0, fuel: VERIFY_FUEL }
    }
}

/// Observable behaviour of one run.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Returned { value: Option<Value>, heap: Vec<u8> },
    Failed(&'static str),
}

impl Outcome {
    fn of(r: Result<Option<Value>, ExecError>, mem: Memory) -> Outcome {
        match r {
            Ok(value) => Outcome::Returned { value, heap: mem.bytes().to_vec() },
            Err(e) => Outcome::Failed(e.kind()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    pub side: Side,
    /// Arguments of the parent call.
    pub args: Vec<Value>,
    pub expected: Outcome,
    pub actual: Outcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub passed: bool,
    /// Trials compared, both sides together.
    pub trials: usize,
    /// Trials dropped because the parent ran out of fuel.
    pub skipped: usize,
    pub counterexample: Option<Counterexample>,
    pub error: Option<String>,
}

/// Differential check of `f12` against `f1` (`f_sel = 1`) and `f2`
/// (`f_sel = 0`) on random inputs.
pub fn verify_merge(m: &Module, f1: &str, f2: &str, f12: &str, trials: usize, seed: u64) -> VerifyReport {
    verify_merge_with(m, f1, f2, f12, &VerifyOptions { trials, seed, fuel: VERIFY_FUEL })
}

pub fn verify_merge_with(m: &Module, f1: &str, f2: &str, f12: &str, opts: &VerifyOptions) -> VerifyReport {
    let mut report = VerifyReport { passed: false, trials: 0, skipped: 0, counterexample: None, error: None };
    let (Some(a), Some(b), Some(merged)) = (m.function(f1), m.function(f2), m.function(f12)) else {
        report.error = Some("function missing from module".into());
        return report;
    };
    let pm = merge_parameters(a, b);
    if merged.params.len() != pm.merged_arity() {
        report.error = Some(format!(
            "@{f12} has {} parameters, expected {}",
            merged.params.len(),
            pm.merged_arity()
        ));
        return report;
    }
    let t1: Vec<Type> = a.params.iter().map(|p| p.ty).collect();
    let t2: Vec<Type> = b.params.iter().map(|p| p.ty).collect();
    let interp = Interpreter::new(m);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let neutral = |t: Type| Value::zero(t);
    for side in [Side::First, Side::Second] {
        let (parent, types) = if side == Side::First { (f1, &t1) } else { (f2, &t2) };
        for _ in 0..opts.trials {
            let mut mem = Memory::new();
            let args = random_args(types, &mut mem, &mut rng);
            let margs = pm.adapt(side, &args, neutral, &t1, &t2, Value::I1(side == Side::First));
            let mut pmem = mem.clone();
            let pres = interp.run(parent, &args, &mut pmem, opts.fuel).map(|e| e.value);
            if matches!(pres, Err(ExecError::FuelExhausted(_))) {
                report.skipped += 1;
                continue;
            }
            let mut mmem = mem;
            let mres = interp.run(f12, &margs, &mut mmem, opts.fuel.saturating_mul(10)).map(|e| e.value);
            report.trials += 1;
            let expected = Outcome::of(pres, pmem);
            let actual = Outcome::of(mres, mmem);
            if expected != actual {
                report.counterexample = Some(Counterexample { side, args, expected, actual });
                return report;
            }
        }
    }
    report.passed = true;
    report
}
