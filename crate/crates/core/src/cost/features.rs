use std::collections::BTreeMap;
use std::ops::{Add, Index};

use serde::{Deserialize, Serialize};

use crate::analysis::CallGraph;
use crate::ir::{Function, Module, Opcode, NUM_OPCODES};

/// Static opcode counts in [`Opcode::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; NUM_OPCODES]);

impl Default for FeatureVector {
    fn default() -> Self {
        FeatureVector([0.0; NUM_OPCODES])
    }
}

impl FeatureVector {
    pub fn get(&self, op: Opcode) -> f64 {
        self.0[op.index()]
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn scaled(&self, k: f64) -> FeatureVector {
        FeatureVector(self.0.map(|v| v * k))
    }
}

impl Add for FeatureVector {
    type Output = FeatureVector;
    fn add(mut self, rhs: FeatureVector) -> FeatureVector {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
        self
    }
}

impl Index<Opcode> for FeatureVector {
    type Output = f64;
    fn index(&self, op: Opcode) -> &f64 {
        &self.0[op.index()]
    }
}

pub fn own_features(f: &Function) -> FeatureVector {
    let mut v = FeatureVector::default();
    for inst in f.insts() {
        v.0[inst.opcode.index()] += 1.0;
    }
    v
}

/// Own counts plus, per static call site, the callee's hierarchical counts.
pub fn hierarchical_features(m: &Module, cg: &CallGraph) -> BTreeMap<String, FeatureVector> {
    let mut out: BTreeMap<String, FeatureVector> = BTreeMap::new();
    for name in cg.bottom_up() {
        let f = &m.functions[name];
        let mut v = own_features(f);
        for (callee, n) in &cg.sites[name] {
            v = v + out[callee].scaled(*n as f64);
        }
        out.insert(name.to_owned(), v);
    }
    out
}

pub fn extract_features(m: &Module, f: &str, cg: &CallGraph) -> FeatureVector {
    let mut memo: BTreeMap<&str, FeatureVector> = BTreeMap::new();
    fn go<'a>(m: &'a Module, f: &'a str, cg: &'a CallGraph, memo: &mut BTreeMap<&'a str, FeatureVector>) -> FeatureVector {
        if let Some(v) = memo.get(f) {
            return *v;
        }
        let mut v = own_features(&m.functions[f]);
        for (callee, n) in &cg.sites[f] {
            v = v + go(m, callee, cg, memo).scaled(*n as f64);
        }
        memo.insert(f, v);
        v
    }
    go(m, f, cg, &mut memo)
}
