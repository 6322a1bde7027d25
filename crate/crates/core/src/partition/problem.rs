use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::PartitionError;
use crate::analysis::build_call_graph;
use crate::cost::CostEstimate;
use crate::ir::{Module, Trace};

pub const PS_PER_SECOND: f64 = 1e12;

/// Interconnect and area limits of the target system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Platform {
    pub budget_luts: u64,
    /// Cycles paid per software-to-hardware invocation.
    pub latency_cycles: f64,
    /// Bytes per second; `f64::INFINITY` drops the transfer term.
    /// Serialized as `null` when unlimited.
    #[serde(with = "unlimited")]
    pub bandwidth: f64,
    /// Seconds per cycle.
    pub clock: f64,
}

mod unlimited {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        (if v.is_finite() { Some(*v) } else { None }).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl Default for Platform {
    fn default() -> Self {
        Platform { budget_luts: 10_000, latency_cycles: 25.0, bandwidth: f64::INFINITY, clock: 1e-9 }
    }
}

impl Platform {
    /// Cost in picoseconds of `calls` invocations moving `bytes` in total.
    pub fn crossing_ps(&self, calls: u64, bytes: u64) -> u64 {
        let mut s = calls as f64 * self.latency_cycles * self.clock;
        if self.bandwidth.is_finite() && self.bandwidth > 0.0 {
            s += bytes as f64 / self.bandwidth;
        } else if self.bandwidth <= 0.0 && bytes > 0 {
            s = f64::INFINITY;
        }
        to_ps(s)
    }
}

pub(crate) fn to_ps(seconds: f64) -> u64 {
    let v = (seconds * PS_PER_SECOND).round();
    if v >= u64::MAX as f64 / 4.0 {
        u64::MAX / 4
    } else {
        v.max(0.0) as u64
    }
}

/// Which merged function was built from which two parents.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeGraph {
    pub parents: BTreeMap<String, (String, String)>,
}

impl MergeGraph {
    pub fn add(&mut self, merged: impl Into<String>, p1: impl Into<String>, p2: impl Into<String>) {
        self.parents.insert(merged.into(), (p1.into(), p2.into()));
    }

    pub fn is_merged(&self, f: &str) -> bool {
        self.parents.contains_key(f)
    }

    /// Original functions a merged function stands in for.
    pub fn covered_roots(&self, f: &str) -> BTreeSet<String> {
        match self.parents.get(f) {
            None => BTreeSet::from([f.to_owned()]),
            Some((a, b)) => {
                let mut s = self.covered_roots(a);
                s.extend(self.covered_roots(b));
                s
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallEdge {
    pub caller: usize,
    pub callee: usize,
    pub calls: u64,
    pub bytes: u64,
    /// Price of this edge when the caller runs in software and the callee
    /// in hardware.
    pub cost_ps: u64,
}

/// A solver-ready instance. Times are integer picoseconds so objectives
/// compare exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionProblem {
    pub names: Vec<String>,
    pub merged: Vec<bool>,
    /// Functions that must stay on the processor (the program entry).
    pub software_only: Vec<bool>,
    pub sw: Vec<u64>,
    pub hw: Vec<u64>,
    pub area: Vec<u64>,
    /// `C_i`, transitive.
    pub callees: Vec<Vec<usize>>,
    pub edges: Vec<CallEdge>,
    /// Direct merge parents, empty for originals.
    pub parents: Vec<Vec<usize>>,
    /// Recursive merge descendants of every function.
    pub descend: Vec<Vec<usize>>,
    /// For merged functions, the roots they cover; `[i]` for a root.
    pub covers: Vec<Vec<usize>>,
    pub roots: Vec<usize>,
    pub platform: Platform,
}

impl PartitionProblem {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn total_area(&self) -> u64 {
        self.area.iter().sum()
    }

    /// Objective of running every root in software.
    pub fn all_software_ps(&self) -> u64 {
        self.roots.iter().map(|&r| self.sw[r]).sum()
    }

    /// Recomputes edge prices after a platform change.
    pub fn set_platform(&mut self, platform: Platform) {
        self.platform = platform;
        for e in &mut self.edges {
            e.cost_ps = platform.crossing_ps(e.calls, e.bytes);
        }
    }

    /// Fills `descend`, `covers` and `roots` from `parents`.
    pub(crate) fn derive_merge_sets(&mut self) {
        let n = self.len();
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (k, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                children[p].push(k);
            }
        }
        fn down(i: usize, children: &[Vec<usize>], out: &mut BTreeSet<usize>) {
            for &c in &children[i] {
                if out.insert(c) {
                    down(c, children, out);
                }
            }
        }
        fn up(i: usize, parents: &[Vec<usize>], out: &mut BTreeSet<usize>) {
            if parents[i].is_empty() {
                out.insert(i);
            }
            for &p in &parents[i] {
                up(p, parents, out);
            }
        }
        self.descend = (0..n)
            .map(|i| {
                let mut s = BTreeSet::new();
                down(i, &children, &mut s);
                s.into_iter().collect()
            })
            .collect();
        self.covers = (0..n)
            .map(|i| {
                let mut s = BTreeSet::new();
                up(i, &self.parents, &mut s);
                s.into_iter().collect()
            })
            .collect();
        self.roots = (0..n).filter(|&i| self.parents[i].is_empty()).collect();
    }
}

/// Assembles an instance. `m` holds the original functions plus every
/// merged candidate; `trace` is the all-software profile of the originals
/// and `merged_traces[k]` the profile of the module with calls to `k`'s
/// parents redirected to `k`, which supplies `k`'s incoming call edges.
pub fn build_problem(
    m: &Module,
    costs: &BTreeMap<String, CostEstimate>,
    trace: &Trace,
    merges: &MergeGraph,
    merged_traces: &BTreeMap<String, Trace>,
    platform: Platform,
) -> Result<PartitionProblem, PartitionError> {
    let cg = build_call_graph(m).map_err(|e| PartitionError::CallGraph(e.to_string()))?;
    let names: Vec<String> = m.functions.keys().cloned().collect();
    let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let n = names.len();
    let mut p = PartitionProblem {
        names: names.clone(),
        merged: vec![false; n],
        software_only: names.iter().map(|f| *f == m.entry).collect(),
        sw: vec![0; n],
        hw: vec![0; n],
        area: vec![0; n],
        callees: vec![Vec::new(); n],
        edges: Vec::new(),
        parents: vec![Vec::new(); n],
        descend: Vec::new(),
        covers: Vec::new(),
        roots: Vec::new(),
        platform,
    };
    for (k, (a, b)) in &merges.parents {
        let &ki = index.get(k.as_str()).ok_or_else(|| PartitionError::UnknownFunction(k.clone()))?;
        for parent in [a, b] {
            let &pi = index.get(parent.as_str()).ok_or_else(|| PartitionError::UnknownFunction(parent.clone()))?;
            p.parents[ki].push(pi);
        }
        p.merged[ki] = true;
    }
    for (i, name) in names.iter().enumerate() {
        let c = costs.get(name).ok_or_else(|| PartitionError::MissingCost(name.clone()))?;
        p.sw[i] = to_ps(c.own_sw);
        p.hw[i] = to_ps(c.own_hw);
        p.area[i] = c.own_area.round().max(0.0) as u64;
        p.callees[i] = cg.callees(name).iter().map(|c| index[c.as_str()]).collect();
        if p.merged[i] {
            p.sw[i] = 0;
        }
    }
    for k in 0..n {
        let mut stack = p.parents[k].clone();
        let mut seen = BTreeSet::new();
        while let Some(v) = stack.pop() {
            if v == k {
                return Err(PartitionError::BadMergeGraph(format!("`{}` is its own ancestor", names[k])));
            }
            if seen.insert(v) {
                stack.extend(&p.parents[v]);
            }
        }
    }
    p.derive_merge_sets();
    for (caller, row) in &trace.calls {
        let Some(&ci) = index.get(caller.as_str()) else { continue };
        for (callee, e) in row {
            let Some(&ji) = index.get(callee.as_str()) else { continue };
            p.edges.push(CallEdge {
                caller: ci,
                callee: ji,
                calls: e.calls,
                bytes: e.bytes,
                cost_ps: platform.crossing_ps(e.calls, e.bytes),
            });
        }
    }
    for k in merges.parents.keys() {
        let ki = index[k.as_str()];
        let Some(t) = merged_traces.get(k) else { continue };
        for (caller, row) in &t.calls {
            let Some(e) = row.get(k) else { continue };
            let Some(&ci) = index.get(caller.as_str()) else { continue };
            p.edges.push(CallEdge {
                caller: ci,
                callee: ki,
                calls: e.calls,
                bytes: e.bytes,
                cost_ps: platform.crossing_ps(e.calls, e.bytes),
            });
        }
    }
    Ok(p)
}
