use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{CallEdge, PartitionProblem, Platform};

/// Size knobs for [`random_problem`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomShape {
    pub roots: usize,
    pub merged: usize,
    /// Merges of two earlier merged functions.
    pub depth2: usize,
    pub edge_prob: f64,
    /// Zero latency and unlimited bandwidth.
    pub free_comm: bool,
}

impl Default for RandomShape {
    fn default() -> Self {
        RandomShape { roots: 9, merged: 3, depth2: 1, edge_prob: 0.2, free_comm: false }
    }
}

struct Builder {
    p: PartitionProblem,
    closure: Vec<BTreeSet<usize>>,
}

impl Builder {
    fn push(&mut self, name: String, merged: bool, sw: u64, hw: u64, area: u64) -> usize {
        let p = &mut self.p;
        p.names.push(name);
        p.merged.push(merged);
        p.software_only.push(false);
        p.sw.push(sw);
        p.hw.push(hw);
        p.area.push(area);
        p.callees.push(Vec::new());
        p.parents.push(Vec::new());
        self.closure.push(BTreeSet::new());
        p.names.len() - 1
    }

    fn covered(&self, k: usize) -> BTreeSet<usize> {
        if self.p.parents[k].is_empty() {
            return BTreeSet::from([k]);
        }
        self.p.parents[k].iter().flat_map(|&q| self.covered(q)).collect()
    }

    /// Merges `a` and `b` into a new hardware-only candidate whose incoming
    /// edges are the union of the covered roots' incoming edges.
    fn merge(&mut self, a: usize, b: usize, rng: &mut impl Rng) -> usize {
        let hw = ((self.p.hw[a] + self.p.hw[b]) as f64 * rng.gen_range(0.55..1.3)) as u64;
        let area = ((self.p.area[a] + self.p.area[b]) as f64 * rng.gen_range(0.45..0.95)) as u64;
        let name = format!("{}_{}", self.p.names[a], self.p.names[b]);
        let k = self.push(name, true, 0, hw, area);
        self.p.parents[k] = vec![a, b];
        let cl: BTreeSet<usize> = self.closure[a].union(&self.closure[b]).copied().collect();
        self.p.callees[k] = cl.iter().copied().collect();
        self.closure[k] = cl;
        let cover = self.covered(k);
        let mut incoming: std::collections::BTreeMap<usize, (u64, u64)> = Default::default();
        for e in &self.p.edges {
            if cover.contains(&e.callee) && !self.p.merged[e.caller] {
                let x = incoming.entry(e.caller).or_default();
                x.0 += e.calls;
                x.1 += e.bytes;
            }
        }
        for (caller, (calls, bytes)) in incoming {
            let cost_ps = self.p.platform.crossing_ps(calls, bytes);
            self.p.edges.push(CallEdge { caller, callee: k, calls, bytes, cost_ps });
        }
        k
    }

    fn independent(&self, a: usize, b: usize) -> bool {
        let (ca, cb) = (self.covered(a), self.covered(b));
        ca.is_disjoint(&cb)
            && ca.iter().all(|r| !self.closure[b].contains(r))
            && cb.iter().all(|r| !self.closure[a].contains(r))
    }
}

/// A random instance: a call DAG over `roots` originals, merged candidates
/// over independent root pairs, and depth-2 merges of disjoint candidates.
pub fn random_problem(shape: &RandomShape, rng: &mut impl Rng) -> PartitionProblem {
    let platform = if shape.free_comm {
        Platform { budget_luts: 0, latency_cycles: 0.0, bandwidth: f64::INFINITY, clock: 1e-9 }
    } else {
        let latency = *[0.0, 25.0, 500.0].choose(rng).unwrap();
        let bandwidth = *[f64::INFINITY, 1e9, 4e9].choose(rng).unwrap();
        Platform { budget_luts: 0, latency_cycles: latency, bandwidth, clock: 1e-9 }
    };
    let mut b = Builder {
        p: PartitionProblem {
            names: Vec::new(),
            merged: Vec::new(),
            software_only: Vec::new(),
            sw: Vec::new(),
            hw: Vec::new(),
            area: Vec::new(),
            callees: Vec::new(),
            edges: Vec::new(),
            parents: Vec::new(),
            descend: Vec::new(),
            covers: Vec::new(),
            roots: Vec::new(),
            platform,
        },
        closure: Vec::new(),
    };
    for i in 0..shape.roots {
        let sw = rng.gen_range(1_000..1_000_000u64);
        let hw = (sw as f64 * rng.gen_range(0.05..1.4)) as u64;
        let area = rng.gen_range(50..3_000u64);
        b.push(format!("f{i}"), false, sw, hw, area);
    }
    for i in (0..shape.roots).rev() {
        for j in i + 1..shape.roots {
            if rng.gen_bool(shape.edge_prob) {
                let calls = rng.gen_range(1..200u64);
                let bytes = calls * 8 * rng.gen_range(0..6u64);
                let cost_ps = platform.crossing_ps(calls, bytes);
                b.p.edges.push(CallEdge { caller: i, callee: j, calls, bytes, cost_ps });
                let cj = b.closure[j].clone();
                b.closure[i].insert(j);
                b.closure[i].extend(cj);
            }
        }
        b.p.callees[i] = b.closure[i].iter().copied().collect();
    }
    let mut made = 0;
    for _ in 0..shape.merged * 20 {
        if made == shape.merged || shape.roots < 2 {
            break;
        }
        let x = rng.gen_range(0..shape.roots);
        let y = rng.gen_range(0..shape.roots);
        let dup = (shape.roots..b.p.len()).any(|k| {
            let ps = &b.p.parents[k];
            (ps[0] == x && ps[1] == y) || (ps[0] == y && ps[1] == x)
        });
        if x != y && !dup && b.independent(x, y) {
            b.merge(x, y, rng);
            made += 1;
        }
    }
    let first = b.p.len() - made;
    let mut deep = 0;
    for _ in 0..shape.depth2 * 20 {
        if deep == shape.depth2 || made < 2 {
            break;
        }
        let x = rng.gen_range(first..first + made);
        let y = rng.gen_range(first..first + made);
        if x != y && b.independent(x, y) {
            b.merge(x, y, rng);
            deep += 1;
        }
    }
    let mut p = b.p;
    if shape.roots > 0 && rng.gen_bool(0.3) {
        p.software_only[0] = true;
    }
    p.derive_merge_sets();
    let total = p.total_area();
    p.platform.budget_luts = (total as f64 * rng.gen_range(0.05..0.8)) as u64;
    p
}
