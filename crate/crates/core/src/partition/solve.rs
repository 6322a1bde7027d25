use serde::{Deserialize, Serialize};

use super::{PartitionError, PartitionProblem, PS_PER_SECOND};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Assignment {
    Software,
    Hardware,
    /// Not realized itself: a root covered by a merged descendant, or an
    /// unselected merged function.
    Unused,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSolution {
    pub assignment: Vec<Assignment>,
    /// One bit per [`PartitionProblem::edges`] entry.
    pub frontier: Vec<bool>,
    pub objective_ps: u64,
    /// False when the node limit cut the search short.
    pub optimal: bool,
    pub nodes: u64,
}

impl PartitionSolution {
    /// Objective and frontier bits of an arbitrary assignment; feasibility
    /// is not checked.
    pub fn evaluate(p: &PartitionProblem, assignment: Vec<Assignment>) -> PartitionSolution {
        let mut objective = 0u64;
        for (i, a) in assignment.iter().enumerate() {
            objective += match a {
                Assignment::Software => p.sw[i],
                Assignment::Hardware => p.hw[i],
                Assignment::Unused => 0,
            };
        }
        let frontier: Vec<bool> = p
            .edges
            .iter()
            .map(|e| assignment[e.caller] == Assignment::Software && assignment[e.callee] == Assignment::Hardware)
            .collect();
        objective += p.edges.iter().zip(&frontier).filter(|(_, f)| **f).map(|(e, _)| e.cost_ps).sum::<u64>();
        PartitionSolution { assignment, frontier, objective_ps: objective, optimal: true, nodes: 0 }
    }

    pub fn all_software(p: &PartitionProblem) -> PartitionSolution {
        let a = (0..p.len()).map(|i| if p.merged[i] { Assignment::Unused } else { Assignment::Software }).collect();
        PartitionSolution::evaluate(p, a)
    }

    pub fn objective_seconds(&self) -> f64 {
        self.objective_ps as f64 / PS_PER_SECOND
    }

    pub fn swv(&self, i: usize) -> bool {
        self.assignment[i] == Assignment::Software
    }

    pub fn hwv(&self, i: usize) -> bool {
        self.assignment[i] == Assignment::Hardware
    }

    pub fn area_used(&self, p: &PartitionProblem) -> u64 {
        (0..p.len()).filter(|&i| self.hwv(i)).map(|i| p.area[i]).sum()
    }

    /// Software, hardware and communication shares of the objective, in ps.
    pub fn breakdown(&self, p: &PartitionProblem) -> (u64, u64, u64) {
        let sw = (0..p.len()).filter(|&i| self.swv(i)).map(|i| p.sw[i]).sum();
        let hw = (0..p.len()).filter(|&i| self.hwv(i)).map(|i| p.hw[i]).sum();
        let comm = p.edges.iter().zip(&self.frontier).filter(|(_, f)| **f).map(|(e, _)| e.cost_ps).sum();
        (sw, hw, comm)
    }

    /// A': functions left on the processor.
    pub fn software_set<'p>(&self, p: &'p PartitionProblem) -> Vec<&'p str> {
        (0..p.len()).filter(|&i| self.swv(i)).map(|i| p.names[i].as_str()).collect()
    }

    /// B': original functions in hardware.
    pub fn hardware_originals<'p>(&self, p: &'p PartitionProblem) -> Vec<&'p str> {
        (0..p.len()).filter(|&i| self.hwv(i) && !p.merged[i]).map(|i| p.names[i].as_str()).collect()
    }

    /// C: merged functions in hardware.
    pub fn hardware_merged<'p>(&self, p: &'p PartitionProblem) -> Vec<&'p str> {
        (0..p.len()).filter(|&i| self.hwv(i) && p.merged[i]).map(|i| p.names[i].as_str()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveOptions {
    pub node_limit: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { node_limit: 50_000_000 }
    }
}

struct Search<'p> {
    p: &'p PartitionProblem,
    order: Vec<usize>,
    pos: Vec<usize>,
    in_edges: Vec<Vec<usize>>,
    out_edges: Vec<Vec<usize>>,
    assign: Vec<Option<Assignment>>,
    covered_by: Vec<Option<usize>>,
    hw_callers: Vec<u32>,
    area: u64,
    cost: u64,
    best: u64,
    best_assign: Vec<Assignment>,
    nodes: u64,
    limit: u64,
    aborted: bool,
}

impl Search<'_> {
    fn saving(&self, i: usize) -> i128 {
        let covered: u64 = self.p.covers[i].iter().map(|&r| self.p.sw[r]).sum();
        covered as i128 - self.p.hw[i] as i128
    }

    fn allowed(&self, i: usize, v: Assignment, depth: usize) -> bool {
        let p = self.p;
        match v {
            Assignment::Software => {
                !p.merged[i] && self.covered_by[i].is_none() && self.hw_callers[i] == 0
            }
            Assignment::Hardware => {
                let free = p.covers[i].iter().all(|&r| {
                    self.covered_by[r].is_none()
                        && !matches!(self.assign[r], Some(Assignment::Software | Assignment::Hardware))
                });
                free && !p.software_only[i]
                    && self.area + p.area[i] <= p.platform.budget_luts
                    && p.callees[i].iter().all(|&j| self.assign[j] != Some(Assignment::Software))
            }
            Assignment::Unused => {
                if !p.merged[i] {
                    return self.covered_by[i].is_some() || self.coverable_later(i, depth, None);
                }
                // every root waiting on a merged cover must keep a candidate
                p.covers[i].iter().all(|&r| {
                    self.assign[r] != Some(Assignment::Unused)
                        || self.covered_by[r].is_some()
                        || self.coverable_later(r, depth, Some(i))
                })
            }
        }
    }

    fn coverable_later(&self, r: usize, depth: usize, except: Option<usize>) -> bool {
        self.p.descend[r].iter().any(|&k| Some(k) != except && self.pos[k] > depth)
    }

    fn apply(&mut self, i: usize, v: Assignment) {
        let p = self.p;
        self.assign[i] = Some(v);
        match v {
            Assignment::Software => {
                self.covered_by[i] = Some(i);
                self.cost += p.sw[i];
                for &e in &self.out_edges[i] {
                    if self.assign[p.edges[e].callee] == Some(Assignment::Hardware) {
                        self.cost += p.edges[e].cost_ps;
                    }
                }
            }
            Assignment::Hardware => {
                for &r in &p.covers[i] {
                    self.covered_by[r] = Some(i);
                }
                self.cost += p.hw[i];
                self.area += p.area[i];
                for &j in &p.callees[i] {
                    self.hw_callers[j] += 1;
                }
                for &e in &self.in_edges[i] {
                    if self.assign[p.edges[e].caller] == Some(Assignment::Software) {
                        self.cost += p.edges[e].cost_ps;
                    }
                }
            }
            Assignment::Unused => {}
        }
    }

    fn undo(&mut self, i: usize, v: Assignment) {
        let p = self.p;
        self.assign[i] = None;
        match v {
            Assignment::Software => {
                self.covered_by[i] = None;
                self.cost -= p.sw[i];
                for &e in &self.out_edges[i] {
                    if self.assign[p.edges[e].callee] == Some(Assignment::Hardware) {
                        self.cost -= p.edges[e].cost_ps;
                    }
                }
            }
            Assignment::Hardware => {
                for &r in &p.covers[i] {
                    self.covered_by[r] = None;
                }
                self.cost -= p.hw[i];
                self.area -= p.area[i];
                for &j in &p.callees[i] {
                    self.hw_callers[j] -= 1;
                }
                for &e in &self.in_edges[i] {
                    if self.assign[p.edges[e].caller] == Some(Assignment::Software) {
                        self.cost -= p.edges[e].cost_ps;
                    }
                }
            }
            Assignment::Unused => {}
        }
    }

    /// Committed cost plus every uncovered root at its software price,
    /// minus a fractional knapsack of the best remaining savings.
    fn lower_bound(&self, depth: usize) -> u64 {
        let p = self.p;
        let mut base = 0u64;
        for &r in &p.roots {
            if self.covered_by[r].is_none() {
                base += p.sw[r];
            }
        }
        let cap = p.platform.budget_luts - self.area;
        let mut items: Vec<(u64, u64)> = Vec::new();
        for &i in &self.order[depth..] {
            if p.area[i] > cap || p.software_only[i] {
                continue;
            }
            let mut s = 0u64;
            let mut ok = true;
            for &r in &p.covers[i] {
                if self.covered_by[r].is_some() || self.assign[r].is_some_and(|a| a != Assignment::Unused) {
                    ok = false;
                    break;
                }
                s += p.sw[r];
            }
            if ok && s > p.hw[i] {
                items.push((s - p.hw[i], p.area[i]));
            }
        }
        items.sort_by(|a, b| {
            // density descending; zero-area items first
            let l = u128::from(a.0) * u128::from(b.1);
            let r = u128::from(b.0) * u128::from(a.1);
            r.cmp(&l)
        });
        let mut left = cap;
        let mut save = 0u64;
        for (s, a) in items {
            if a <= left {
                left -= a;
                save += s;
            } else {
                let frac = (u128::from(s) * u128::from(left)).div_ceil(u128::from(a));
                save += frac as u64;
                break;
            }
        }
        (self.cost + base).saturating_sub(save)
    }

    fn dfs(&mut self, depth: usize) {
        self.nodes += 1;
        if self.nodes > self.limit {
            self.aborted = true;
            return;
        }
        if depth == self.order.len() {
            let done = self.p.roots.iter().all(|&r| self.covered_by[r].is_some());
            if done && self.cost < self.best {
                self.best = self.cost;
                self.best_assign = self.assign.iter().map(|a| a.unwrap()).collect();
            }
            return;
        }
        if self.lower_bound(depth) >= self.best {
            return;
        }
        let i = self.order[depth];
        for v in [Assignment::Hardware, Assignment::Software, Assignment::Unused] {
            if self.aborted {
                return;
            }
            if !self.allowed(i, v, depth) {
                continue;
            }
            self.apply(i, v);
            self.dfs(depth + 1);
            self.undo(i, v);
        }
    }
}

pub fn solve(p: &PartitionProblem) -> Result<PartitionSolution, PartitionError> {
    solve_with(p, &SolveOptions::default())
}

/// Depth-first branch and bound. Variables are visited by decreasing
/// software-minus-hardware saving, values in the order hw, sw, unused.
pub fn solve_with(p: &PartitionProblem, opts: &SolveOptions) -> Result<PartitionSolution, PartitionError> {
    let n = p.len();
    let start = PartitionSolution::all_software(p);
    let mut in_edges = vec![Vec::new(); n];
    let mut out_edges = vec![Vec::new(); n];
    for (k, e) in p.edges.iter().enumerate() {
        in_edges[e.callee].push(k);
        out_edges[e.caller].push(k);
    }
    let mut s = Search {
        p,
        order: Vec::new(),
        pos: vec![0; n],
        in_edges,
        out_edges,
        assign: vec![None; n],
        covered_by: vec![None; n],
        hw_callers: vec![0; n],
        area: 0,
        cost: 0,
        best: start.objective_ps,
        best_assign: start.assignment.clone(),
        nodes: 0,
        limit: opts.node_limit,
        aborted: false,
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s.saving(b).cmp(&s.saving(a)).then(a.cmp(&b)));
    for (k, &i) in order.iter().enumerate() {
        s.pos[i] = k;
    }
    s.order = order;
    s.dfs(0);
    let mut sol = PartitionSolution::evaluate(p, s.best_assign);
    debug_assert_eq!(sol.objective_ps, s.best);
    sol.optimal = !s.aborted;
    sol.nodes = s.nodes;
    Ok(sol)
}
