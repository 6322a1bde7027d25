//! With free communication the objective has no edge terms, so the
//! instance splits into groups tied only by coverage and callee
//! constraints. Each group yields a Pareto set of (area, time)
//! options; the optimum is the cheapest in-budget combination.

use super::{PartitionError, PartitionProblem};

const SW: u8 = 1;
const HW: u8 = 2;
const UNUSED: u8 = 4;

enum Constraint {
    /// Exactly one member realizes the root.
    Cover(Vec<usize>),
    /// Hardware caller forbids a software callee.
    Implies(usize, usize),
}

struct Ctx<'p> {
    p: &'p PartitionProblem,
    constraints: Vec<Constraint>,
    degree: Vec<usize>,
}

type Pareto = Vec<(u64, u64)>;

fn prune(mut v: Pareto, budget: u64) -> Pareto {
    v.retain(|x| x.0 <= budget);
    v.sort_unstable();
    let mut out: Pareto = Vec::with_capacity(v.len());
    for x in v {
        if out.last().map_or(true, |l| x.1 < l.1) {
            out.push(x);
        }
    }
    out
}

fn combine(a: &Pareto, b: &Pareto, budget: u64) -> Pareto {
    let mut v = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            v.push((x.0 + y.0, x.1 + y.1));
        }
    }
    prune(v, budget)
}

impl Ctx<'_> {
    fn covering(&self, i: usize) -> u8 {
        if self.p.merged[i] {
            HW
        } else {
            SW | HW
        }
    }

    fn propagate(&self, dom: &mut [u8]) -> bool {
        loop {
            let mut changed = false;
            for c in &self.constraints {
                match c {
                    Constraint::Cover(ms) => {
                        let mut definite = Vec::new();
                        let mut possible = Vec::new();
                        for &m in ms {
                            let cv = self.covering(m);
                            if dom[m] & cv != 0 {
                                possible.push(m);
                                if dom[m] & !cv == 0 {
                                    definite.push(m);
                                }
                            }
                        }
                        if definite.len() > 1 || possible.is_empty() {
                            return false;
                        }
                        if let [d] = definite[..] {
                            for &m in ms {
                                if m != d && dom[m] & self.covering(m) != 0 {
                                    dom[m] &= !self.covering(m);
                                    changed = true;
                                }
                            }
                        } else if let [only] = possible[..] {
                            let cv = self.covering(only);
                            if dom[only] & !cv != 0 {
                                dom[only] &= cv;
                                changed = true;
                            }
                        }
                    }
                    Constraint::Implies(i, j) => {
                        if dom[*i] == HW && dom[*j] & SW != 0 {
                            dom[*j] &= !SW;
                            changed = true;
                        }
                        if dom[*j] == SW && dom[*i] & HW != 0 {
                            dom[*i] &= !HW;
                            changed = true;
                        }
                    }
                }
            }
            if dom.iter().any(|d| *d == 0) {
                return false;
            }
            if !changed {
                return true;
            }
        }
    }

    fn value(&self, i: usize, d: u8) -> (u64, u64) {
        match d {
            SW => (0, self.p.sw[i]),
            HW => (self.p.area[i], self.p.hw[i]),
            _ => (0, 0),
        }
    }

    fn components(&self, dom: &[u8], vars: &[usize]) -> Vec<Vec<usize>> {
        let n = dom.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut y = x;
            while p[y] != r {
                let nx = p[y];
                p[y] = r;
                y = nx;
            }
            r
        }
        let open = |i: usize| dom[i].count_ones() > 1;
        for c in &self.constraints {
            let ms: Vec<usize> = match c {
                Constraint::Cover(ms) => ms.iter().copied().filter(|&m| open(m)).collect(),
                Constraint::Implies(i, j) => {
                    if open(*i) && open(*j) && dom[*i] & HW != 0 && dom[*j] & SW != 0 {
                        vec![*i, *j]
                    } else {
                        vec![]
                    }
                }
            };
            for w in ms.windows(2) {
                let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
                parent[a] = b;
            }
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for &v in vars {
            if open(v) {
                groups.entry(find(&mut parent, v)).or_default().push(v);
            }
        }
        groups.into_values().collect()
    }

    fn solve_set(&self, dom: &[u8], vars: &[usize]) -> Pareto {
        let budget = self.p.platform.budget_luts;
        let mut fixed = (0u64, 0u64);
        for &v in vars {
            if dom[v].count_ones() == 1 {
                let (a, c) = self.value(v, dom[v]);
                fixed = (fixed.0 + a, fixed.1 + c);
            }
        }
        let mut acc = prune(vec![fixed], budget);
        for comp in self.components(dom, vars) {
            if acc.is_empty() {
                break;
            }
            let part = self.branch(dom, &comp);
            acc = combine(&acc, &part, budget);
        }
        acc
    }

    fn branch(&self, dom: &[u8], comp: &[usize]) -> Pareto {
        let v = *comp.iter().max_by_key(|&&i| (self.degree[i], std::cmp::Reverse(i))).unwrap();
        let mut all = Vec::new();
        for x in [HW, SW, UNUSED] {
            if dom[v] & x == 0 {
                continue;
            }
            let mut d = dom.to_vec();
            d[v] = x;
            if self.propagate(&mut d) {
                all.extend(self.solve_set(&d, comp));
            }
        }
        prune(all, self.p.platform.budget_luts)
    }
}

/// Optimal objective by group decomposition; only valid when every
/// crossing costs nothing (zero latency, unlimited bandwidth).
pub fn solve_knapsack(p: &PartitionProblem) -> Result<u64, PartitionError> {
    if p.edges.iter().any(|e| e.cost_ps != 0) {
        return Err(PartitionError::NonzeroFrontier);
    }
    let n = p.len();
    let mut constraints = Vec::new();
    let mut degree = vec![0usize; n];
    for &r in &p.roots {
        let mut ms = vec![r];
        ms.extend(&p.descend[r]);
        for &m in &ms {
            degree[m] += 1;
        }
        constraints.push(Constraint::Cover(ms));
    }
    for i in 0..n {
        for &j in &p.callees[i] {
            if !p.merged[j] {
                constraints.push(Constraint::Implies(i, j));
                degree[i] += 1;
                degree[j] += 1;
            }
        }
    }
    let mut dom: Vec<u8> = (0..n)
        .map(|i| {
            let mut d = if p.merged[i] { HW | UNUSED } else { SW | HW };
            if !p.merged[i] && !p.descend[i].is_empty() {
                d |= UNUSED;
            }
            if p.area[i] > p.platform.budget_luts || p.software_only[i] {
                d &= !HW;
            }
            d
        })
        .collect();
    let ctx = Ctx { p, constraints, degree };
    if !ctx.propagate(&mut dom) {
        return Err(PartitionError::Infeasible);
    }
    let vars: Vec<usize> = (0..n).collect();
    let front = ctx.solve_set(&dom, &vars);
    front.iter().map(|x| x.1).min().ok_or(PartitionError::Infeasible)
}
