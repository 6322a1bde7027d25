use std::fmt;

use super::{Assignment, PartitionProblem, PartitionSolution};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// A merged function placed in software.
    MergedInSoftware(usize),
    /// A software-only function placed in hardware.
    PinnedInHardware(usize),
    /// More area than the budget allows.
    AreaBudget { used: u64, budget: u64 },
    /// A root realized zero or several times.
    Coverage { root: usize, count: usize },
    /// A hardware caller with a callee root left in software.
    CalleeInSoftware { caller: usize, callee: usize },
    /// A sw-to-hw edge whose frontier bit is clear.
    MissingFrontier { edge: usize },
    ObjectiveMismatch { reported: u64, recomputed: u64 },
    Shape(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MergedInSoftware(i) => write!(f, "merged-in-software[{i}]"),
            Violation::PinnedInHardware(i) => write!(f, "pinned-in-hardware[{i}]"),
            Violation::AreaBudget { used, budget } => write!(f, "eq3 area {used} > budget {budget}"),
            Violation::Coverage { root, count } => write!(f, "eq4[{root}] covered {count} times"),
            Violation::CalleeInSoftware { caller, callee } => write!(f, "eq5[{caller},{callee}] callee in software"),
            Violation::MissingFrontier { edge } => write!(f, "eq6[edge {edge}] frontier not set"),
            Violation::ObjectiveMismatch { reported, recomputed } => {
                write!(f, "objective {reported} != recomputed {recomputed}")
            }
            Violation::Shape(s) => write!(f, "shape: {s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FeasibilityReport {
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn check_solution(p: &PartitionProblem, s: &PartitionSolution) -> FeasibilityReport {
    let mut v = Vec::new();
    if s.assignment.len() != p.len() || s.frontier.len() != p.edges.len() {
        v.push(Violation::Shape(format!(
            "{} assignments / {} frontier bits for {} functions / {} edges",
            s.assignment.len(),
            s.frontier.len(),
            p.len(),
            p.edges.len()
        )));
        return FeasibilityReport { violations: v };
    }
    let a = &s.assignment;
    for i in 0..p.len() {
        if p.merged[i] && a[i] == Assignment::Software {
            v.push(Violation::MergedInSoftware(i));
        }
        if p.software_only[i] && a[i] == Assignment::Hardware {
            v.push(Violation::PinnedInHardware(i));
        }
    }
    let used = s.area_used(p);
    if used > p.platform.budget_luts {
        v.push(Violation::AreaBudget { used, budget: p.platform.budget_luts });
    }
    for &r in &p.roots {
        let own = usize::from(a[r] != Assignment::Unused);
        let by_desc = p.descend[r].iter().filter(|&&k| a[k] == Assignment::Hardware).count();
        if own + by_desc != 1 {
            v.push(Violation::Coverage { root: r, count: own + by_desc });
        }
    }
    for i in 0..p.len() {
        if a[i] != Assignment::Hardware {
            continue;
        }
        for &j in &p.callees[i] {
            if p.merged[j] {
                continue;
            }
            let hw_cover =
                a[j] == Assignment::Hardware || p.descend[j].iter().any(|&k| a[k] == Assignment::Hardware);
            if !hw_cover {
                v.push(Violation::CalleeInSoftware { caller: i, callee: j });
            }
        }
    }
    for (k, e) in p.edges.iter().enumerate() {
        if a[e.caller] == Assignment::Software && a[e.callee] == Assignment::Hardware && !s.frontier[k] {
            v.push(Violation::MissingFrontier { edge: k });
        }
    }
    let (sw, hw, comm) = s.breakdown(p);
    if sw + hw + comm != s.objective_ps {
        v.push(Violation::ObjectiveMismatch { reported: s.objective_ps, recomputed: sw + hw + comm });
    }
    FeasibilityReport { violations: v }
}
