//! Merging-aware hardware/software partitioning as a 0/1 program, with an
//! exact branch-and-bound solver and two independent oracles.

mod brute;
mod check;
mod knapsack;
mod problem;
mod random;
mod solve;

pub use brute::{solve_bruteforce, BRUTE_FORCE_LIMIT};
pub use check::{check_solution, FeasibilityReport, Violation};
pub use knapsack::solve_knapsack;
pub use problem::{build_problem, CallEdge, MergeGraph, Platform, PartitionProblem, PS_PER_SECOND};
pub use random::{random_problem, RandomShape};
pub use solve::{solve, solve_with, Assignment, PartitionSolution, SolveOptions};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PartitionError {
    #[error("no cost estimate for `{0}`")]
    MissingCost(String),
    #[error("`{0}` is not in the module")]
    UnknownFunction(String),
    #[error("merge graph: {0}")]
    BadMergeGraph(String),
    #[error("call graph: {0}")]
    CallGraph(String),
    #[error("no feasible assignment")]
    Infeasible,
    #[error("instance has {size} functions; the exhaustive oracle handles at most {limit}")]
    TooLarge { size: usize, limit: usize },
    #[error("the knapsack decomposition needs zero communication costs")]
    NonzeroFrontier,
}
