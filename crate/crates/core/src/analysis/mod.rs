//! Static analyses over modules and functions.

mod callgraph;
mod extract;
mod fingerprint;
mod loops;

pub use callgraph::{build_call_graph, CallGraph, CycleError};
pub use extract::{extract_loops, extract_loops_with_report, ExtractReport};
pub use fingerprint::{fingerprint, rank_fingerprints, rank_pairs, similarity, Fingerprint, RankedPair, MIN_PAIR_SIZE};
pub use loops::{dominators, natural_loops, Dominators, Loop, LoopForest};
