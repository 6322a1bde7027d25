//! Function merging: linearization, sequence alignment, parameter merging,
//! merged-body generation and differential verification.

mod align;
mod codegen;
mod linearize;
mod params;
mod verify;

pub use align::{align, align_by, align_exhaustive, same_shape, AlignEntry, AlignParams, Alignment};
pub use codegen::{merge_functions, merge_pair, MergeError, MergeOptions, MergeStats, MergedFunction, MIN_ALIGNED_FRACTION};
pub use linearize::{block_order, linearize};
pub use params::{merge_parameters, ParamMap, Side};
pub use verify::{verify_merge, verify_merge_with, Counterexample, Outcome, VerifyOptions, VerifyReport, VERIFY_FUEL};
