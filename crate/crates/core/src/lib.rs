pub mod analysis;
pub mod corpus;
pub mod cost;
pub mod dse;
pub mod ir;
pub mod merge;
pub mod partition;
