//! Accelerator cost modelling: features, area models, latency tables and
//! the profitability metric.

mod dataset;
mod estimate;
mod features;
mod lasso;
mod latency;
mod metrics;
mod mlp;
mod model;
mod oracle;
mod profit;
mod selection;

pub use dataset::{synthetic_dataset, Dataset, DatasetError};
pub use estimate::{estimate_costs, CostEstimate};
pub use features::{extract_features, hierarchical_features, own_features, FeatureVector};
pub use lasso::{train_lasso, train_lasso_cv, LassoModel, DEFAULT_ALPHAS};
pub use latency::{hw_latency, sw_latency, LatencyTable, Side as LatencySide, DEFAULT_CLOCK};
pub use metrics::{evaluate_model, mre, r2, EvalReport};
pub use mlp::{train_mlp, MlpConfig, MlpModel};
pub use model::{AreaModel, ModelError, BUNDLED_MODEL};
pub use oracle::{oracle_noise_free, synthetic_hls_oracle, ORACLE_FLOOR};
pub use profit::estimate_profitability;
pub use selection::{model_selection, train_area_model, ModelKind, SelectionRow, TRAIN_FRACTION};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CostError {
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("all targets are equal; nothing to learn")]
    DegenerateTargets,
    #[error("no samples left after dropping zero targets")]
    EmptyEvaluation,
    #[error("targets must be positive")]
    NonPositiveTarget,
    #[error("no latency for opcode `{0}`")]
    MissingLatency(String),
    #[error("total application time must be positive, got {0}")]
    NonPositiveTotal(f64),
}
