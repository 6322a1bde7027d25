use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate_model, synthetic_dataset, train_lasso_cv, train_mlp, AreaModel, CostError, Dataset, EvalReport};
use super::{MlpConfig, DEFAULT_ALPHAS};

/// Fraction of each dataset used for training.
pub const TRAIN_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    Lasso,
    Mlp,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Lasso => "lasso",
            ModelKind::Mlp => "mlp",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "lasso" => Ok(ModelKind::Lasso),
            "mlp" => Ok(ModelKind::Mlp),
            _ => Err(format!("unknown model kind `{s}` (lasso, mlp)")),
        }
    }
}

/// LASSO with alpha picked by 5-fold CV, or the default MLP seeded with `seed`.
pub fn train_area_model(kind: ModelKind, d: &Dataset, seed: u64) -> Result<AreaModel, CostError> {
    Ok(match kind {
        ModelKind::Lasso => AreaModel::Lasso(train_lasso_cv(d, &DEFAULT_ALPHAS, 5)?),
        ModelKind::Mlp => AreaModel::Mlp(train_mlp(d, &MlpConfig { seed, ..Default::default() })?),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub kind: ModelKind,
    /// Nominal dataset size; the model trains on the first 80% of it.
    pub samples: usize,
    pub report: EvalReport,
}

/// Both model kinds at `n` and `n / 3` samples. Every model is scored on
/// the same held-out rows: the last 20% of the `n`-sample set.
pub fn model_selection(n: usize, seed: u64) -> Result<Vec<SelectionRow>, CostError> {
    let full = synthetic_dataset(n, seed);
    let (train, test) = full.split(TRAIN_FRACTION);
    let small = n / 3;
    let small_train = train.subset(0..((small as f64 * TRAIN_FRACTION).round() as usize).min(train.len()));
    let jobs = [
        (ModelKind::Lasso, small, &small_train),
        (ModelKind::Lasso, n, &train),
        (ModelKind::Mlp, small, &small_train),
        (ModelKind::Mlp, n, &train),
    ];
    jobs.par_iter()
        .map(|&(kind, samples, tr)| {
            let model = train_area_model(kind, tr, seed)?;
            let report = evaluate_model(|x| model.predict(x), tr, &test)?;
            Ok(SelectionRow { kind, samples, report })
        })
        .collect()
}
