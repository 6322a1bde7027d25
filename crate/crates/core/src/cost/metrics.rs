use super::{CostError, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalReport {
    pub r2_train: f64,
    pub r2_test: f64,
    pub mre_train: f64,
    pub mre_test: f64,
}

/// Coefficient of determination, `1 - SS_res / SS_tot`.
pub fn r2(y: &[f64], f: &[f64]) -> f64 {
    assert_eq!(y.len(), f.len());
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_res: f64 = y.iter().zip(f).map(|(a, b)| (a - b).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|a| (a - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return if ss_res == 0.0 { 1.0 } else { f64::NEG_INFINITY };
    }
    1.0 - ss_res / ss_tot
}

/// Mean of `|y - f| / |y|`; rows with `y == 0` are dropped.
pub fn mre(y: &[f64], f: &[f64]) -> Result<f64, CostError> {
    assert_eq!(y.len(), f.len());
    let mut sum = 0.0;
    let mut n = 0usize;
    for (a, b) in y.iter().zip(f) {
        if *a == 0.0 {
            continue;
        }
        sum += (a - b).abs() / a.abs();
        n += 1;
    }
    if n < y.len() {
        log::warn!("dropped {} zero target(s) from relative error", y.len() - n);
    }
    if n == 0 {
        return Err(CostError::EmptyEvaluation);
    }
    Ok(sum / n as f64)
}

pub fn evaluate_model(
    predict: impl Fn(&super::FeatureVector) -> f64,
    train: &Dataset,
    test: &Dataset,
) -> Result<EvalReport, CostError> {
    let score = |d: &Dataset| -> Result<(f64, f64), CostError> {
        if d.is_empty() {
            return Err(CostError::EmptyEvaluation);
        }
        let f: Vec<f64> = d.x.iter().map(&predict).collect();
        Ok((r2(&d.y, &f), mre(&d.y, &f)?))
    };
    let (r2_train, mre_train) = score(train)?;
    let (r2_test, mre_test) = score(test)?;
    Ok(EvalReport { r2_train, r2_test, mre_train, mre_test })
}
