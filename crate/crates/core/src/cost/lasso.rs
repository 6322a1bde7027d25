use serde::{Deserialize, Serialize};

use super::{CostError, Dataset, FeatureVector};
use crate::ir::NUM_OPCODES;

const MIN_SAMPLES: usize = 20;
const TOL: f64 = 1e-9;
const MAX_SWEEPS: usize = 200_000;

/// Linear model with an L1 penalty, fitted on standardized features and
/// targets. `coef` lives in the standardized space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoModel {
    pub alpha: f64,
    pub x_mean: Vec<f64>,
    pub x_scale: Vec<f64>,
    pub y_mean: f64,
    pub y_scale: f64,
    pub coef: Vec<f64>,
}

pub(crate) fn column_stats(x: &[FeatureVector]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len() as f64;
    let mut mean = vec![0.0; NUM_OPCODES];
    let mut scale = vec![0.0; NUM_OPCODES];
    for j in 0..NUM_OPCODES {
        mean[j] = x.iter().map(|v| v.0[j]).sum::<f64>() / n;
        let var = x.iter().map(|v| (v.0[j] - mean[j]).powi(2)).sum::<f64>() / n;
        scale[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
    }
    (mean, scale)
}

fn soft(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

impl LassoModel {
    /// Intercept in LUTs for raw features.
    pub fn intercept(&self) -> f64 {
        self.y_mean - self.y_scale * (0..NUM_OPCODES).map(|j| self.coef[j] * self.x_mean[j] / self.x_scale[j]).sum::<f64>()
    }

    /// Per-opcode LUT weights for raw features.
    pub fn raw_weights(&self) -> Vec<f64> {
        (0..NUM_OPCODES).map(|j| self.y_scale * self.coef[j] / self.x_scale[j]).collect()
    }

    pub fn predict(&self, fv: &FeatureVector) -> f64 {
        let z: f64 = (0..NUM_OPCODES).map(|j| self.coef[j] * (fv.0[j] - self.x_mean[j]) / self.x_scale[j]).sum();
        self.y_mean + self.y_scale * z
    }
}

fn check(d: &Dataset) -> Result<(), CostError> {
    if d.len() < MIN_SAMPLES {
        return Err(CostError::TooFewSamples { need: MIN_SAMPLES, got: d.len() });
    }
    if d.y.iter().all(|y| *y == d.y[0]) {
        return Err(CostError::DegenerateTargets);
    }
    Ok(())
}

/// Weighted coordinate descent on
/// `1/(2W) sum w_i (y_i - x_i.b - c)^2 + alpha |b|_1` with `w_i = 1/y_i^2`,
/// i.e. squared relative error, until a full sweep lowers the objective by
/// less than 1e-8. Means and scales are weighted the same way.
pub fn train_lasso(d: &Dataset, alpha: f64) -> Result<LassoModel, CostError> {
    check(d)?;
    if d.y.iter().any(|y| !(*y > 0.0)) {
        return Err(CostError::NonPositiveTarget);
    }
    let wt: Vec<f64> = d.y.iter().map(|y| 1.0 / (y * y)).collect();
    let total: f64 = wt.iter().sum();
    let wt: Vec<f64> = wt.iter().map(|w| w / total).collect();
    let wmean = |v: &mut dyn Iterator<Item = f64>| v.zip(&wt).map(|(a, w)| a * w).sum::<f64>();
    let mut x_mean = vec![0.0; NUM_OPCODES];
    let mut x_scale = vec![1.0; NUM_OPCODES];
    for j in 0..NUM_OPCODES {
        x_mean[j] = wmean(&mut d.x.iter().map(|v| v.0[j]));
        let var = wmean(&mut d.x.iter().map(|v| (v.0[j] - x_mean[j]).powi(2)));
        if var > 0.0 {
            x_scale[j] = var.sqrt();
        }
    }
    let y_mean = wmean(&mut d.y.iter().copied());
    let y_scale = wmean(&mut d.y.iter().map(|y| (y - y_mean).powi(2))).sqrt();
    let cols: Vec<Vec<f64>> =
        (0..NUM_OPCODES).map(|j| d.x.iter().map(|v| (v.0[j] - x_mean[j]) / x_scale[j]).collect()).collect();
    let sq: Vec<f64> = cols.iter().map(|c| c.iter().zip(&wt).map(|(v, w)| w * v * v).sum::<f64>()).collect();
    let mut r: Vec<f64> = d.y.iter().map(|y| (y - y_mean) / y_scale).collect();
    let mut b = vec![0.0; NUM_OPCODES];
    for _ in 0..MAX_SWEEPS {
        let mut moved = 0.0f64;
        for j in 0..NUM_OPCODES {
            if sq[j] < 1e-300 {
                continue;
            }
            let c = &cols[j];
            let rho = c.iter().zip(&r).zip(&wt).map(|((a, ri), w)| w * a * ri).sum::<f64>() + sq[j] * b[j];
            let new = soft(rho, alpha) / sq[j];
            let delta = new - b[j];
            if delta != 0.0 {
                for (ri, ci) in r.iter_mut().zip(c) {
                    *ri -= ci * delta;
                }
                b[j] = new;
                moved = moved.max(delta.abs() * sq[j].sqrt());
            }
        }
        if moved < TOL {
            break;
        }
    }
    Ok(LassoModel { alpha, x_mean, x_scale, y_mean, y_scale, coef: b })
}

pub const DEFAULT_ALPHAS: [f64; 7] = [1e-5, 1e-4, 1e-3, 1e-2, 3e-2, 1e-1, 3e-1];

/// Picks alpha by k-fold cross-validated relative error, then refits on
/// the full set.
pub fn train_lasso_cv(d: &Dataset, alphas: &[f64], folds: usize) -> Result<LassoModel, CostError> {
    check(d)?;
    let n = d.len();
    let folds = folds.clamp(2, n);
    let mut best: Option<(f64, f64)> = None;
    for &alpha in alphas {
        let mut err = 0.0;
        for k in 0..folds {
            let test: Vec<usize> = (0..n).filter(|i| i % folds == k).collect();
            let train = d.subset((0..n).filter(|i| i % folds != k));
            let m = match train_lasso(&train, alpha) {
                Ok(m) => m,
                Err(_) => continue,
            };
            err += test.iter().map(|&i| ((m.predict(&d.x[i]) - d.y[i]) / d.y[i]).abs()).sum::<f64>();
        }
        if best.map_or(true, |(_, e)| err < e) {
            best = Some((alpha, err));
        }
    }
    let alpha = best.map_or(alphas.first().copied().unwrap_or(1e-3), |b| b.0);
    train_lasso(d, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::metrics::mre;
    use crate::ir::Opcode;

    #[test]
    fn recovers_linear_data() {
        let base = crate::cost::synthetic_dataset(120, 5);
        let mut d = Dataset::default();
        for (i, x) in base.x.iter().enumerate() {
            let y = 100.0 + 3.0 * x[Opcode::Add] + 250.0 * x[Opcode::Mul] + 7.0 * x[Opcode::Load];
            d.push(format!("r{i}"), *x, y);
        }
        let m = train_lasso(&d, 1e-9).unwrap();
        let f: Vec<f64> = d.x.iter().map(|x| m.predict(x)).collect();
        assert!(mre(&d.y, &f).unwrap() < 1e-3);
        assert!((m.raw_weights()[Opcode::Mul.index()] - 250.0).abs() < 0.5);
        assert!((m.intercept() - 100.0).abs() < 1.0);
    }

    #[test]
    fn rejects_degenerate_sets() {
        let mut d = crate::cost::synthetic_dataset(30, 1);
        assert!(train_lasso(&d.subset(0..10), 0.1).is_err());
        d.y.iter_mut().for_each(|y| *y = 5.0);
        assert_eq!(train_lasso(&d, 0.1), Err(CostError::DegenerateTargets));
    }
}
