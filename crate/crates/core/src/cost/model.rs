//! Trained area models and their text format.
//!
//! ```text
//! area-model v1
//! kind mlp
//! alpha 0.0
//! sizes 30 40 40 40 40 40 40 1
//! x_mean ...
//! x_scale ...
//! y_mean 6.1
//! y_scale 1.2
//! w0 ...          ; row-major fan_in x fan_out
//! b0 ...
//! ```
//!
//! LASSO files carry `coef` instead of `sizes` and the layer lines.

use std::fmt::Write;

use ndarray::{Array1, Array2};

use super::{FeatureVector, LassoModel, MlpModel};
use crate::ir::NUM_OPCODES;

/// The default MLP shipped with the crate, trained on 600 oracle samples.
pub const BUNDLED_MODEL: &str = include_str!("../../models/area_mlp.txt");

const MAGIC: &str = "area-model v1";

#[derive(Debug, Clone, PartialEq)]
pub enum AreaModel {
    Lasso(LassoModel),
    Mlp(MlpModel),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("not an area model file (expected `{MAGIC}` on the first line)")]
    Magic,
    #[error("missing `{0}` line")]
    Missing(String),
    #[error("`{key}`: {message}")]
    Bad { key: String, message: String },
    #[error("unknown model kind `{0}`")]
    Kind(String),
}

fn nums(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_owned).collect()
}

fn fmt_list(out: &mut String, key: &str, vals: impl IntoIterator<Item = f64>) {
    out.push_str(key);
    for v in vals {
        let _ = write!(out, " {v:?}");
    }
    out.push('\n');
}

struct Fields(Vec<(String, String)>);

impl Fields {
    fn get(&self, key: &str) -> Result<&str, ModelError> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str()).ok_or_else(|| ModelError::Missing(key.into()))
    }

    fn floats(&self, key: &str, len: Option<usize>) -> Result<Vec<f64>, ModelError> {
        let bad = |message: String| ModelError::Bad { key: key.into(), message };
        let v = nums(self.get(key)?)
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| bad(format!("`{s}` is not a number"))))
            .collect::<Result<Vec<f64>, _>>()?;
        if let Some(n) = len {
            if v.len() != n {
                return Err(bad(format!("expected {n} values, found {}", v.len())));
            }
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(bad("non-finite value".into()));
        }
        Ok(v)
    }

    fn float(&self, key: &str) -> Result<f64, ModelError> {
        Ok(self.floats(key, Some(1))?[0])
    }
}

impl AreaModel {
    pub fn bundled() -> AreaModel {
        AreaModel::from_text(BUNDLED_MODEL).expect("bundled model parses")
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AreaModel::Lasso(_) => "lasso",
            AreaModel::Mlp(_) => "mlp",
        }
    }

    /// Predicted LUTs, never negative.
    pub fn predict(&self, fv: &FeatureVector) -> f64 {
        let v = match self {
            AreaModel::Lasso(m) => m.predict(fv),
            AreaModel::Mlp(m) => m.predict(fv),
        };
        v.max(0.0)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{MAGIC}\nkind {}\n", self.kind());
        match self {
            AreaModel::Lasso(m) => {
                let _ = writeln!(out, "alpha {:?}", m.alpha);
                fmt_list(&mut out, "x_mean", m.x_mean.iter().copied());
                fmt_list(&mut out, "x_scale", m.x_scale.iter().copied());
                let _ = writeln!(out, "y_mean {:?}\ny_scale {:?}", m.y_mean, m.y_scale);
                fmt_list(&mut out, "coef", m.coef.iter().copied());
            }
            AreaModel::Mlp(m) => {
                let _ = writeln!(out, "alpha {:?}", m.alpha);
                let sizes: Vec<String> = m.sizes().iter().map(|s| s.to_string()).collect();
                let _ = writeln!(out, "sizes {}", sizes.join(" "));
                fmt_list(&mut out, "x_mean", m.x_mean.iter().copied());
                fmt_list(&mut out, "x_scale", m.x_scale.iter().copied());
                let _ = writeln!(out, "y_mean {:?}\ny_scale {:?}", m.y_mean, m.y_scale);
                for (l, (w, b)) in m.weights.iter().zip(&m.biases).enumerate() {
                    fmt_list(&mut out, &format!("w{l}"), w.iter().copied());
                    fmt_list(&mut out, &format!("b{l}"), b.iter().copied());
                }
            }
        }
        out
    }

    pub fn from_text(src: &str) -> Result<AreaModel, ModelError> {
        let mut lines = src.lines().map(|l| l.split(';').next().unwrap_or("").trim()).filter(|l| !l.is_empty());
        if lines.next() != Some(MAGIC) {
            return Err(ModelError::Magic);
        }
        let f = Fields(
            lines
                .map(|l| match l.split_once(char::is_whitespace) {
                    Some((k, v)) => (k.to_owned(), v.trim().to_owned()),
                    None => (l.to_owned(), String::new()),
                })
                .collect(),
        );
        let x_mean = f.floats("x_mean", Some(NUM_OPCODES))?;
        let x_scale = f.floats("x_scale", Some(NUM_OPCODES))?;
        let (y_mean, y_scale, alpha) = (f.float("y_mean")?, f.float("y_scale")?, f.float("alpha")?);
        match f.get("kind")? {
            "lasso" => {
                let coef = f.floats("coef", Some(NUM_OPCODES))?;
                Ok(AreaModel::Lasso(LassoModel { alpha, x_mean, x_scale, y_mean, y_scale, coef }))
            }
            "mlp" => {
                let sizes = nums(f.get("sizes")?)
                    .iter()
                    .map(|s| s.parse::<usize>())
                    .collect::<Result<Vec<usize>, _>>()
                    .map_err(|_| ModelError::Bad { key: "sizes".into(), message: "not a list of integers".into() })?;
                if sizes.len() < 2 || sizes[0] != NUM_OPCODES || *sizes.last().unwrap() != 1 || sizes.contains(&0) {
                    return Err(ModelError::Bad {
                        key: "sizes".into(),
                        message: format!("must run from {NUM_OPCODES} inputs to 1 output"),
                    });
                }
                let mut weights = Vec::new();
                let mut biases = Vec::new();
                for l in 0..sizes.len() - 1 {
                    let w = f.floats(&format!("w{l}"), Some(sizes[l] * sizes[l + 1]))?;
                    weights.push(Array2::from_shape_vec((sizes[l], sizes[l + 1]), w).unwrap());
                    biases.push(Array1::from(f.floats(&format!("b{l}"), Some(sizes[l + 1]))?));
                }
                Ok(AreaModel::Mlp(MlpModel { alpha, x_mean, x_scale, y_mean, y_scale, weights, biases }))
            }
            other => Err(ModelError::Kind(other.into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{synthetic_dataset, train_lasso, train_mlp, MlpConfig};

    #[test]
    fn text_round_trip() {
        let d = synthetic_dataset(40, 4);
        let l = AreaModel::Lasso(train_lasso(&d, 0.01).unwrap());
        assert_eq!(AreaModel::from_text(&l.to_text()).unwrap(), l);
        let cfg = MlpConfig { epochs: 3, hidden: vec![5, 4], ..MlpConfig::default() };
        let m = AreaModel::Mlp(train_mlp(&d, &cfg).unwrap());
        let back = AreaModel::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.predict(&d.x[0]), m.predict(&d.x[0]));
        assert_eq!(AreaModel::from_text("nope"), Err(ModelError::Magic));
        let cut = m.to_text().replace("b1 ", "bx ");
        assert!(AreaModel::from_text(&cut).is_err());
    }

    #[test]
    fn bundled_model_loads() {
        let m = AreaModel::bundled();
        assert!(m.predict(&FeatureVector::default()) > 0.0);
    }
}
