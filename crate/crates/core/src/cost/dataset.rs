use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::features::FeatureVector;
use super::oracle::synthetic_hls_oracle;
use crate::ir::{Opcode, NUM_OPCODES};

/// Labelled training data: one row per (synthetic or real) function.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub names: Vec<String>,
    pub x: Vec<FeatureVector>,
    pub y: Vec<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("header must be name, the {NUM_OPCODES} opcode names, luts")]
    Header,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn push(&mut self, name: impl Into<String>, x: FeatureVector, y: f64) {
        self.names.push(name.into());
        self.x.push(x);
        self.y.push(y);
    }

    pub fn subset(&self, idx: impl IntoIterator<Item = usize>) -> Dataset {
        let mut d = Dataset::default();
        for i in idx {
            d.push(self.names[i].clone(), self.x[i], self.y[i]);
        }
        d
    }

    /// First `round(frac * n)` rows for training, the rest for testing.
    pub fn split(&self, frac: f64) -> (Dataset, Dataset) {
        let k = ((self.len() as f64) * frac).round() as usize;
        (self.subset(0..k), self.subset(k..self.len()))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), DatasetError> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["name".to_owned()];
        header.extend(Opcode::ALL.iter().map(|o| o.name().to_owned()));
        header.push("luts".into());
        out.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![self.names[i].clone()];
            rec.extend(self.x[i].0.iter().map(|v| format!("{v:?}")));
            rec.push(format!("{:?}", self.y[i]));
            out.write_record(&rec)?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Dataset, DatasetError> {
        let mut rd = csv::Reader::from_reader(r);
        let header = rd.headers()?.clone();
        let ok = header.len() == NUM_OPCODES + 2
            && &header[0] == "name"
            && &header[NUM_OPCODES + 1] == "luts"
            && Opcode::ALL.iter().enumerate().all(|(i, o)| &header[i + 1] == o.name());
        if !ok {
            return Err(DatasetError::Header);
        }
        let mut d = Dataset::default();
        for (row, rec) in rd.records().enumerate() {
            let rec = rec?;
            let num = |k: usize| -> Result<f64, DatasetError> {
                let v: f64 = rec[k].trim().parse().map_err(|_| DatasetError::Row {
                    row: row + 1,
                    message: format!("column {k}: `{}` is not a number", &rec[k]),
                })?;
                if !v.is_finite() || v < 0.0 {
                    return Err(DatasetError::Row { row: row + 1, message: format!("column {k}: {v} out of range") });
                }
                Ok(v)
            };
            let mut fv = FeatureVector::default();
            for k in 0..NUM_OPCODES {
                fv.0[k] = num(k + 1)?;
            }
            d.push(&rec[0], fv, num(NUM_OPCODES + 1)?);
        }
        Ok(d)
    }
}

/// Relative opcode frequencies of a few kernel styles: integer arithmetic,
/// memory streaming, floating point, and control-heavy code.
fn archetype(k: usize, op: Opcode) -> f64 {
    use Opcode::*;
    let row: [f64; 4] = match op {
        Add => [6.0, 3.0, 1.0, 3.0],
        Sub => [3.0, 1.0, 0.5, 1.0],
        Mul => [3.0, 1.0, 0.5, 0.5],
        SDiv | SRem => [0.8, 0.1, 0.1, 0.3],
        And | Or | Xor => [2.0, 0.5, 0.1, 1.0],
        Shl | AShr => [1.5, 0.5, 0.1, 0.5],
        FAdd | FSub => [0.0, 0.2, 4.0, 0.0],
        FMul => [0.0, 0.2, 4.0, 0.0],
        FDiv => [0.0, 0.0, 0.8, 0.0],
        ICmp => [1.0, 1.0, 0.5, 4.0],
        FCmp => [0.0, 0.0, 0.8, 0.0],
        Select => [0.5, 0.2, 0.3, 2.0],
        ZExt | Trunc => [1.0, 0.8, 0.1, 0.5],
        SIToFP | FPToSI => [0.0, 0.2, 0.8, 0.0],
        Load => [2.0, 6.0, 3.0, 1.5],
        Store => [1.0, 4.0, 1.5, 0.8],
        Gep => [1.0, 5.0, 3.0, 1.0],
        Const => [2.0, 1.0, 1.0, 2.0],
        Alloca | Call | Br | Jmp | Ret => [0.0; 4],
    };
    row[k]
}

const MIN_SIZE: f64 = 5.0;
const MAX_SIZE: f64 = 10_000.0;
/// Log-normal spread of each opcode around its archetype mix.
const JITTER: f64 = 0.1;

fn random_features(rng: &mut ChaCha8Rng) -> FeatureVector {
    use Opcode::*;
    let size = (rng.gen_range(MIN_SIZE.ln()..MAX_SIZE.ln())).exp();
    let mix: Vec<f64> = (0..4).map(|_| -rng.gen_range(1e-9f64..1.0).ln()).collect();
    let jitter = Normal::new(0.0f64, JITTER).unwrap();
    let mut w = [0.0; NUM_OPCODES];
    for op in Opcode::ALL {
        let base: f64 = (0..4).map(|k| mix[k] * archetype(k, op)).sum();
        w[op.index()] = base * jitter.sample(rng).exp();
    }
    let total: f64 = w.iter().sum();
    let mut fv = FeatureVector::default();
    for k in 0..NUM_OPCODES {
        fv.0[k] = (size * w[k] / total).round();
    }
    let control = mix[3] / mix.iter().sum::<f64>();
    let br = (size * (0.02 + 0.12 * control) * rng.gen_range(0.5..1.5)).round();
    fv.0[Br.index()] = br;
    fv.0[Jmp.index()] = br + (br * rng.gen_range(0.0..1.0)).round();
    fv.0[Ret.index()] = if rng.gen_bool(0.2) { 2.0 } else { 1.0 };
    if rng.gen_bool(0.3) {
        fv.0[Call.index()] = f64::from(rng.gen_range(1..=4));
    }
    if rng.gen_bool(0.1) {
        fv.0[Alloca.index()] = f64::from(rng.gen_range(1..=2));
    }
    fv
}

/// `n` random opcode mixes of log-uniform size, labelled by the oracle.
/// Row `i` depends only on `(seed, i)`, so prefixes of larger sets agree.
pub fn synthetic_dataset(n: usize, seed: u64) -> Dataset {
    let rows: Vec<(FeatureVector, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            let fv = random_features(&mut rng);
            (fv, synthetic_hls_oracle(&fv, seed))
        })
        .collect();
    let mut d = Dataset::default();
    for (i, (fv, y)) in rows.into_iter().enumerate() {
        d.push(format!("synth{i}"), fv, y);
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_and_determinism() {
        let d = synthetic_dataset(50, 11);
        assert_eq!(d, synthetic_dataset(50, 11));
        assert_ne!(d.y, synthetic_dataset(50, 12).y);
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert_eq!(Dataset::read_csv(buf.as_slice()).unwrap(), d);
        assert!(Dataset::read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}
