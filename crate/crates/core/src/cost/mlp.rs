use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::lasso::column_stats;
use super::{CostError, Dataset, FeatureVector};
use crate::ir::NUM_OPCODES;

const MIN_SAMPLES: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    /// Epochs at which the learning rate is multiplied by `decay`.
    pub decay_at: Vec<usize>,
    pub decay: f64,
    /// L2 penalty on weights.
    pub alpha: f64,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: vec![40; 6],
            epochs: 2000,
            batch: 32,
            lr: 1e-3,
            decay_at: vec![1000, 1500],
            decay: 0.5,
            alpha: 0.0,
            seed: 7,
        }
    }
}

/// Fully connected ReLU regressor. Inputs are `log1p` counts standardized
/// on the training split; the output is a standardized log-area.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub alpha: f64,
    pub x_mean: Vec<f64>,
    pub x_scale: Vec<f64>,
    pub y_mean: f64,
    pub y_scale: f64,
    /// `weights[l]` is `fan_in x fan_out`.
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

fn log_features(fv: &FeatureVector) -> FeatureVector {
    FeatureVector(fv.0.map(f64::ln_1p))
}

impl MlpModel {
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.weights[0].nrows()];
        s.extend(self.weights.iter().map(|w| w.ncols()));
        s
    }

    /// Maps a dataset into the model's input and target space.
    pub fn prepare(&self, d: &Dataset) -> (Array2<f64>, Array1<f64>) {
        let mut x = Array2::zeros((d.len(), NUM_OPCODES));
        for (i, fv) in d.x.iter().enumerate() {
            x.row_mut(i).assign(&self.input(fv));
        }
        let y = d.y.iter().map(|v| (v.ln() - self.y_mean) / self.y_scale).collect();
        (x, y)
    }

    fn input(&self, fv: &FeatureVector) -> Array1<f64> {
        let l = log_features(fv);
        (0..NUM_OPCODES).map(|j| (l.0[j] - self.x_mean[j]) / self.x_scale[j]).collect()
    }

    /// Pre-activations of every layer.
    fn forward(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let mut zs: Vec<Array2<f64>> = Vec::with_capacity(self.weights.len());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            let z = match zs.last() {
                None => x.dot(w) + b,
                Some(prev) => prev.mapv(|v| v.max(0.0)).dot(w) + b,
            };
            zs.push(z);
        }
        zs
    }

    pub fn predict_raw(&self, x: ArrayView2<f64>) -> Array1<f64> {
        self.forward(x).pop().unwrap().column(0).to_owned()
    }

    pub fn predict(&self, fv: &FeatureVector) -> f64 {
        let x = self.input(fv).insert_axis(Axis(0));
        let z = self.predict_raw(x.view())[0];
        (z * self.y_scale + self.y_mean).exp()
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Weights then biases, layer by layer.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.num_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            p.extend(w.iter());
            p.extend(b.iter());
        }
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let mut it = p.iter().copied();
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            w.iter_mut().for_each(|v| *v = it.next().unwrap());
            b.iter_mut().for_each(|v| *v = it.next().unwrap());
        }
    }

    /// `1/(2n) |f(x) - y|^2 + alpha/(2n) |W|^2` and its gradient in
    /// [`params`](Self::params) order.
    pub fn loss_and_gradient(&self, x: ArrayView2<f64>, y: &Array1<f64>) -> (f64, Vec<f64>) {
        let (gw, gb, loss) = self.backprop(x, y);
        let mut g = Vec::with_capacity(self.num_params());
        for (w, b) in gw.iter().zip(&gb) {
            g.extend(w.iter());
            g.extend(b.iter());
        }
        (loss, g)
    }

    fn backprop(&self, x: ArrayView2<f64>, y: &Array1<f64>) -> (Vec<Array2<f64>>, Vec<Array1<f64>>, f64) {
        let n = x.nrows() as f64;
        let zs = self.forward(x);
        let out = zs.last().unwrap().column(0);
        let err = &out - y;
        let mut loss = err.mapv(|e| e * e).sum() / (2.0 * n);
        if self.alpha != 0.0 {
            loss += self.alpha / (2.0 * n) * self.weights.iter().map(|w| w.mapv(|v| v * v).sum()).sum::<f64>();
        }
        let layers = self.weights.len();
        let mut gw: Vec<Array2<f64>> = vec![Array2::zeros((0, 0)); layers];
        let mut gb: Vec<Array1<f64>> = vec![Array1::zeros(0); layers];
        let mut delta = (err / n).insert_axis(Axis(1));
        for l in (0..layers).rev() {
            let a_prev = if l == 0 { x.to_owned() } else { zs[l - 1].mapv(|v| v.max(0.0)) };
            let mut g = a_prev.t().dot(&delta);
            if self.alpha != 0.0 {
                g.scaled_add(self.alpha / n, &self.weights[l]);
            }
            gw[l] = g;
            gb[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut d = delta.dot(&self.weights[l].t());
                d.zip_mut_with(&zs[l - 1], |dv, z| {
                    if *z <= 0.0 {
                        *dv = 0.0
                    }
                });
                delta = d;
            }
        }
        (gw, gb, loss)
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn step(&mut self, p: &mut [f64], g: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for i in 0..p.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * g[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * g[i] * g[i];
            p[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

/// He-initialised network with data-derived normalisation but no training.
pub(crate) fn init_mlp(d: &Dataset, cfg: &MlpConfig, rng: &mut ChaCha8Rng) -> MlpModel {
    let logx: Vec<FeatureVector> = d.x.iter().map(log_features).collect();
    let (x_mean, x_scale) = column_stats(&logx);
    let ly: Vec<f64> = d.y.iter().map(|v| v.ln()).collect();
    let nf = ly.len() as f64;
    let y_mean = ly.iter().sum::<f64>() / nf;
    let var = ly.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / nf;
    let y_scale = if var > 0.0 { var.sqrt() } else { 1.0 };
    let mut sizes = vec![NUM_OPCODES];
    sizes.extend(&cfg.hidden);
    sizes.push(1);
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for k in 0..sizes.len() - 1 {
        let normal = Normal::new(0.0, (2.0 / sizes[k] as f64).sqrt()).unwrap();
        weights.push(Array2::from_shape_fn((sizes[k], sizes[k + 1]), |_| normal.sample(rng)));
        biases.push(Array1::zeros(sizes[k + 1]));
    }
    MlpModel { alpha: cfg.alpha, x_mean, x_scale, y_mean, y_scale, weights, biases }
}

/// Mini-batch Adam on squared error in log-area space.
pub fn train_mlp(d: &Dataset, cfg: &MlpConfig) -> Result<MlpModel, CostError> {
    if d.len() < MIN_SAMPLES {
        return Err(CostError::TooFewSamples { need: MIN_SAMPLES, got: d.len() });
    }
    if d.y.iter().all(|y| *y == d.y[0]) {
        return Err(CostError::DegenerateTargets);
    }
    if d.y.iter().any(|y| !(*y > 0.0)) {
        return Err(CostError::NonPositiveTarget);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = init_mlp(d, cfg, &mut rng);
    let (x, y) = model.prepare(d);
    let mut p = model.params();
    let mut opt = Adam { m: vec![0.0; p.len()], v: vec![0.0; p.len()], t: 0 };
    let mut order: Vec<usize> = (0..d.len()).collect();
    let mut lr = cfg.lr;
    let batch = cfg.batch.max(1);
    for epoch in 0..cfg.epochs {
        if cfg.decay_at.contains(&epoch) {
            lr *= cfg.decay;
        }
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let xb = x.select(Axis(0), chunk);
            let yb: Array1<f64> = chunk.iter().map(|&i| y[i]).collect();
            let (_, g) = model.loss_and_gradient(xb.view(), &yb);
            opt.step(&mut p, &g, lr);
            model.set_params(&p);
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn gradient_matches_finite_differences() {
        let d = crate::cost::synthetic_dataset(40, 2);
        let cfg = MlpConfig { alpha: 0.01, ..MlpConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut m = init_mlp(&d, &cfg, &mut rng);
        let (x, y) = m.prepare(&d);
        let (_, g) = m.loss_and_gradient(x.view(), &y);
        let p0 = m.params();
        let h = 1e-5;
        let mut checked = 0;
        while checked < 50 {
            let k = rng.gen_range(0..p0.len());
            let mut p = p0.clone();
            p[k] += h;
            m.set_params(&p);
            let up = m.loss_and_gradient(x.view(), &y).0;
            p[k] -= 2.0 * h;
            m.set_params(&p);
            let down = m.loss_and_gradient(x.view(), &y).0;
            let num = (up - down) / (2.0 * h);
            let scale = g[k].abs().max(num.abs());
            if scale < 1e-7 {
                continue;
            }
            assert!((g[k] - num).abs() / scale < 1e-4, "param {k}: analytic {} numeric {num}", g[k]);
            checked += 1;
        }
        m.set_params(&p0);
    }

    #[test]
    fn training_is_deterministic() {
        let d = crate::cost::synthetic_dataset(60, 3);
        let cfg = MlpConfig { epochs: 30, ..MlpConfig::default() };
        let a = train_mlp(&d, &cfg).unwrap();
        let b = train_mlp(&d, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.sizes(), vec![NUM_OPCODES, 40, 40, 40, 40, 40, 40, 1]);
    }
}
