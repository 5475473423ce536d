use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};

use super::data::Dataset;
use crate::distance::WeightVector;
use crate::error::{Error, Result};

/// Desk-scale models with flat parameter vectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Model {
    /// Multinomial logistic regression: `classes × dim` weights, then one
    /// bias per class.
    Logistic { dim: usize, classes: usize },
    /// One ReLU hidden layer: `W1 (hidden × dim)`, `b1`, `W2 (classes ×
    /// hidden)`, `b2`.
    Mlp { dim: usize, hidden: usize, classes: usize },
    /// Least squares: `dim` weights and a bias.
    Linear { dim: usize },
}

/// Local optimisation settings.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SgdConfig {
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig { lr: 0.1, batch: 32, epochs: 1 }
    }
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = libm::exp(*v - max);
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Model {
    pub fn param_count(&self) -> usize {
        match *self {
            Model::Logistic { dim, classes } => classes * (dim + 1),
            Model::Mlp { dim, hidden, classes } => hidden * (dim + 1) + classes * (hidden + 1),
            Model::Linear { dim } => dim + 1,
        }
    }

    pub fn input_dim(&self) -> usize {
        match *self {
            Model::Logistic { dim, .. } | Model::Mlp { dim, .. } | Model::Linear { dim } => dim,
        }
    }

    /// Output classes; zero for regression.
    pub fn classes(&self) -> usize {
        match *self {
            Model::Logistic { classes, .. } | Model::Mlp { classes, .. } => classes,
            Model::Linear { .. } => 0,
        }
    }

    /// Zero weights for the convex models, scaled uniform for the MLP.
    pub fn init<R: RngCore>(&self, rng: &mut R) -> WeightVector {
        let mut w = vec![0.0; self.param_count()];
        if let Model::Mlp { dim, hidden, classes } = *self {
            let a1 = libm::sqrt(6.0 / (dim + hidden) as f64);
            let a2 = libm::sqrt(6.0 / (hidden + classes) as f64);
            for v in &mut w[..hidden * dim] {
                *v = rng.random_range(-a1..a1);
            }
            let off = hidden * (dim + 1);
            for v in &mut w[off..off + classes * hidden] {
                *v = rng.random_range(-a2..a2);
            }
        }
        WeightVector::new(w).expect("finite initial weights")
    }

    fn check(&self, data: &Dataset) -> Result<()> {
        if data.dim() != self.input_dim() || data.classes() != self.classes() {
            return Err(Error::Shape("dataset does not fit the model"));
        }
        Ok(())
    }

    /// Class scores (logits) or the regression output in `out[0]`.
    fn forward(&self, w: &[f64], x: &[f64], hidden_out: &mut Vec<f64>, out: &mut Vec<f64>) {
        out.clear();
        match *self {
            Model::Logistic { dim, classes } => {
                let bias = &w[classes * dim..];
                out.extend((0..classes).map(|k| dot(&w[k * dim..(k + 1) * dim], x) + bias[k]));
            }
            Model::Mlp { dim, hidden, classes } => {
                let b1 = &w[hidden * dim..hidden * (dim + 1)];
                hidden_out.clear();
                hidden_out.extend((0..hidden).map(|j| (dot(&w[j * dim..(j + 1) * dim], x) + b1[j]).max(0.0)));
                let off = hidden * (dim + 1);
                let w2 = &w[off..off + classes * hidden];
                let b2 = &w[off + classes * hidden..];
                out.extend((0..classes).map(|k| dot(&w2[k * hidden..(k + 1) * hidden], hidden_out) + b2[k]));
            }
            Model::Linear { dim } => out.push(dot(&w[..dim], x) + w[dim]),
        }
    }

    /// Mean loss over `batch` and its gradient, written into `grad`.
    pub fn loss_and_gradient(&self, w: &[f64], data: &Dataset, batch: &[usize], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let (mut h, mut z) = (Vec::new(), Vec::new());
        let mut loss = 0.0;
        let scale = 1.0 / batch.len() as f64;
        for &i in batch {
            let x = data.row(i);
            self.forward(w, x, &mut h, &mut z);
            match *self {
                Model::Linear { dim } => {
                    let r = z[0] - data.target(i);
                    loss += 0.5 * r * r;
                    for (g, &xj) in grad[..dim].iter_mut().zip(x) {
                        *g += scale * r * xj;
                    }
                    grad[dim] += scale * r;
                }
                Model::Logistic { dim, classes } => {
                    let y = data.label(i);
                    softmax_in_place(&mut z);
                    loss -= libm::log(z[y].max(1e-300));
                    z[y] -= 1.0;
                    for k in 0..classes {
                        let d = scale * z[k];
                        for (g, &xj) in grad[k * dim..(k + 1) * dim].iter_mut().zip(x) {
                            *g += d * xj;
                        }
                        grad[classes * dim + k] += d;
                    }
                }
                Model::Mlp { dim, hidden, classes } => {
                    let y = data.label(i);
                    softmax_in_place(&mut z);
                    loss -= libm::log(z[y].max(1e-300));
                    z[y] -= 1.0;
                    let off = hidden * (dim + 1);
                    let w2 = &w[off..off + classes * hidden];
                    for k in 0..classes {
                        let d = scale * z[k];
                        for (g, &hj) in grad[off + k * hidden..off + (k + 1) * hidden].iter_mut().zip(&h) {
                            *g += d * hj;
                        }
                        grad[off + classes * hidden + k] += d;
                    }
                    for j in 0..hidden {
                        if h[j] <= 0.0 {
                            continue;
                        }
                        let back: f64 = (0..classes).map(|k| z[k] * w2[k * hidden + j]).sum::<f64>() * scale;
                        for (g, &xj) in grad[j * dim..(j + 1) * dim].iter_mut().zip(x) {
                            *g += back * xj;
                        }
                        grad[hidden * dim + j] += back;
                    }
                }
            }
        }
        loss * scale
    }

    /// Predicted class, or the rounded regression output.
    pub fn predict(&self, w: &[f64], x: &[f64]) -> f64 {
        let (mut h, mut z) = (Vec::new(), Vec::new());
        self.forward(w, x, &mut h, &mut z);
        match self {
            Model::Linear { .. } => z[0],
            _ => {
                let mut best = 0;
                for k in 1..z.len() {
                    if z[k] > z[best] {
                        best = k;
                    }
                }
                best as f64
            }
        }
    }

    /// Classification accuracy, or the negated mean squared error for
    /// regression.
    pub fn evaluate(&self, w: &WeightVector, data: &Dataset) -> Result<f64> {
        self.check(data)?;
        if data.is_empty() {
            return Err(Error::EmptyData);
        }
        let w = w.as_slice();
        let n = data.len() as f64;
        Ok(match self {
            Model::Linear { .. } => {
                let sq = |i: usize| {
                    let r = self.predict(w, data.row(i)) - data.target(i);
                    r * r
                };
                -(0..data.len()).map(sq).sum::<f64>() / n
            }
            _ => (0..data.len()).filter(|&i| self.predict(w, data.row(i)) as usize == data.label(i)).count() as f64 / n,
        })
    }

    /// Mini-batch SGD from `start` for `cfg.epochs` passes over `data`,
    /// reshuffling each epoch.
    pub fn train<R: RngCore>(&self, start: &WeightVector, data: &Dataset, cfg: &SgdConfig, rng: &mut R) -> Result<WeightVector> {
        if data.is_empty() {
            return Err(Error::EmptyData);
        }
        self.check(data)?;
        if start.len() != self.param_count() {
            return Err(Error::Shape("weights do not fit the model"));
        }
        if cfg.batch == 0 || !(cfg.lr >= 0.0) {
            return Err(Error::Parameter("batch size and learning rate must be positive"));
        }
        let mut w = start.as_slice().to_vec();
        let mut grad = vec![0.0; w.len()];
        let mut order: Vec<usize> = (0..data.len()).collect();
        for _ in 0..cfg.epochs {
            order.shuffle(rng);
            for batch in order.chunks(cfg.batch) {
                self.loss_and_gradient(&w, data, batch, &mut grad);
                for (wi, gi) in w.iter_mut().zip(&grad) {
                    *wi -= cfg.lr * gi;
                }
            }
        }
        WeightVector::new(w).map_err(|_| Error::NonFinite)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn numeric_gradient(m: &Model, w: &[f64], d: &Dataset, batch: &[usize]) -> Vec<f64> {
        let mut scratch = vec![0.0; w.len()];
        (0..w.len())
            .map(|j| {
                let h = 1e-6;
                let mut wp = w.to_vec();
                wp[j] += h;
                let up = m.loss_and_gradient(&wp, d, batch, &mut scratch);
                wp[j] -= 2.0 * h;
                let down = m.loss_and_gradient(&wp, d, batch, &mut scratch);
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    fn random_data(rng: &mut ChaCha8Rng, n: usize, dim: usize, classes: usize) -> Dataset {
        let x = (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = (0..n)
            .map(|_| if classes == 0 { rng.random_range(-1.0..1.0) } else { rng.random_range(0..classes) as f64 })
            .collect();
        Dataset::new(dim, classes, x, y).unwrap()
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(Model::Logistic { dim: 6199, classes: 10 }.param_count(), 62_000);
        assert_eq!(Model::Mlp { dim: 4, hidden: 3, classes: 2 }.param_count(), 15 + 8);
        assert_eq!(Model::Linear { dim: 3 }.param_count(), 4);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for m in [
            Model::Logistic { dim: 4, classes: 3 },
            Model::Mlp { dim: 4, hidden: 5, classes: 3 },
            Model::Linear { dim: 4 },
        ] {
            let d = random_data(&mut rng, 6, 4, m.classes());
            let w: Vec<f64> = (0..m.param_count()).map(|_| rng.random_range(-0.5..0.5)).collect();
            let batch = [0, 2, 3, 5];
            let mut g = vec![0.0; w.len()];
            m.loss_and_gradient(&w, &d, &batch, &mut g);
            let num = numeric_gradient(&m, &w, &d, &batch);
            for (a, b) in g.iter().zip(&num) {
                assert!((a - b).abs() < 1e-6, "{m:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn single_sample_linear_step() {
        let m = Model::Linear { dim: 2 };
        let d = Dataset::new(2, 0, vec![1.0, 2.0], vec![3.0]).unwrap();
        let w0 = WeightVector::new(vec![0.5, -1.0, 0.25]).unwrap();
        let cfg = SgdConfig { lr: 0.1, batch: 1, epochs: 1 };
        let w = m.train(&w0, &d, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        // residual 0.5 - 2 + 0.25 - 3 = -4.25
        let r = -4.25;
        let want = [0.5 - 0.1 * r, -1.0 - 0.1 * r * 2.0, 0.25 - 0.1 * r];
        for (a, b) in w.as_slice().iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_rate_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = Model::Mlp { dim: 3, hidden: 4, classes: 2 };
        let d = random_data(&mut rng, 50, 3, 2);
        let w0 = m.init(&mut rng);
        let frozen = SgdConfig { lr: 0.0, ..SgdConfig::default() };
        assert_eq!(m.train(&w0, &d, &frozen, &mut rng).unwrap(), w0);
        let cfg = SgdConfig { epochs: 3, ..SgdConfig::default() };
        let a = m.train(&w0, &d, &cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = m.train(&w0, &d, &cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, w0);
    }

    #[test]
    fn empty_data_rejected() {
        let m = Model::Linear { dim: 1 };
        let d = Dataset::new(1, 0, vec![], vec![]).unwrap();
        let w = m.init(&mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(m.train(&w, &d, &SgdConfig::default(), &mut ChaCha8Rng::seed_from_u64(0)), Err(Error::EmptyData));
    }
}
