//! Single-hidden-layer perceptron regressor.
//!
//! Sigmoid hidden units, linear output, squared loss
//! `L = 1/(2n) Σ (ŷ − y)²` on z-scored inputs and target. Training is
//! full-batch: one gradient over the whole training set per epoch, applied
//! with Adam moment estimates. Scaling statistics are stored in the model
//! and inverted at prediction time.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::column_moments;
use crate::budget::Deadline;
use crate::dataset::Samples;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlpParams {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: 16,
            epochs: 500,
            learning_rate: 0.01,
        }
    }
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub params: MlpParams,
    pub n_inputs: usize,
    /// `hidden × n_inputs`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
    pub x_mean: Vec<f64>,
    pub x_scale: Vec<f64>,
    pub y_mean: f64,
    pub y_scale: f64,
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

impl MlpModel {
    pub fn n_features(&self) -> usize {
        self.n_inputs
    }

    fn hidden(&self) -> usize {
        self.b1.len()
    }

    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.x_mean.iter().zip(&self.x_scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    /// Network output in z-scored target units, plus hidden activations.
    fn forward(&self, z: &[f64], h: &mut [f64]) -> f64 {
        let p = self.n_inputs;
        let mut out = self.b2;
        for j in 0..self.hidden() {
            let row = &self.w1[j * p..(j + 1) * p];
            let a = self.b1[j] + row.iter().zip(z).map(|(w, v)| w * v).sum::<f64>();
            h[j] = sigmoid(a);
            out += self.w2[j] * h[j];
        }
        out
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        let z = self.standardize(x);
        let mut h = vec![0.0; self.hidden()];
        self.forward(&z, &mut h) * self.y_scale + self.y_mean
    }

    /// Parameters flattened as `w1, b1, w2, b2`.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.w1.len() + 2 * self.b1.len() + 1);
        v.extend_from_slice(&self.w1);
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(&self.w2);
        v.push(self.b2);
        v
    }

    pub fn set_flat_params(&mut self, v: &[f64]) -> Result<()> {
        let (nw1, h) = (self.w1.len(), self.b1.len());
        if v.len() != nw1 + 2 * h + 1 {
            return Err(Error::DimensionMismatch {
                expected: nw1 + 2 * h + 1,
                got: v.len(),
            });
        }
        self.w1.copy_from_slice(&v[..nw1]);
        self.b1.copy_from_slice(&v[nw1..nw1 + h]);
        self.w2.copy_from_slice(&v[nw1 + h..nw1 + 2 * h]);
        self.b2 = v[nw1 + 2 * h];
        Ok(())
    }

    /// Training loss and its analytic gradient (same layout as
    /// [`flat_params`](Self::flat_params)) on raw-unit samples, using the
    /// model's stored scaling.
    pub fn loss_and_gradient(&self, x: &[Vec<f64>], y: &[f64]) -> (f64, Vec<f64>) {
        let z: Vec<Vec<f64>> = x.iter().map(|r| self.standardize(r)).collect();
        let t: Vec<f64> = y.iter().map(|v| (v - self.y_mean) / self.y_scale).collect();
        self.loss_grad_scaled(&z, &t)
    }

    fn loss_grad_scaled(&self, z: &[Vec<f64>], t: &[f64]) -> (f64, Vec<f64>) {
        let p = self.n_inputs;
        let hn = self.hidden();
        let n = z.len() as f64;
        let mut g = vec![0.0; self.w1.len() + 2 * hn + 1];
        let (gw1, rest) = g.split_at_mut(self.w1.len());
        let (gb1, rest) = rest.split_at_mut(hn);
        let (gw2, gb2) = rest.split_at_mut(hn);
        let mut h = vec![0.0; hn];
        let mut loss = 0.0;
        for (zi, ti) in z.iter().zip(t) {
            let r = self.forward(zi, &mut h) - ti;
            loss += r * r;
            gb2[0] += r;
            for j in 0..hn {
                gw2[j] += r * h[j];
                let d = r * self.w2[j] * h[j] * (1.0 - h[j]);
                gb1[j] += d;
                let row = &mut gw1[j * p..(j + 1) * p];
                for (gw, v) in row.iter_mut().zip(zi) {
                    *gw += d * v;
                }
            }
        }
        g.iter_mut().for_each(|v| *v /= n);
        (loss / (2.0 * n), g)
    }
}

pub fn train_mlp(
    s: &Samples,
    params: &MlpParams,
    seed: u64,
    deadline: &Deadline,
) -> Result<MlpModel> {
    if params.epochs < 1 || params.hidden < 1 {
        return Err(Error::InvalidConfig(
            "MLP needs epochs >= 1 and hidden >= 1".into(),
        ));
    }
    if !(params.learning_rate.is_finite() && params.learning_rate > 0.0) {
        return Err(Error::InvalidConfig("learning rate must be > 0".into()));
    }
    if s.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let p = s.n_features();
    let (x_mean, x_std) = column_moments(&s.x, p);
    let x_scale: Vec<f64> = x_std
        .iter()
        .map(|&v| if v > 0.0 { v } else { 1.0 })
        .collect();
    let y_mean = s.y.iter().sum::<f64>() / s.len() as f64;
    let y_std = (s.y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / s.len() as f64).sqrt();
    let y_scale = if y_std > 0.0 { y_std } else { 1.0 };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let in_init = Normal::new(0.0, 1.0 / (p.max(1) as f64).sqrt()).expect("valid sd");
    let out_init = Normal::new(0.0, 1.0 / (params.hidden as f64).sqrt()).expect("valid sd");
    let w1 = (0..params.hidden * p)
        .map(|_| in_init.sample(&mut rng))
        .collect();
    let w2 = (0..params.hidden)
        .map(|_| out_init.sample(&mut rng))
        .collect();

    let mut model = MlpModel {
        params: *params,
        n_inputs: p,
        w1,
        b1: vec![0.0; params.hidden],
        w2,
        b2: 0.0,
        x_mean,
        x_scale,
        y_mean,
        y_scale,
    };
    if y_std == 0.0 {
        model.w2.iter_mut().for_each(|w| *w = 0.0);
        return Ok(model);
    }
    let z: Vec<Vec<f64>> = s.x.iter().map(|r| model.standardize(r)).collect();
    let t: Vec<f64> = s.y.iter().map(|v| (v - y_mean) / y_scale).collect();

    let mut theta = model.flat_params();
    let mut m = vec![0.0; theta.len()];
    let mut v = vec![0.0; theta.len()];
    for epoch in 1..=params.epochs {
        deadline.check()?;
        let (loss, grad) = model.loss_grad_scaled(&z, &t);
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        let c1 = 1.0 - BETA1.powi(epoch as i32);
        let c2 = 1.0 - BETA2.powi(epoch as i32);
        for k in 0..theta.len() {
            m[k] = BETA1 * m[k] + (1.0 - BETA1) * grad[k];
            v[k] = BETA2 * v[k] + (1.0 - BETA2) * grad[k] * grad[k];
            theta[k] -= params.learning_rate * (m[k] / c1) / ((v[k] / c2).sqrt() + ADAM_EPS);
        }
        model.set_flat_params(&theta)?;
    }
    if model.flat_params().iter().any(|w| !w.is_finite()) {
        return Err(Error::TrainingDiverged {
            epoch: params.epochs,
        });
    }
    Ok(model)
}
