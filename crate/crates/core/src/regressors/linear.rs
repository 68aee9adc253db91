//! Ordinary least squares with an intercept.
//!
//! Columns are centred and scaled to unit variance, the normal equations
//! `(ZᵀZ + λI) β = Zᵀ(y − ȳ)` are solved by Cholesky with a tiny ridge
//! `λ`, and the solution is mapped back to raw-feature weights and a bias.
//! Scaling keeps pixel counts in the hundreds of thousands and slice
//! indices near one on the same footing; the intercept is never penalised.

use nalgebra::{DMatrix, DVector};

use super::{check_dim, column_moments};
use crate::dataset::{FeatureSource, Samples};
use crate::{Error, Result};

pub const DEFAULT_RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearParams {
    pub ridge: f64,
}

impl Default for LinearParams {
    fn default() -> Self {
        LinearParams {
            ridge: DEFAULT_RIDGE,
        }
    }
}

/// `target = bias + Σ weights[j] · feature_names[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub feature_names: Vec<String>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub target_name: String,
}

impl LinearModel {
    pub fn new(
        feature_names: Vec<String>,
        weights: Vec<f64>,
        bias: f64,
        target_name: impl Into<String>,
    ) -> Result<Self> {
        if feature_names.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: feature_names.len(),
                got: weights.len(),
            });
        }
        Ok(LinearModel {
            feature_names,
            weights,
            bias,
            target_name: target_name.into(),
        })
    }

    pub(crate) fn eval(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.weights.len(), x)?;
        Ok(self.eval(x))
    }

    /// Looks every feature up by name.
    pub fn predict_source(&self, src: &impl FeatureSource) -> Result<f64> {
        let mut acc = self.bias;
        for (name, w) in self.feature_names.iter().zip(&self.weights) {
            let v = src
                .feature(name)
                .ok_or_else(|| Error::UnknownFeature(name.clone()))?;
            acc += w * v;
        }
        Ok(acc)
    }

    pub fn weight(&self, name: &str) -> Option<f64> {
        self.feature_names
            .iter()
            .position(|n| n == name)
            .map(|j| self.weights[j])
    }

    /// Human-readable equation, 4 decimals.
    pub fn equation(&self) -> String {
        let mut s = format!("{} =", self.target_name);
        for (i, (name, w)) in self.feature_names.iter().zip(&self.weights).enumerate() {
            match (i, *w < 0.0) {
                (0, true) => s.push_str(&format!(" -{:.4} × {name}", w.abs())),
                (0, false) => s.push_str(&format!(" {:.4} × {name}", w)),
                (_, true) => s.push_str(&format!(" - {:.4} × {name}", w.abs())),
                (_, false) => s.push_str(&format!(" + {:.4} × {name}", w)),
            }
        }
        let sign = if self.bias < 0.0 { '-' } else { '+' };
        s.push_str(&format!(" {sign} {:.4}", self.bias.abs()));
        s
    }
}

pub fn train_linear(s: &Samples) -> Result<LinearModel> {
    train_linear_with(s, &LinearParams::default())
}

pub fn train_linear_with(s: &Samples, params: &LinearParams) -> Result<LinearModel> {
    let n = s.len();
    let p = s.n_features();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if !(params.ridge.is_finite() && params.ridge >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "ridge {} must be >= 0",
            params.ridge
        )));
    }
    if s.x.iter().flatten().chain(&s.y).any(|v| !v.is_finite()) {
        return Err(Error::SingularDesign(
            "non-finite value in training data".into(),
        ));
    }

    let y_mean = s.y.iter().sum::<f64>() / n as f64;
    let (means, stds) = column_moments(&s.x, p);
    // zero-variance columns are absorbed by the intercept
    let active: Vec<usize> = (0..p).filter(|&j| stds[j] > 0.0).collect();
    let q = active.len();

    let mut weights = vec![0.0; p];
    if q > 0 {
        if n <= q + 1 {
            return Err(Error::SingularDesign(format!(
                "{n} instances cannot determine {q} weights plus a bias"
            )));
        }
        let z = DMatrix::from_fn(n, q, |i, c| {
            let j = active[c];
            (s.x[i][j] - means[j]) / stds[j]
        });
        let yc = DVector::from_iterator(n, s.y.iter().map(|v| v - y_mean));
        let mut gram = z.transpose() * &z;
        for d in 0..q {
            gram[(d, d)] += params.ridge;
        }
        let rhs = z.transpose() * yc;
        let chol = gram.cholesky().ok_or_else(|| {
            Error::SingularDesign("normal equations not positive definite".into())
        })?;
        let beta = chol.solve(&rhs);
        for (c, &j) in active.iter().enumerate() {
            weights[j] = beta[c] / stds[j];
        }
    }
    let bias = y_mean - weights.iter().zip(&means).map(|(w, m)| w * m).sum::<f64>();
    if !bias.is_finite() || weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::SingularDesign("solution is not finite".into()));
    }
    LinearModel::new(
        s.feature_names.clone(),
        weights,
        bias,
        s.target_name.clone(),
    )
}
