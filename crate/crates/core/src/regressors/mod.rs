//! Trainable regressors behind one train/predict contract.
//!
//! Every learner is a pure function of `(samples, config, seed)`: the same
//! inputs give bitwise-identical models. Trained models are immutable.

mod config;
pub mod knn;
pub mod linear;
pub mod mlp;
pub mod persist;
pub mod rotation;
pub mod tree;

pub use config::{TrainConfig, ALGORITHM_NAMES};
pub use knn::{KnnModel, KnnParams};
pub use linear::{train_linear, LinearModel, LinearParams};
pub use mlp::{MlpModel, MlpParams};
pub use persist::TrainedModel;
pub use rotation::{RotationMember, RotationModel, RotationParams};
pub use tree::{ForestModel, ForestParams, MaxFeatures, TreeModel, TreeParams};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum RegressionModel {
    Linear(LinearModel),
    Knn(KnnModel),
    Tree(TreeModel),
    Forest(ForestModel),
    Mlp(MlpModel),
    Rotation(RotationModel),
}

impl RegressionModel {
    pub fn n_features(&self) -> usize {
        match self {
            RegressionModel::Linear(m) => m.weights.len(),
            RegressionModel::Knn(m) => m.n_features(),
            RegressionModel::Tree(m) => m.n_features(),
            RegressionModel::Forest(m) => m.n_features(),
            RegressionModel::Mlp(m) => m.n_features(),
            RegressionModel::Rotation(m) => m.n_features(),
        }
    }

    pub fn algorithm(&self) -> &'static str {
        match self {
            RegressionModel::Linear(_) => "linear",
            RegressionModel::Knn(_) => "knn",
            RegressionModel::Tree(_) => "tree",
            RegressionModel::Forest(_) => "forest",
            RegressionModel::Mlp(_) => "mlp",
            RegressionModel::Rotation(_) => "rotation",
        }
    }

    /// Raw prediction; never clamped, so it may be negative.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.n_features(), x)?;
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            RegressionModel::Linear(m) => m.eval(x),
            RegressionModel::Knn(m) => m.predict_unchecked(x),
            RegressionModel::Tree(m) => m.predict_unchecked(x),
            RegressionModel::Forest(m) => m.predict_unchecked(x),
            RegressionModel::Mlp(m) => m.predict_unchecked(x),
            RegressionModel::Rotation(m) => m.predict_unchecked(x),
        }
    }

    pub fn predict_many(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        rows.iter().map(|r| self.predict(r)).collect()
    }
}

pub(crate) fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: x.len(),
        });
    }
    Ok(())
}

/// Column means and population standard deviations.
pub(crate) fn column_moments(x: &[Vec<f64>], p: usize) -> (Vec<f64>, Vec<f64>) {
    let n = x.len().max(1) as f64;
    let mut m = vec![0.0; p];
    for row in x {
        for (mj, v) in m.iter_mut().zip(row) {
            *mj += v;
        }
    }
    m.iter_mut().for_each(|v| *v /= n);
    let mut s = vec![0.0; p];
    for row in x {
        for j in 0..p {
            let d = row[j] - m[j];
            s[j] += d * d;
        }
    }
    s.iter_mut().for_each(|v| *v = (*v / n).sqrt());
    (m, s)
}
