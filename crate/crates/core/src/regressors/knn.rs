//! k-nearest-neighbour regression.
//!
//! Coordinates are min-max rescaled with ranges fitted on the training
//! set; prediction is the unweighted mean target of the `k` closest
//! training points by Euclidean distance. Equal distances keep training
//! order.

use crate::dataset::Samples;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    pub k: usize,
    pub min: Vec<f64>,
    pub range: Vec<f64>,
    /// Training points in rescaled coordinates.
    pub points: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl KnnModel {
    pub fn n_features(&self) -> usize {
        self.min.len()
    }

    fn rescale(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.min.iter().zip(&self.range))
            .map(|(v, (lo, r))| if *r > 0.0 { (v - lo) / r } else { 0.0 })
            .collect()
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        let q = self.rescale(x);
        let mut dist: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let d2: f64 = p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2, i)
            })
            .collect();
        // (distance, index) ordering gives the training-order tie break
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            dist.truncate(self.k);
        }
        dist.iter().map(|&(_, i)| self.targets[i]).sum::<f64>() / dist.len() as f64
    }
}

pub fn train_knn(s: &Samples, params: &KnnParams) -> Result<KnnModel> {
    let n = s.len();
    if params.k < 1 || params.k > n {
        return Err(Error::InvalidK { k: params.k, n });
    }
    let p = s.n_features();
    let mut min = vec![f64::INFINITY; p];
    let mut max = vec![f64::NEG_INFINITY; p];
    for row in &s.x {
        for j in 0..p {
            min[j] = min[j].min(row[j]);
            max[j] = max[j].max(row[j]);
        }
    }
    let range: Vec<f64> = min.iter().zip(&max).map(|(lo, hi)| hi - lo).collect();
    let mut model = KnnModel {
        k: params.k,
        min,
        range,
        points: Vec::new(),
        targets: s.y.clone(),
    };
    model.points = s.x.iter().map(|r| model.rescale(r)).collect();
    Ok(model)
}
