//! Rotation-forest meta-ensemble.
//!
//! Each member partitions the (standardized) features into random disjoint
//! subsets, runs PCA on every subset over a random sample drawn without
//! replacement, and assembles the principal axes into one orthonormal
//! block rotation. The base learner trains on rotated features; the
//! ensemble averages member predictions.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{column_moments, RegressionModel, TrainConfig};
use crate::budget::Deadline;
use crate::dataset::Samples;
use crate::seed::member_seed;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RotationParams {
    pub base: Box<TrainConfig>,
    pub iterations: usize,
    /// Features per disjoint subset; the last subset may be smaller.
    pub subset_size: usize,
    /// Fraction of instances drawn (without replacement) for each subset's PCA.
    pub sample_fraction: f64,
    /// Skip standardization and PCA; every rotation is the identity.
    pub force_identity: bool,
}

impl Default for RotationParams {
    fn default() -> Self {
        RotationParams {
            base: Box::new(TrainConfig::Mlp(Default::default())),
            iterations: 10,
            subset_size: 2,
            sample_fraction: 0.75,
            force_identity: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RotationMember {
    /// `p × p` row-major; rotated component `c` is `Σ_f z[f]·R[f][c]`.
    pub rotation: Vec<f64>,
    /// Some feature subset had zero variance and kept the identity.
    pub identity_fallback: bool,
    pub model: RegressionModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RotationModel {
    pub params: RotationParams,
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
    pub members: Vec<RotationMember>,
}

impl RotationModel {
    pub fn n_features(&self) -> usize {
        self.center.len()
    }

    pub fn rotation_matrix(&self, member: usize) -> DMatrix<f64> {
        let p = self.n_features();
        DMatrix::from_row_slice(p, p, &self.members[member].rotation)
    }

    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.center.iter().zip(&self.scale))
            .map(|(v, (c, s))| (v - c) / s)
            .collect()
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        let z = self.standardize(x);
        let sum: f64 = self
            .members
            .iter()
            .map(|m| m.model.predict_unchecked(&rotate(&z, &m.rotation)))
            .sum();
        sum / self.members.len() as f64
    }
}

fn rotate(z: &[f64], r: &[f64]) -> Vec<f64> {
    let p = z.len();
    (0..p)
        .map(|c| (0..p).map(|f| z[f] * r[f * p + c]).sum())
        .collect()
}

fn identity(p: usize) -> Vec<f64> {
    let mut r = vec![0.0; p * p];
    for i in 0..p {
        r[i * p + i] = 1.0;
    }
    r
}

/// Random block rotation for one member. Returns the matrix and whether
/// any subset fell back to the identity.
fn build_rotation(
    z: &[Vec<f64>],
    params: &RotationParams,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, bool) {
    let n = z.len();
    let p = z[0].len();
    let mut features: Vec<usize> = (0..p).collect();
    features.shuffle(rng);
    let m = ((params.sample_fraction * n as f64).ceil() as usize).clamp(n.min(2), n);
    let mut r = vec![0.0; p * p];
    let mut fallback = false;
    for subset in features.chunks(params.subset_size) {
        let rows = sample(rng, n, m).into_vec();
        let k = subset.len();
        let mut means = vec![0.0; k];
        for &i in &rows {
            for (a, &f) in subset.iter().enumerate() {
                means[a] += z[i][f];
            }
        }
        means.iter_mut().for_each(|v| *v /= m as f64);
        let mut cov = DMatrix::<f64>::zeros(k, k);
        for &i in &rows {
            for a in 0..k {
                let da = z[i][subset[a]] - means[a];
                for b in 0..k {
                    cov[(a, b)] += da * (z[i][subset[b]] - means[b]);
                }
            }
        }
        cov /= (m.max(2) - 1) as f64;
        if cov.trace() <= 1e-12 {
            fallback = true;
            for &f in subset {
                r[f * p + f] = 1.0;
            }
            continue;
        }
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .total_cmp(&eig.eigenvalues[a])
                .then(a.cmp(&b))
        });
        for (slot, &e) in order.iter().enumerate() {
            let col = eig.eigenvectors.column(e);
            let pivot = (0..k)
                .max_by(|&a, &b| col[a].abs().total_cmp(&col[b].abs()))
                .unwrap_or(0);
            let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
            let out_col = subset[slot];
            for (a, &f) in subset.iter().enumerate() {
                r[f * p + out_col] = sign * col[a];
            }
        }
    }
    (r, fallback)
}

pub fn train_rotation(
    s: &Samples,
    params: &RotationParams,
    seed: u64,
    deadline: &Deadline,
) -> Result<RotationModel> {
    let p = s.n_features();
    if s.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if params.iterations < 1 {
        return Err(Error::InvalidConfig("iterations must be >= 1".into()));
    }
    if params.subset_size < 1 || params.subset_size > p {
        return Err(Error::InvalidConfig(format!(
            "subset_size {} must be in 1..={p}",
            params.subset_size
        )));
    }
    let (center, scale) = if params.force_identity {
        (vec![0.0; p], vec![1.0; p])
    } else {
        let (m, sd) = column_moments(&s.x, p);
        (
            m,
            sd.into_iter()
                .map(|v| if v > 0.0 { v } else { 1.0 })
                .collect(),
        )
    };
    let z: Vec<Vec<f64>> =
        s.x.iter()
            .map(|r| {
                r.iter()
                    .zip(center.iter().zip(&scale))
                    .map(|(v, (c, sc))| (v - c) / sc)
                    .collect()
            })
            .collect();
    let names: Vec<String> = (1..=p).map(|j| format!("rc{j}")).collect();

    let members = (0..params.iterations as u64)
        .into_par_iter()
        .map(|i| {
            deadline.check()?;
            let ms = member_seed(seed, i);
            let (rotation, identity_fallback) = if params.force_identity {
                (identity(p), false)
            } else {
                build_rotation(&z, params, &mut ChaCha8Rng::seed_from_u64(ms))
            };
            let rotated = Samples {
                x: z.iter().map(|r| rotate(r, &rotation)).collect(),
                y: s.y.clone(),
                feature_names: names.clone(),
                target_name: s.target_name.clone(),
            };
            let model = params.base.train(&rotated, ms, deadline)?;
            Ok(RotationMember {
                rotation,
                identity_fallback,
                model,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RotationModel {
        params: params.clone(),
        center,
        scale,
        members,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regressors::{KnnParams, LinearParams, TreeParams};

    fn data() -> Samples {
        let x: Vec<Vec<f64>> = (0..60)
            .map(|i| {
                let t = i as f64;
                vec![t, (t * 0.3).sin() * 100.0, 1000.0 + 3.0 * t, (i % 5) as f64]
            })
            .collect();
        let y = x
            .iter()
            .map(|r| r[0] * 0.5 + r[1] - 0.01 * r[2] + r[3])
            .collect();
        Samples::unnamed(x, y).unwrap()
    }

    #[test]
    fn rotations_are_orthonormal() {
        let s = data();
        let params = RotationParams {
            base: Box::new(TrainConfig::Linear(LinearParams::default())),
            iterations: 5,
            subset_size: 3,
            ..Default::default()
        };
        let m = train_rotation(&s, &params, 4, &Deadline::unlimited()).unwrap();
        for i in 0..5 {
            let r = m.rotation_matrix(i);
            let err = (r.transpose() * &r - DMatrix::identity(4, 4)).abs().max();
            assert!(err < 1e-10, "member {i}: {err}");
        }
    }

    #[test]
    fn identity_rotation_matches_base() {
        let s = data();
        let base = TrainConfig::Tree(TreeParams::default());
        let params = RotationParams {
            base: Box::new(base.clone()),
            iterations: 1,
            force_identity: true,
            ..Default::default()
        };
        let seed = 17;
        let rot = train_rotation(&s, &params, seed, &Deadline::unlimited()).unwrap();
        let alone = base
            .train(&s, member_seed(seed, 0), &Deadline::unlimited())
            .unwrap();
        for r in &s.x {
            assert_eq!(rot.predict_unchecked(r), alone.predict(r).unwrap());
        }
    }

    #[test]
    fn zero_variance_subset_falls_back() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, 3.0]).collect();
        let y = (0..20).map(|i| i as f64).collect();
        let s = Samples::unnamed(x, y).unwrap();
        let params = RotationParams {
            base: Box::new(TrainConfig::Knn(KnnParams { k: 1 })),
            iterations: 3,
            subset_size: 1,
            ..Default::default()
        };
        let m = train_rotation(&s, &params, 0, &Deadline::unlimited()).unwrap();
        assert!(m.members.iter().all(|mem| mem.identity_fallback));
    }

    #[test]
    fn deterministic() {
        let s = data();
        let params = RotationParams {
            base: Box::new(TrainConfig::Knn(KnnParams { k: 3 })),
            iterations: 4,
            ..Default::default()
        };
        let a = train_rotation(&s, &params, 8, &Deadline::unlimited()).unwrap();
        let b = train_rotation(&s, &params, 8, &Deadline::unlimited()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_subset_size() {
        let s = data();
        let params = RotationParams {
            subset_size: 5,
            ..Default::default()
        };
        assert!(matches!(
            train_rotation(&s, &params, 0, &Deadline::unlimited()),
            Err(Error::InvalidConfig(_))
        ));
    }
}
