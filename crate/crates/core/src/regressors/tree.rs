//! Variance-reduction regression trees and random forests.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::budget::Deadline;
use crate::dataset::Samples;
use crate::seed::member_seed;
use crate::{Error, Result};

/// How many candidate features each split examines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaxFeatures {
    All,
    /// `⌈√p⌉`
    Sqrt,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, p: usize) -> usize {
        match self {
            MaxFeatures::All => p,
            MaxFeatures::Sqrt => (p as f64).sqrt().ceil() as usize,
            MaxFeatures::Count(c) => c,
        }
        .clamp(1, p.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    pub max_features: MaxFeatures,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            min_leaf: 2,
            max_depth: None,
            max_features: MaxFeatures::All,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Leaf {
        value: f64,
    },
    /// `x[feature] < threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeModel {
    pub params: TreeParams,
    pub n_features: usize,
    /// Root at index 0.
    pub nodes: Vec<Node>,
}

impl TreeModel {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] < threshold { left } else { right },
            }
        }
    }
}

struct Builder<'a> {
    s: &'a Samples,
    params: TreeParams,
    mtry: usize,
    rng: Option<ChaCha8Rng>,
    nodes: Vec<Node>,
}

struct BestSplit {
    score: f64,
    feature: usize,
    threshold: f64,
}

impl Builder<'_> {
    fn build(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let id = self.nodes.len();
        let n = idx.len();
        let mean = idx.iter().map(|&i| self.s.y[i]).sum::<f64>() / n as f64;
        self.nodes.push(Node::Leaf { value: mean });

        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        if !depth_ok || n < 2 * self.params.min_leaf || n < 2 {
            return id;
        }
        let sse: f64 = idx.iter().map(|&i| (self.s.y[i] - mean).powi(2)).sum();
        if sse <= 0.0 {
            return id;
        }
        let Some(best) = self.best_split(idx, mean) else {
            return id;
        };
        // gain = score - n·0² relative to the centred parent; require a real reduction
        if best.score <= sse * 1e-12 {
            return id;
        }
        let (f, t) = (best.feature, best.threshold);
        let pivot = partition(idx, |&i| self.s.x[i][f] < t);
        let (l, r) = idx.split_at_mut(pivot);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature: f,
            threshold: t,
            left,
            right,
        };
        id
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let p = self.s.n_features();
        match self.rng.as_mut() {
            Some(rng) if self.mtry < p => {
                let mut f = sample(rng, p, self.mtry).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..p).collect(),
        }
    }

    /// Maximises `S_l²/n_l + S_r²/n_r` over centred targets, which is the
    /// SSE reduction of the split. Thresholds are midpoints between
    /// consecutive distinct sorted values.
    fn best_split(&mut self, idx: &[usize], mean: f64) -> Option<BestSplit> {
        let n = idx.len();
        let min_leaf = self.params.min_leaf.max(1);
        let total: f64 = idx.iter().map(|&i| self.s.y[i] - mean).sum();
        let mut best: Option<BestSplit> = None;
        let mut order: Vec<(f64, f64)> = Vec::with_capacity(n);
        for f in self.candidate_features() {
            order.clear();
            order.extend(idx.iter().map(|&i| (self.s.x[i][f], self.s.y[i] - mean)));
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_sum = 0.0;
            for k in 0..n - 1 {
                left_sum += order[k].1;
                let nl = k + 1;
                let nr = n - nl;
                if nl < min_leaf || nr < min_leaf || order[k].0 == order[k + 1].0 {
                    continue;
                }
                let right_sum = total - left_sum;
                let score = left_sum * left_sum / nl as f64 + right_sum * right_sum / nr as f64;
                if best.as_ref().is_none_or(|b| score > b.score) {
                    let mut threshold = 0.5 * (order[k].0 + order[k + 1].0);
                    // midpoint of adjacent floats can round onto the upper value
                    if threshold <= order[k].0 || threshold > order[k + 1].0 {
                        threshold = order[k + 1].0;
                    }
                    best = Some(BestSplit {
                        score,
                        feature: f,
                        threshold,
                    });
                }
            }
        }
        best
    }
}

fn partition<T>(v: &mut [T], mut pred: impl FnMut(&T) -> bool) -> usize {
    let mut i = 0;
    for j in 0..v.len() {
        if pred(&v[j]) {
            v.swap(i, j);
            i += 1;
        }
    }
    i
}

fn validate(s: &Samples, params: &TreeParams) -> Result<()> {
    if s.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if params.min_leaf < 1 {
        return Err(Error::InvalidConfig("min_leaf must be >= 1".into()));
    }
    if let MaxFeatures::Count(0) = params.max_features {
        return Err(Error::InvalidConfig("max_features must be >= 1".into()));
    }
    Ok(())
}

fn grow(s: &Samples, idx: &mut [usize], params: TreeParams, rng: Option<ChaCha8Rng>) -> TreeModel {
    let mut b = Builder {
        s,
        params,
        mtry: params.max_features.resolve(s.n_features()),
        rng,
        nodes: Vec::new(),
    };
    b.build(idx, 0);
    TreeModel {
        params,
        n_features: s.n_features(),
        nodes: b.nodes,
    }
}

/// Greedy CART regression tree. With `max_features` below the feature
/// count the per-split subset is drawn from `seed`; otherwise the tree is
/// fully deterministic and `seed` is unused.
pub fn train_tree(s: &Samples, params: &TreeParams, seed: u64) -> Result<TreeModel> {
    validate(s, params)?;
    let mut idx: Vec<usize> = (0..s.len()).collect();
    Ok(grow(
        s,
        &mut idx,
        *params,
        Some(ChaCha8Rng::seed_from_u64(seed)),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestParams {
    pub trees: usize,
    pub bootstrap: bool,
    pub tree: TreeParams,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            trees: 100,
            bootstrap: true,
            tree: TreeParams {
                min_leaf: 1,
                max_depth: None,
                max_features: MaxFeatures::Sqrt,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub params: ForestParams,
    pub trees: Vec<TreeModel>,
    /// Per-tree seeds, for provenance.
    pub seeds: Vec<u64>,
}

impl ForestModel {
    pub fn n_features(&self) -> usize {
        self.trees.first().map_or(0, TreeModel::n_features)
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        self.trees
            .iter()
            .map(|t| t.predict_unchecked(x))
            .sum::<f64>()
            / self.trees.len() as f64
    }
}

/// Bagged trees with per-split feature subsampling. Tree `i` uses seed
/// `member_seed(seed, i)` for both its bootstrap draw and its splits, so
/// trees are trained in parallel without changing the result.
pub fn train_forest(
    s: &Samples,
    params: &ForestParams,
    seed: u64,
    deadline: &Deadline,
) -> Result<ForestModel> {
    validate(s, &params.tree)?;
    if params.trees < 1 {
        return Err(Error::InvalidConfig("trees must be >= 1".into()));
    }
    let n = s.len();
    let seeds: Vec<u64> = (0..params.trees as u64)
        .map(|i| member_seed(seed, i))
        .collect();
    let trees = seeds
        .par_iter()
        .map(|&ts| {
            deadline.check()?;
            let mut rng = ChaCha8Rng::seed_from_u64(ts);
            let mut idx: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            Ok(grow(s, &mut idx, params.tree, Some(rng)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ForestModel {
        params: *params,
        trees,
        seeds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64], ys: &[f64]) -> Samples {
        Samples::unnamed(xs.iter().map(|&v| vec![v]).collect(), ys.to_vec()).unwrap()
    }

    // Oracle: exhaustive scan of every midpoint for the single split with minimum SSE.
    fn best_stump(xs: &[f64], ys: &[f64]) -> (f64, f64) {
        let mut sorted: Vec<f64> = xs.to_vec();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        let sse = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|y| (y - m).powi(2)).sum::<f64>()
        };
        let mut best = (f64::INFINITY, f64::NAN);
        for w in sorted.windows(2) {
            let t = 0.5 * (w[0] + w[1]);
            let l: Vec<f64> = xs
                .iter()
                .zip(ys)
                .filter(|(x, _)| **x < t)
                .map(|(_, y)| *y)
                .collect();
            let r: Vec<f64> = xs
                .iter()
                .zip(ys)
                .filter(|(x, _)| **x >= t)
                .map(|(_, y)| *y)
                .collect();
            let total = sse(&l) + sse(&r);
            if total < best.0 {
                best = (total, t);
            }
        }
        best
    }

    #[test]
    fn constant_target_single_leaf() {
        let s = line(&[1.0, 2.0, 3.0, 4.0], &[5.0; 4]);
        let t = train_tree(&s, &TreeParams::default(), 0).unwrap();
        assert_eq!(t.nodes, vec![Node::Leaf { value: 5.0 }]);
    }

    #[test]
    fn step_function() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| if x < 5.0 { 0.0 } else { 10.0 })
            .collect();
        let (sse, t_oracle) = best_stump(&xs, &ys);
        assert_eq!(sse, 0.0);
        let t = train_tree(&line(&xs, &ys), &TreeParams::default(), 0).unwrap();
        assert_eq!(t.depth(), 1);
        match t.nodes[0] {
            Node::Split { threshold, .. } => assert_eq!(threshold, t_oracle),
            _ => panic!("expected a split"),
        }
        for (x, y) in xs.iter().zip(&ys) {
            assert_eq!(t.predict_unchecked(&[*x]), *y);
        }
    }

    #[test]
    fn first_split_matches_exhaustive_scan() {
        let xs: Vec<f64> = (0..40).map(|i| ((i * 37) % 41) as f64).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| (x * 0.3).sin() * 10.0 + x * 0.1)
            .collect();
        let (_, t_oracle) = best_stump(&xs, &ys);
        let params = TreeParams {
            min_leaf: 1,
            max_depth: Some(1),
            max_features: MaxFeatures::All,
        };
        let t = train_tree(&line(&xs, &ys), &params, 0).unwrap();
        match t.nodes[0] {
            Node::Split { threshold, .. } => assert_eq!(threshold, t_oracle),
            _ => panic!("expected a split"),
        }
    }

    #[test]
    fn min_leaf_n_gives_training_mean() {
        let s = line(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 10.0]);
        let t = train_tree(
            &s,
            &TreeParams {
                min_leaf: 4,
                ..TreeParams::default()
            },
            0,
        )
        .unwrap();
        assert_eq!(t.nodes, vec![Node::Leaf { value: 4.0 }]);
    }

    #[test]
    fn min_leaf_one_interpolates_unique_inputs() {
        let xs: Vec<f64> = (0..50).map(|i| ((i * 13) % 50) as f64 + 0.25).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * x - 3.0 * x).collect();
        let params = TreeParams {
            min_leaf: 1,
            ..TreeParams::default()
        };
        let t = train_tree(&line(&xs, &ys), &params, 0).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert_eq!(t.predict_unchecked(&[*x]), *y);
        }
    }

    #[test]
    fn max_depth_respected() {
        let xs: Vec<f64> = (0..64).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        let params = TreeParams {
            min_leaf: 1,
            max_depth: Some(3),
            max_features: MaxFeatures::All,
        };
        let t = train_tree(&line(&xs, &ys), &params, 0).unwrap();
        assert!(t.depth() <= 3);
        assert!(t.n_leaves() <= 8);
    }

    #[test]
    fn degenerate_forest_equals_tree() {
        let x: Vec<Vec<f64>> = (0..60)
            .map(|i| vec![i as f64, ((i * 7) % 13) as f64])
            .collect();
        let y: Vec<f64> = x.iter().map(|r| r[0].sqrt() + r[1]).collect();
        let s = Samples::unnamed(x.clone(), y).unwrap();
        let tp = TreeParams {
            min_leaf: 2,
            max_depth: None,
            max_features: MaxFeatures::All,
        };
        let fp = ForestParams {
            trees: 1,
            bootstrap: false,
            tree: tp,
        };
        let tree = train_tree(&s, &tp, 0).unwrap();
        let forest = train_forest(&s, &fp, 99, &Deadline::unlimited()).unwrap();
        for r in &x {
            assert_eq!(tree.predict_unchecked(r), forest.predict_unchecked(r));
        }
    }

    #[test]
    fn forest_is_mean_of_trees_and_deterministic() {
        let x: Vec<Vec<f64>> = (0..80)
            .map(|i| vec![i as f64 / 10.0, ((i * 7) % 11) as f64])
            .collect();
        let y: Vec<f64> = x.iter().map(|r| r[0].sin() + r[1] * r[1]).collect();
        let s = Samples::unnamed(x.clone(), y).unwrap();
        let fp = ForestParams {
            trees: 20,
            ..ForestParams::default()
        };
        let f = train_forest(&s, &fp, 5, &Deadline::unlimited()).unwrap();
        let g = train_forest(&s, &fp, 5, &Deadline::unlimited()).unwrap();
        assert_eq!(f, g);
        for r in &x {
            let m = f.trees.iter().map(|t| t.predict_unchecked(r)).sum::<f64>() / 20.0;
            assert!((f.predict_unchecked(r) - m).abs() <= 1e-12 * m.abs().max(1.0));
        }
    }

    #[test]
    fn forest_constant_target() {
        let s = line(&[1.0, 2.0, 3.0, 4.0, 5.0], &[3.0; 5]);
        let f = train_forest(
            &s,
            &ForestParams {
                trees: 10,
                ..Default::default()
            },
            1,
            &Deadline::unlimited(),
        )
        .unwrap();
        assert_eq!(f.predict_unchecked(&[2.5]), 3.0);
    }

    #[test]
    fn max_features_resolution() {
        assert_eq!(MaxFeatures::Sqrt.resolve(6), 3);
        assert_eq!(MaxFeatures::Sqrt.resolve(4), 2);
        assert_eq!(MaxFeatures::Sqrt.resolve(1), 1);
        assert_eq!(MaxFeatures::Count(10).resolve(4), 4);
        assert_eq!(MaxFeatures::All.resolve(6), 6);
    }
}
