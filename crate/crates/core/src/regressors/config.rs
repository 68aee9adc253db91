//! Algorithm selection strings and training dispatch.
//!
//! Grammar: `name[:key=value[,key=value]...]`, for example `knn:k=3`,
//! `forest:trees=50,max_features=all` or `rotation-mlp:iterations=5,hidden=8`.
//! Rotation options not recognised by the rotation ensemble itself are
//! forwarded to its base learner.

use super::knn::train_knn;
use super::linear::train_linear_with;
use super::mlp::train_mlp;
use super::rotation::train_rotation;
use super::tree::{train_forest, train_tree};
use super::*;
use crate::budget::Deadline;
use crate::dataset::Samples;
use crate::fmt::real;

pub const ALGORITHM_NAMES: [&str; 10] = [
    "linear",
    "knn",
    "tree",
    "forest",
    "mlp",
    "rotation-linear",
    "rotation-knn",
    "rotation-tree",
    "rotation-forest",
    "rotation-mlp",
];

#[derive(Debug, Clone, PartialEq)]
pub enum TrainConfig {
    Linear(LinearParams),
    Knn(KnnParams),
    Tree(TreeParams),
    Forest(ForestParams),
    Mlp(MlpParams),
    Rotation(RotationParams),
}

impl TrainConfig {
    pub fn train(&self, s: &Samples, seed: u64, deadline: &Deadline) -> Result<RegressionModel> {
        deadline.check()?;
        Ok(match self {
            TrainConfig::Linear(p) => RegressionModel::Linear(train_linear_with(s, p)?),
            TrainConfig::Knn(p) => RegressionModel::Knn(train_knn(s, p)?),
            TrainConfig::Tree(p) => RegressionModel::Tree(train_tree(s, p, seed)?),
            TrainConfig::Forest(p) => RegressionModel::Forest(train_forest(s, p, seed, deadline)?),
            TrainConfig::Mlp(p) => RegressionModel::Mlp(train_mlp(s, p, seed, deadline)?),
            TrainConfig::Rotation(p) => {
                RegressionModel::Rotation(train_rotation(s, p, seed, deadline)?)
            }
        })
    }

    pub fn name(&self) -> String {
        match self {
            TrainConfig::Linear(_) => "linear".into(),
            TrainConfig::Knn(_) => "knn".into(),
            TrainConfig::Tree(_) => "tree".into(),
            TrainConfig::Forest(_) => "forest".into(),
            TrainConfig::Mlp(_) => "mlp".into(),
            TrainConfig::Rotation(p) => format!("rotation-{}", p.base.name()),
        }
    }

    /// Fully explicit selection string; parses back to an equal config.
    pub fn describe(&self) -> String {
        format!("{}:{}", self.name(), self.options().join(","))
    }

    fn options(&self) -> Vec<String> {
        match self {
            TrainConfig::Linear(p) => vec![format!("ridge={}", real(p.ridge))],
            TrainConfig::Knn(p) => vec![format!("k={}", p.k)],
            TrainConfig::Tree(p) => tree_options(p),
            TrainConfig::Forest(p) => {
                let mut v = vec![
                    format!("trees={}", p.trees),
                    format!("bootstrap={}", p.bootstrap),
                ];
                v.extend(tree_options(&p.tree));
                v
            }
            TrainConfig::Mlp(p) => vec![
                format!("hidden={}", p.hidden),
                format!("epochs={}", p.epochs),
                format!("lr={}", real(p.learning_rate)),
            ],
            TrainConfig::Rotation(p) => {
                let mut v = vec![
                    format!("iterations={}", p.iterations),
                    format!("subset_size={}", p.subset_size),
                    format!("sample_fraction={}", real(p.sample_fraction)),
                    format!("identity={}", p.force_identity),
                ];
                v.extend(p.base.options());
                v
            }
        }
    }

    pub fn default_for(name: &str) -> Result<Self> {
        Ok(match name {
            "linear" => TrainConfig::Linear(LinearParams::default()),
            "knn" => TrainConfig::Knn(KnnParams::default()),
            "tree" => TrainConfig::Tree(TreeParams::default()),
            "forest" => TrainConfig::Forest(ForestParams::default()),
            "mlp" => TrainConfig::Mlp(MlpParams::default()),
            other => match other.strip_prefix("rotation-") {
                Some(base) if !base.starts_with("rotation") => {
                    TrainConfig::Rotation(RotationParams {
                        base: Box::new(TrainConfig::default_for(base)?),
                        ..RotationParams::default()
                    })
                }
                _ => return Err(unknown(name)),
            },
        })
    }

    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (name, opts) = spec.split_once(':').unwrap_or((spec, ""));
        let mut cfg = TrainConfig::default_for(name)?;
        for kv in opts.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("option '{kv}' is not key=value")))?;
            if !cfg.set(k.trim(), v.trim())? {
                return Err(Error::InvalidConfig(format!(
                    "unknown option '{k}' for {name}"
                )));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one option; `Ok(false)` when the key does not apply.
    fn set(&mut self, k: &str, v: &str) -> Result<bool> {
        match self {
            TrainConfig::Linear(p) => match k {
                "ridge" => p.ridge = num(k, v)?,
                _ => return Ok(false),
            },
            TrainConfig::Knn(p) => match k {
                "k" => p.k = num(k, v)?,
                _ => return Ok(false),
            },
            TrainConfig::Tree(p) => return set_tree(p, k, v),
            TrainConfig::Forest(p) => match k {
                "trees" => p.trees = num(k, v)?,
                "bootstrap" => p.bootstrap = num(k, v)?,
                _ => return set_tree(&mut p.tree, k, v),
            },
            TrainConfig::Mlp(p) => match k {
                "hidden" => p.hidden = num(k, v)?,
                "epochs" => p.epochs = num(k, v)?,
                "lr" | "learning_rate" => p.learning_rate = num(k, v)?,
                _ => return Ok(false),
            },
            TrainConfig::Rotation(p) => match k {
                "iterations" => p.iterations = num(k, v)?,
                "subset_size" => p.subset_size = num(k, v)?,
                "sample_fraction" => p.sample_fraction = num(k, v)?,
                "identity" => p.force_identity = num(k, v)?,
                _ => return p.base.set(k, v),
            },
        }
        Ok(true)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        match self {
            TrainConfig::Linear(p) if !(p.ridge >= 0.0 && p.ridge.is_finite()) => {
                bad("ridge must be >= 0")
            }
            TrainConfig::Knn(p) if p.k < 1 => bad("k must be >= 1"),
            TrainConfig::Tree(p) => validate_tree(p),
            TrainConfig::Forest(p) if p.trees < 1 => bad("trees must be >= 1"),
            TrainConfig::Forest(p) => validate_tree(&p.tree),
            TrainConfig::Mlp(p) if p.hidden < 1 || p.epochs < 1 => {
                bad("hidden and epochs must be >= 1")
            }
            TrainConfig::Mlp(p) if !(p.learning_rate > 0.0 && p.learning_rate.is_finite()) => {
                bad("lr must be > 0")
            }
            TrainConfig::Rotation(p) if p.iterations < 1 || p.subset_size < 1 => {
                bad("iterations and subset_size must be >= 1")
            }
            TrainConfig::Rotation(p) if !(p.sample_fraction > 0.0 && p.sample_fraction <= 1.0) => {
                bad("sample_fraction must be in (0, 1]")
            }
            TrainConfig::Rotation(p) => p.base.validate(),
            _ => Ok(()),
        }
    }
}

fn unknown(name: &str) -> Error {
    Error::UnknownAlgorithm {
        name: name.to_string(),
        valid: ALGORITHM_NAMES.join(", "),
    }
}

fn num<T: std::str::FromStr>(k: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::InvalidConfig(format!("bad value '{v}' for option '{k}'")))
}

fn tree_options(p: &TreeParams) -> Vec<String> {
    vec![
        format!("min_leaf={}", p.min_leaf),
        format!(
            "max_depth={}",
            p.max_depth.map_or("none".to_string(), |d| d.to_string())
        ),
        format!(
            "max_features={}",
            match p.max_features {
                MaxFeatures::All => "all".to_string(),
                MaxFeatures::Sqrt => "sqrt".to_string(),
                MaxFeatures::Count(c) => c.to_string(),
            }
        ),
    ]
}

fn set_tree(p: &mut TreeParams, k: &str, v: &str) -> Result<bool> {
    match k {
        "min_leaf" => p.min_leaf = num(k, v)?,
        "max_depth" => {
            p.max_depth = if v == "none" { None } else { Some(num(k, v)?) };
        }
        "max_features" => {
            p.max_features = match v {
                "all" => MaxFeatures::All,
                "sqrt" => MaxFeatures::Sqrt,
                _ => MaxFeatures::Count(num(k, v)?),
            }
        }
        _ => return Ok(false),
    }
    Ok(true)
}

fn validate_tree(p: &TreeParams) -> Result<()> {
    if p.min_leaf < 1 {
        return Err(Error::InvalidConfig("min_leaf must be >= 1".into()));
    }
    if p.max_features == MaxFeatures::Count(0) {
        return Err(Error::InvalidConfig("max_features must be >= 1".into()));
    }
    Ok(())
}
