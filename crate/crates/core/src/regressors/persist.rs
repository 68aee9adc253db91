//! Plain-text model files.
//!
//! ```text
//! adipredict-model 1
//! target green
//! features 6 red blue grey black slice_index images_qnt
//! model linear
//!   target green
//!   features 6 red blue grey black slice_index images_qnt
//!   weights 6 -1.2295 -7.4448 ...
//!   bias 230102.0526
//! end
//! ```
//!
//! One `key values...` entry per line, whitespace separated. Arrays are
//! written as `key <len> v1 v2 ...`; every real uses 17 significant digits
//! so a reloaded model predicts bit-for-bit what the saved one did.
//! Ensembles nest `model <tag> ... end` blocks. Blank lines and lines
//! starting with `#` are ignored.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::knn::KnnModel;
use super::linear::LinearModel;
use super::mlp::{MlpModel, MlpParams};
use super::rotation::{RotationMember, RotationModel};
use super::tree::{ForestModel, ForestParams, MaxFeatures, Node, TreeModel, TreeParams};
use super::{RegressionModel, TrainConfig};
use crate::dataset::FeatureSource;
use crate::fmt::real;
use crate::{Error, Result};

pub const FORMAT_MAGIC: &str = "adipredict-model";
pub const FORMAT_VERSION: u32 = 1;

/// A model together with the dataset columns it reads and predicts.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub model: RegressionModel,
}

impl TrainedModel {
    pub fn predict_source(&self, src: &impl FeatureSource) -> Result<f64> {
        let x = self
            .feature_names
            .iter()
            .map(|n| {
                src.feature(n)
                    .ok_or_else(|| Error::UnknownFeature(n.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        self.model.predict(&x)
    }

    pub fn to_text(&self) -> Result<String> {
        let mut w = Writer::default();
        w.line(0, &format!("{FORMAT_MAGIC} {FORMAT_VERSION}"));
        w.word(0, "target", &self.target_name)?;
        w.names(0, "features", &self.feature_names)?;
        w.model(0, &self.model)?;
        Ok(w.out)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = Reader::new(text);
        let head = r.next()?;
        if head.len() != 2 || head[0] != FORMAT_MAGIC {
            return Err(r.err("missing 'adipredict-model <version>' header"));
        }
        if head[1] != FORMAT_VERSION.to_string() {
            return Err(r.err(&format!("unsupported format version {}", head[1])));
        }
        let target_name = r.word("target")?;
        let feature_names = r.names("features")?;
        let model = r.model()?;
        if model.n_features() != feature_names.len() {
            return Err(r.err("model width does not match feature list"));
        }
        if let Ok(extra) = r.next() {
            return Err(r.err(&format!("unexpected trailing entry '{}'", extra[0])));
        }
        Ok(TrainedModel {
            feature_names,
            target_name,
            model,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()?).map_err(|e| Error::Io(e).at(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(e).at(path))?;
        TrainedModel::from_text(&text).map_err(|e| e.at(path))
    }
}

#[derive(Default)]
struct Writer {
    out: String,
}

impl Writer {
    fn line(&mut self, depth: usize, s: &str) {
        for _ in 0..depth {
            self.out.push_str("  ");
        }
        self.out.push_str(s);
        self.out.push('\n');
    }

    fn word(&mut self, depth: usize, key: &str, v: &str) -> Result<()> {
        check_word(v)?;
        self.line(depth, &format!("{key} {v}"));
        Ok(())
    }

    fn value(&mut self, depth: usize, key: &str, v: impl std::fmt::Display) {
        self.line(depth, &format!("{key} {v}"));
    }

    fn real(&mut self, depth: usize, key: &str, v: f64) {
        self.line(depth, &format!("{key} {}", real(v)));
    }

    fn reals(&mut self, depth: usize, key: &str, v: &[f64]) {
        let mut s = format!("{key} {}", v.len());
        for x in v {
            let _ = write!(s, " {}", real(*x));
        }
        self.line(depth, &s);
    }

    fn names(&mut self, depth: usize, key: &str, v: &[String]) -> Result<()> {
        let mut s = format!("{key} {}", v.len());
        for n in v {
            check_word(n)?;
            let _ = write!(s, " {n}");
        }
        self.line(depth, &s);
        Ok(())
    }

    fn tree_params(&mut self, d: usize, p: &TreeParams) {
        self.value(d, "min_leaf", p.min_leaf);
        self.value(
            d,
            "max_depth",
            p.max_depth.map_or("none".to_string(), |v| v.to_string()),
        );
        self.value(
            d,
            "max_features",
            match p.max_features {
                MaxFeatures::All => "all".to_string(),
                MaxFeatures::Sqrt => "sqrt".to_string(),
                MaxFeatures::Count(c) => c.to_string(),
            },
        );
    }

    fn model(&mut self, d: usize, m: &RegressionModel) -> Result<()> {
        self.line(d, &format!("model {}", m.algorithm()));
        let i = d + 1;
        match m {
            RegressionModel::Linear(l) => {
                self.word(i, "target", &l.target_name)?;
                self.names(i, "features", &l.feature_names)?;
                self.reals(i, "weights", &l.weights);
                self.real(i, "bias", l.bias);
            }
            RegressionModel::Knn(k) => {
                self.value(i, "k", k.k);
                self.reals(i, "min", &k.min);
                self.reals(i, "range", &k.range);
                self.reals(i, "targets", &k.targets);
                let flat: Vec<f64> = k.points.iter().flatten().copied().collect();
                self.reals(i, "points", &flat);
            }
            RegressionModel::Tree(t) => self.tree(i, t),
            RegressionModel::Forest(f) => {
                self.value(i, "bootstrap", f.params.bootstrap);
                self.tree_params(i, &f.params.tree);
                let seeds: Vec<String> = f.seeds.iter().map(u64::to_string).collect();
                self.line(i, &format!("seeds {} {}", seeds.len(), seeds.join(" ")));
                for t in &f.trees {
                    self.line(i, "model tree");
                    self.tree(i + 1, t);
                    self.line(i, "end");
                }
            }
            RegressionModel::Mlp(n) => {
                self.value(i, "hidden", n.params.hidden);
                self.value(i, "epochs", n.params.epochs);
                self.real(i, "lr", n.params.learning_rate);
                self.value(i, "inputs", n.n_inputs);
                self.reals(i, "w1", &n.w1);
                self.reals(i, "b1", &n.b1);
                self.reals(i, "w2", &n.w2);
                self.real(i, "b2", n.b2);
                self.reals(i, "x_mean", &n.x_mean);
                self.reals(i, "x_scale", &n.x_scale);
                self.real(i, "y_mean", n.y_mean);
                self.real(i, "y_scale", n.y_scale);
            }
            RegressionModel::Rotation(r) => {
                let config = TrainConfig::Rotation(r.params.clone()).describe();
                self.word(i, "config", &config)?;
                self.reals(i, "center", &r.center);
                self.reals(i, "scale", &r.scale);
                self.value(i, "members", r.members.len());
                for mem in &r.members {
                    self.value(i, "identity_fallback", mem.identity_fallback);
                    self.reals(i, "rotation", &mem.rotation);
                    self.model(i, &mem.model)?;
                }
            }
        }
        self.line(d, "end");
        Ok(())
    }

    fn tree(&mut self, d: usize, t: &TreeModel) {
        self.tree_params(d, &t.params);
        self.value(d, "inputs", t.n_features);
        self.value(d, "nodes", t.nodes.len());
        for n in &t.nodes {
            match n {
                Node::Leaf { value } => self.line(d, &format!("leaf {}", real(*value))),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => self.line(
                    d,
                    &format!("split {feature} {} {left} {right}", real(*threshold)),
                ),
            }
        }
    }
}

fn check_word(s: &str) -> Result<()> {
    if s.is_empty() || s.chars().any(char::is_whitespace) {
        return Err(Error::ModelFormat(format!(
            "name '{s}' must be non-empty without whitespace"
        )));
    }
    Ok(())
}

struct Reader<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    line_no: usize,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        Reader {
            lines: text.lines().enumerate().peekable(),
            line_no: 0,
        }
    }

    fn err(&self, msg: &str) -> Error {
        Error::ModelFormat(format!("line {}: {msg}", self.line_no))
    }

    fn next(&mut self) -> Result<Vec<&'a str>> {
        for (i, line) in self.lines.by_ref() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            self.line_no = i + 1;
            return Ok(t.split_whitespace().collect());
        }
        Err(Error::ModelFormat("unexpected end of file".into()))
    }

    fn entry(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let toks = self.next()?;
        if toks[0] != key {
            return Err(self.err(&format!("expected '{key}', found '{}'", toks[0])));
        }
        Ok(toks[1..].to_vec())
    }

    fn parse<T: FromStr>(&self, tok: &str) -> Result<T> {
        tok.parse()
            .map_err(|_| self.err(&format!("cannot parse '{tok}'")))
    }

    fn scalar<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.entry(key)?;
        if v.len() != 1 {
            return Err(self.err(&format!("'{key}' takes exactly one value")));
        }
        self.parse(v[0])
    }

    fn word(&mut self, key: &str) -> Result<String> {
        self.scalar(key)
    }

    fn list<T: FromStr>(&mut self, key: &str) -> Result<Vec<T>> {
        let v = self.entry(key)?;
        let len: usize = v
            .first()
            .ok_or_else(|| self.err(&format!("'{key}' needs a length")))
            .and_then(|t| self.parse(t))?;
        if v.len() != len + 1 {
            return Err(self.err(&format!(
                "'{key}' declares {len} values, found {}",
                v.len() - 1
            )));
        }
        v[1..].iter().map(|t| self.parse(t)).collect()
    }

    fn names(&mut self, key: &str) -> Result<Vec<String>> {
        self.list(key)
    }

    fn tree_params(&mut self) -> Result<TreeParams> {
        let min_leaf = self.scalar("min_leaf")?;
        let depth: String = self.scalar("max_depth")?;
        let max_depth = if depth == "none" {
            None
        } else {
            Some(self.parse(&depth)?)
        };
        let mf: String = self.scalar("max_features")?;
        let max_features = match mf.as_str() {
            "all" => MaxFeatures::All,
            "sqrt" => MaxFeatures::Sqrt,
            other => MaxFeatures::Count(self.parse(other)?),
        };
        Ok(TreeParams {
            min_leaf,
            max_depth,
            max_features,
        })
    }

    fn end(&mut self) -> Result<()> {
        let toks = self.next()?;
        if toks != ["end"] {
            return Err(self.err(&format!("expected 'end', found '{}'", toks.join(" "))));
        }
        Ok(())
    }

    fn tree_body(&mut self) -> Result<TreeModel> {
        let params = self.tree_params()?;
        let n_features: usize = self.scalar("inputs")?;
        let count: usize = self.scalar("nodes")?;
        let mut nodes = Vec::with_capacity(count);
        for _ in 0..count {
            let t = self.next()?;
            let node = match (t[0], t.len()) {
                ("leaf", 2) => Node::Leaf {
                    value: self.parse(t[1])?,
                },
                ("split", 5) => Node::Split {
                    feature: self.parse(t[1])?,
                    threshold: self.parse(t[2])?,
                    left: self.parse(t[3])?,
                    right: self.parse(t[4])?,
                },
                _ => return Err(self.err("malformed tree node")),
            };
            nodes.push(node);
        }
        for n in &nodes {
            if let Node::Split {
                feature,
                left,
                right,
                ..
            } = *n
            {
                if feature >= n_features || left >= count || right >= count {
                    return Err(self.err("tree node index out of range"));
                }
            }
        }
        if nodes.is_empty() {
            return Err(self.err("tree has no nodes"));
        }
        Ok(TreeModel {
            params,
            n_features,
            nodes,
        })
    }

    fn model(&mut self) -> Result<RegressionModel> {
        let tag = self.entry("model")?;
        if tag.len() != 1 {
            return Err(self.err("'model' takes one tag"));
        }
        let m = match tag[0] {
            "linear" => {
                let target_name = self.word("target")?;
                let feature_names = self.names("features")?;
                let weights = self.list("weights")?;
                let bias = self.scalar("bias")?;
                RegressionModel::Linear(
                    LinearModel::new(feature_names, weights, bias, target_name)
                        .map_err(|e| self.err(&e.to_string()))?,
                )
            }
            "knn" => {
                let k: usize = self.scalar("k")?;
                let min: Vec<f64> = self.list("min")?;
                let range: Vec<f64> = self.list("range")?;
                let targets: Vec<f64> = self.list("targets")?;
                let flat: Vec<f64> = self.list("points")?;
                let p = min.len();
                if range.len() != p || flat.len() != targets.len() * p || k < 1 || k > targets.len()
                {
                    return Err(self.err("inconsistent k-NN arrays"));
                }
                let points = if p == 0 {
                    vec![Vec::new(); targets.len()]
                } else {
                    flat.chunks(p).map(<[f64]>::to_vec).collect()
                };
                RegressionModel::Knn(KnnModel {
                    k,
                    min,
                    range,
                    points,
                    targets,
                })
            }
            "tree" => RegressionModel::Tree(self.tree_body()?),
            "forest" => {
                let bootstrap = self.scalar("bootstrap")?;
                let tree = self.tree_params()?;
                let seeds: Vec<u64> = self.list("seeds")?;
                let mut trees = Vec::with_capacity(seeds.len());
                for _ in 0..seeds.len() {
                    let t = self.entry("model")?;
                    if t != ["tree"] {
                        return Err(self.err("forest members must be trees"));
                    }
                    trees.push(self.tree_body()?);
                    self.end()?;
                }
                if trees.is_empty() {
                    return Err(self.err("forest has no trees"));
                }
                RegressionModel::Forest(ForestModel {
                    params: ForestParams {
                        trees: trees.len(),
                        bootstrap,
                        tree,
                    },
                    trees,
                    seeds,
                })
            }
            "mlp" => {
                let hidden: usize = self.scalar("hidden")?;
                let epochs = self.scalar("epochs")?;
                let learning_rate = self.scalar("lr")?;
                let n_inputs: usize = self.scalar("inputs")?;
                let m = MlpModel {
                    params: MlpParams {
                        hidden,
                        epochs,
                        learning_rate,
                    },
                    n_inputs,
                    w1: self.list("w1")?,
                    b1: self.list("b1")?,
                    w2: self.list("w2")?,
                    b2: self.scalar("b2")?,
                    x_mean: self.list("x_mean")?,
                    x_scale: self.list("x_scale")?,
                    y_mean: self.scalar("y_mean")?,
                    y_scale: self.scalar("y_scale")?,
                };
                if m.w1.len() != hidden * n_inputs
                    || m.b1.len() != hidden
                    || m.w2.len() != hidden
                    || m.x_mean.len() != n_inputs
                    || m.x_scale.len() != n_inputs
                {
                    return Err(self.err("inconsistent MLP arrays"));
                }
                RegressionModel::Mlp(m)
            }
            "rotation" => {
                let config: String = self.word("config")?;
                let params = match TrainConfig::parse(&config) {
                    Ok(TrainConfig::Rotation(p)) => p,
                    _ => return Err(self.err(&format!("bad rotation config '{config}'"))),
                };
                let center: Vec<f64> = self.list("center")?;
                let scale: Vec<f64> = self.list("scale")?;
                let count: usize = self.scalar("members")?;
                let p = center.len();
                let mut members = Vec::with_capacity(count);
                for _ in 0..count {
                    let identity_fallback = self.scalar("identity_fallback")?;
                    let rotation: Vec<f64> = self.list("rotation")?;
                    let model = self.model()?;
                    if rotation.len() != p * p || model.n_features() != p {
                        return Err(self.err("rotation member has the wrong width"));
                    }
                    members.push(RotationMember {
                        rotation,
                        identity_fallback,
                        model,
                    });
                }
                if members.is_empty() || scale.len() != p {
                    return Err(self.err("inconsistent rotation model"));
                }
                RegressionModel::Rotation(RotationModel {
                    params,
                    center,
                    scale,
                    members,
                })
            }
            other => return Err(self.err(&format!("unknown model tag '{other}'"))),
        };
        self.end()?;
        Ok(m)
    }
}
