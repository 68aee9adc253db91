//! Synthetic scans with a known affine relation between fat depots.
//!
//! Each patient gets a slice count, a field-of-view pixel total and fat
//! amplitudes. Fat areas follow smooth bell-shaped profiles along the
//! axial direction; background is whatever the body outline leaves, so
//! it does not pin the fat columns to an exact sum. The target column is
//! then overwritten with `bias + Σ w_f · f + N(0, noise_sd²)`, clipped at
//! zero because counts cannot be negative.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{FeatureSource, SliceRecord};
use crate::{Error, Result};

const SYNTH_COLUMNS: [&str; 7] = [
    "red",
    "green",
    "blue",
    "grey",
    "black",
    "slice_index",
    "images_qnt",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub patients: usize,
    pub min_slices: u32,
    pub max_slices: u32,
    /// Column overwritten by the affine model: `red` or `green`.
    pub target: String,
    pub weights: Vec<(String, f64)>,
    pub bias: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            patients: 20,
            min_slices: 40,
            max_slices: 56,
            target: "green".into(),
            weights: vec![
                ("red".into(), 1.5),
                ("blue".into(), 0.8),
                ("slice_index".into(), -20.0),
            ],
            bias: 2000.0,
            noise_sd: 100.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.patients == 0 {
            return Err(Error::InvalidConfig("need at least one patient".into()));
        }
        if self.min_slices < 1 || self.min_slices > self.max_slices {
            return Err(Error::InvalidConfig(format!(
                "bad slice range {}..={}",
                self.min_slices, self.max_slices
            )));
        }
        if self.target != "red" && self.target != "green" {
            return Err(Error::InvalidConfig(format!(
                "synthetic target must be red or green, got '{}'",
                self.target
            )));
        }
        for (name, w) in &self.weights {
            if name == &self.target || !SYNTH_COLUMNS.contains(&name.as_str()) {
                return Err(Error::UnknownFeature(name.clone()));
            }
            if !w.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "weight for {name} is not finite"
                )));
            }
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0 && self.bias.is_finite()) {
            return Err(Error::InvalidConfig(
                "noise_sd must be >= 0 and bias finite".into(),
            ));
        }
        Ok(())
    }

    /// Parses `red=1.5,blue=0.8` into weights.
    pub fn parse_weights(s: &str) -> Result<Vec<(String, f64)>> {
        s.split(',')
            .filter(|t| !t.trim().is_empty())
            .map(|t| {
                let (k, v) = t.split_once('=').ok_or_else(|| {
                    Error::InvalidConfig(format!("expected name=value, got '{t}'"))
                })?;
                let v: f64 = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("bad weight '{v}'")))?;
                Ok((k.trim().to_string(), v))
            })
            .collect()
    }
}

fn bell(t: f64, width: f64) -> f64 {
    (PI * t).sin().max(0.0).powf(width)
}

/// Generates dataset rows; identical specs give identical rows.
pub fn generate(spec: &SynthSpec) -> Result<Vec<SliceRecord>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let jitter = Normal::new(0.0, 0.04).expect("valid sd");
    let noise = Normal::new(0.0, spec.noise_sd).expect("valid sd");
    let mut out = Vec::new();
    for p in 0..spec.patients {
        let qnt = rng.random_range(spec.min_slices..=spec.max_slices);
        let side: f64 = rng.random_range(420.0..560.0);
        let total = (side * side).round();
        let body = total * rng.random_range(0.35..0.6);
        let red_amp = rng.random_range(3000.0..12000.0);
        let green_amp = rng.random_range(4000.0..15000.0);
        let blue_amp = rng.random_range(600.0..1800.0);
        let grey_amp = rng.random_range(8000.0..30000.0);
        let shift = rng.random_range(-0.08..0.08);
        for s in 1..=qnt {
            let t = ((s as f64 - 0.5) / qnt as f64 + shift).clamp(0.0, 1.0);
            let mut jit = |amp: f64, w: f64| {
                (amp * bell(t, w) * (1.0 + jitter.sample(&mut rng)))
                    .max(0.0)
                    .round()
            };
            let red = jit(red_amp, 1.5);
            let green = jit(green_amp, 0.8);
            let blue = jit(blue_amp, 0.5);
            let grey = jit(grey_amp, 1.0);
            let outline = body * (0.85 + 0.15 * bell(t, 1.0));
            let black = (total - outline).max(0.0).round();
            let mut r = SliceRecord {
                patient_id: format!("synth{:03}", p + 1),
                slice_index: s,
                images_qnt: qnt,
                red,
                green,
                blue,
                grey,
                black,
            };
            let mut y = spec.bias + noise.sample(&mut rng);
            for (name, w) in &spec.weights {
                y += w * r.feature(name).expect("validated column");
            }
            let y = y.max(0.0);
            match spec.target.as_str() {
                "red" => r.red = y,
                _ => r.green = y,
            }
            out.push(r);
        }
    }
    Ok(out)
}
