//! Published linear predictors and algebraic inversion of linear models.
//!
//! Three fixed equations are shipped:
//!
//! * `eq8`: mediastinal (green) from epicardial (red) counts, fitted by OLS
//!   inside cross-validation
//! * `eq9`: epicardial (red) from mediastinal (green), fitted on all data
//! * `eq10`: the algebraic inversion of `eq8`, solved for red
//!
//! None carries a grey term. Predictions are raw affine values and may be
//! negative.

use std::fmt;
use std::str::FromStr;

use crate::dataset::FeatureSource;
use crate::regressors::LinearModel;
use crate::{Error, Result};

/// Coefficients below this magnitude cannot be solved for.
pub const INVERT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FixedEquation {
    Eq8,
    Eq9,
    Eq10,
}

impl FixedEquation {
    pub const ALL: [FixedEquation; 3] =
        [FixedEquation::Eq8, FixedEquation::Eq9, FixedEquation::Eq10];

    pub fn id(self) -> &'static str {
        match self {
            FixedEquation::Eq8 => "eq8",
            FixedEquation::Eq9 => "eq9",
            FixedEquation::Eq10 => "eq10",
        }
    }

    pub fn target_name(self) -> &'static str {
        match self {
            FixedEquation::Eq8 => "green",
            FixedEquation::Eq9 | FixedEquation::Eq10 => "red",
        }
    }

    fn table(self) -> (&'static str, [f64; 5], f64) {
        match self {
            FixedEquation::Eq8 => (
                "red",
                [-1.2295, -7.4448, -0.9017, -72.8534, 233.0906],
                230102.0526,
            ),
            FixedEquation::Eq9 => (
                "green",
                [-0.4608, -1.3373, -0.4736, -54.5244, 47.9363],
                123509.7603,
            ),
            FixedEquation::Eq10 => (
                "green",
                [-0.8133, -6.0551, -0.7334, -59.2545, 189.5816],
                187150.9171,
            ),
        }
    }

    /// The equation as a [`LinearModel`] over
    /// `(red|green, blue, black, slice_index, images_qnt)`.
    pub fn model(self) -> LinearModel {
        let (lead, weights, bias) = self.table();
        let names = [lead, "blue", "black", "slice_index", "images_qnt"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        LinearModel::new(names, weights.to_vec(), bias, self.target_name())
            .expect("five names, five weights")
    }
}

impl fmt::Display for FixedEquation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "fixed:{}", self.id())
    }
}

impl FromStr for FixedEquation {
    type Err = Error;

    /// Accepts `fixed:eq8` or bare `eq8` (case-insensitive).
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let id = lower.strip_prefix("fixed:").unwrap_or(&lower);
        FixedEquation::ALL
            .into_iter()
            .find(|e| e.id() == id)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown fixed model '{s}' (expected fixed:eq8, fixed:eq9 or fixed:eq10)"
                ))
            })
    }
}

/// Evaluates a published equation on one slice.
///
/// Panics only if `counts` lacks one of the five standard columns, which
/// cannot happen for [`crate::ingest::SliceCounts`] or
/// [`crate::dataset::SliceRecord`].
pub fn predict_fixed(id: FixedEquation, counts: &impl FeatureSource) -> f64 {
    id.model()
        .predict_source(counts)
        .expect("slice counts expose every fixed-model feature")
}

/// Rewrites `target = b + Σ w_j f_j` as an equation for `solve_for`.
///
/// The old target takes `solve_for`'s position in the feature list, so
/// inverting twice restores the original layout.
pub fn invert_linear(m: &LinearModel, solve_for: &str) -> Result<LinearModel> {
    let pos = m
        .feature_names
        .iter()
        .position(|n| n == solve_for)
        .ok_or_else(|| Error::UnknownFeature(solve_for.to_string()))?;
    let c = m.weights[pos];
    if !(c.abs() > INVERT_EPS) {
        return Err(Error::NotInvertible {
            feature: solve_for.to_string(),
            coefficient: c,
        });
    }
    let mut names = m.feature_names.clone();
    names[pos] = m.target_name.clone();
    let weights = m
        .weights
        .iter()
        .enumerate()
        .map(|(j, w)| if j == pos { 1.0 / c } else { -w / c })
        .collect();
    LinearModel::new(names, weights, -m.bias / c, solve_for)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{SliceCounts, VoxelSpacing};
    use proptest::prelude::*;

    fn counts(red: f64, green: f64, blue: f64, black: f64, idx: u32, qnt: u32) -> SliceCounts {
        SliceCounts {
            patient_id: "p".into(),
            slice_index: idx,
            images_qnt: qnt,
            red,
            green,
            blue,
            grey: 7.0,
            black,
            spacing: VoxelSpacing::unit(),
        }
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn intercept_anchors() {
        let z = counts(0.0, 0.0, 0.0, 0.0, 0, 0);
        assert_eq!(predict_fixed(FixedEquation::Eq8, &z), 230102.0526);
        assert_eq!(predict_fixed(FixedEquation::Eq9, &z), 123509.7603);
        assert_eq!(predict_fixed(FixedEquation::Eq10, &z), 187150.9171);
    }

    #[test]
    fn eq8_unit_red() {
        let c = counts(1.0, 0.0, 0.0, 0.0, 0, 0);
        assert!((predict_fixed(FixedEquation::Eq8, &c) - 230100.8231).abs() < 1e-9);
    }

    #[test]
    fn grey_is_ignored() {
        let mut a = counts(10.0, 20.0, 30.0, 40.0, 5, 50);
        let before = predict_fixed(FixedEquation::Eq9, &a);
        a.grey = 1e9;
        assert_eq!(predict_fixed(FixedEquation::Eq9, &a), before);
        assert!(FixedEquation::Eq8.model().weight("grey").is_none());
    }

    #[test]
    fn inverting_eq8_gives_eq10() {
        let inv = invert_linear(&FixedEquation::Eq8.model(), "red").unwrap();
        let eq10 = FixedEquation::Eq10.model();
        assert_eq!(inv.feature_names, eq10.feature_names);
        assert_eq!(inv.target_name, "red");
        for (a, b) in inv.weights.iter().zip(&eq10.weights) {
            assert!(rel(*a, *b) < 1e-3, "{a} vs {b}");
        }
        assert!(rel(inv.bias, eq10.bias) < 1e-3);
    }

    #[test]
    fn double_inversion_is_identity() {
        for e in FixedEquation::ALL {
            let m = e.model();
            let lead = m.feature_names[0].clone();
            let back = invert_linear(&invert_linear(&m, &lead).unwrap(), &m.target_name).unwrap();
            assert_eq!(back.feature_names, m.feature_names);
            assert_eq!(back.target_name, m.target_name);
            for (a, b) in back.weights.iter().zip(&m.weights) {
                assert!(rel(*a, *b) < 1e-12);
            }
            assert!(rel(back.bias, m.bias) < 1e-12);
        }
    }

    #[test]
    fn zero_coefficient_is_not_invertible() {
        let m = LinearModel::new(vec!["a".into(), "b".into()], vec![0.0, 2.0], 1.0, "y").unwrap();
        assert!(matches!(
            invert_linear(&m, "a"),
            Err(Error::NotInvertible { .. })
        ));
        let tiny = LinearModel::new(vec!["a".into()], vec![1e-13], 1.0, "y").unwrap();
        assert!(matches!(
            invert_linear(&tiny, "a"),
            Err(Error::NotInvertible { .. })
        ));
        assert!(matches!(
            invert_linear(&m, "zzz"),
            Err(Error::UnknownFeature(_))
        ));
    }

    #[test]
    fn parse_names() {
        assert_eq!(
            "fixed:eq8".parse::<FixedEquation>().unwrap(),
            FixedEquation::Eq8
        );
        assert_eq!(
            "EQ10".parse::<FixedEquation>().unwrap(),
            FixedEquation::Eq10
        );
        assert!("fixed:eq11".parse::<FixedEquation>().is_err());
        assert_eq!(FixedEquation::Eq9.to_string(), "fixed:eq9");
    }

    proptest! {
        #[test]
        fn eq8_then_inverse_recovers_red(
            red in 0.0f64..1e6, blue in 0.0f64..1e6, black in 0.0f64..1e6,
            idx in 0u32..60, qnt in 1u32..60,
        ) {
            let c = counts(red, 0.0, blue, black, idx, qnt);
            let green = predict_fixed(FixedEquation::Eq8, &c);
            let inv = invert_linear(&FixedEquation::Eq8.model(), "red").unwrap();
            let back = inv.predict_source(&counts(0.0, green, blue, black, idx, qnt)).unwrap();
            // the round trip cancels terms of size ~1e7, so compare against that scale
            let scale = red.abs().max(green.abs()).max(1.0);
            prop_assert!((back - red).abs() <= 1e-9 * scale, "{} vs {}", back, red);
        }

        #[test]
        fn eq10_tracks_exact_inverse(
            green in -1e6f64..1e6, blue in -1e6f64..1e6, black in -1e6f64..1e6,
            idx in 0u32..60, qnt in 0u32..60,
        ) {
            let c = counts(0.0, green, blue, black, idx, qnt);
            let inv = invert_linear(&FixedEquation::Eq8.model(), "red").unwrap();
            let exact = inv.predict_source(&c).unwrap();
            let published = predict_fixed(FixedEquation::Eq10, &c);
            // coefficient-wise 1e-3 relative bounds the difference by 1e-3 Σ|w_j x_j|
            let mag = inv.bias.abs() + inv.feature_names.iter().zip(&inv.weights)
                .map(|(n, w)| (w * c.feature(n).unwrap()).abs()).sum::<f64>();
            prop_assert!((exact - published).abs() <= 1e-3 * mag);
        }
    }
}
