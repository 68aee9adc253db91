//! Regression evaluation measures over pooled (predicted, actual) pairs:
//! Pearson correlation, MAE, RMSE, and the relative errors RAE and RRSE
//! (percent of the error made by always predicting the mean actual value).

use std::fmt;

use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PredictionSet {
    predicted: Vec<f64>,
    actual: Vec<f64>,
}

impl PredictionSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut p = PredictionSet::new();
        for (a, b) in pairs {
            p.push(a, b);
        }
        p
    }

    pub fn push(&mut self, predicted: f64, actual: f64) {
        self.predicted.push(predicted);
        self.actual.push(actual);
    }

    pub fn extend(&mut self, other: &PredictionSet) {
        self.predicted.extend_from_slice(&other.predicted);
        self.actual.extend_from_slice(&other.actual);
    }

    pub fn len(&self) -> usize {
        self.predicted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicted.is_empty()
    }

    pub fn predicted(&self) -> &[f64] {
        &self.predicted
    }

    pub fn actual(&self) -> &[f64] {
        &self.actual
    }

    pub fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.predicted
            .iter()
            .copied()
            .zip(self.actual.iter().copied())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricStatus {
    Ok,
    /// Predicted or actual values have zero variance.
    RhoUndefined,
    /// All actual values are equal, so RAE and RRSE have a zero denominator.
    DenominatorZero,
}

impl MetricStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricStatus::Ok => "ok",
            MetricStatus::RhoUndefined => "rho_undefined",
            MetricStatus::DenominatorZero => "denominator_zero",
        }
    }
}

impl fmt::Display for MetricStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub rho: Option<f64>,
    pub mae: f64,
    pub rmse: f64,
    pub rae_pct: Option<f64>,
    pub rrse_pct: Option<f64>,
    pub n: usize,
    pub status: MetricStatus,
}

pub fn evaluate(p: &PredictionSet) -> Result<EvalReport> {
    let n = p.len();
    if n < 2 {
        return Err(Error::TooFewPairs(n));
    }
    let nf = n as f64;
    let mean_a = p.predicted.iter().sum::<f64>() / nf;
    let mean_b = p.actual.iter().sum::<f64>() / nf;

    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    let mut abs_err = 0.0;
    let mut sq_err = 0.0;
    let mut abs_dev = 0.0;
    for (a, b) in p.pairs() {
        let da = a - mean_a;
        let db = b - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
        abs_err += (a - b).abs();
        sq_err += (a - b) * (a - b);
        abs_dev += db.abs();
    }

    let rho = if var_a > 0.0 && var_b > 0.0 {
        Some((cov / (var_a.sqrt() * var_b.sqrt())).clamp(-1.0, 1.0))
    } else {
        None
    };
    let (rae_pct, rrse_pct) = if abs_dev > 0.0 {
        (
            Some(100.0 * abs_err / abs_dev),
            Some(100.0 * (sq_err / var_b).sqrt()),
        )
    } else {
        (None, None)
    };
    let status = if abs_dev == 0.0 {
        MetricStatus::DenominatorZero
    } else if rho.is_none() {
        MetricStatus::RhoUndefined
    } else {
        MetricStatus::Ok
    };
    Ok(EvalReport {
        rho,
        mae: abs_err / nf,
        rmse: (sq_err / nf).sqrt(),
        rae_pct,
        rrse_pct,
        n,
        status,
    })
}

/// Signed per-pair error, predicted minus actual.
pub fn error_column(p: &PredictionSet) -> Vec<f64> {
    p.pairs().map(|(a, b)| a - b).collect()
}
