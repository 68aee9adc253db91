//! Cardiac fat quantity regression toolkit.
//!
//! Extracts per-slice fat pixel tallies from color-coded CT fat masks,
//! builds regression datasets that predict one fat depot from the other
//! (or from unlabelled fat), trains and benchmarks a family of regressors
//! under pooled k-fold cross-validation, and applies or inverts published
//! linear predictors.
//!
//! Module map:
//!
//! * [`ingest`]: mask pixel classification, spacing standardization, volumes
//! * [`dataset`]: instances, tasks, dataset CSV, fold plans
//! * [`metrics`]: correlation, MAE, RMSE, RAE, RRSE over pooled predictions
//! * [`regressors`]: OLS, k-NN, regression tree, random forest, MLP, rotation forest
//! * [`fixed`]: the published linear equations and linear-model inversion
//! * [`experiment`]: cross-validation benchmark harness and ranking tables
//! * [`cli`]: the `adipredict` command-line front end

pub mod budget;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod fixed;
pub mod fmt;
pub mod ingest;
pub mod metrics;
pub mod regressors;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};

/// Build identifier in `git describe` style, e.g. `adipredict 0.1.0 (v0.1.0-3-gabc1234)`.
pub fn build_tag() -> String {
    format!(
        "adipredict {} ({})",
        env!("CARGO_PKG_VERSION"),
        env!("ADIPREDICT_GIT_DESCRIBE")
    )
}
