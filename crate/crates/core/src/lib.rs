//! Multiple-model linear regression (MMLR).
//!
//! A dataset with several distinct linear regimes is split into disjoint row
//! subsets, each fitted by its own linear model. Local models are built from
//! small samples whose size and hypercube extent are planned from the target
//! coefficient accuracy, which keeps each round linear in the number of rows.
//!
//! The runnable programs under `examples/` walk through each capability.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod format;
pub mod linalg;
pub mod mmlr;
pub mod rng;
pub mod sampling;
pub mod synth;

pub use dataset::{load_csv, write_csv, Dataset, RowIndexSet};
pub use error::{Error, Result};
pub use linalg::{
    f_test_pvalue, normal_cdf, normal_quantile, ols_fit, ols_fit_rows, residual_variance,
    LinearModel,
};
