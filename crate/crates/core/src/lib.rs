//! Threshold-based inference for space-time max-stable processes.
//!
//! This crate implements a Schlather-type max-stable model with compact
//! random storm sets, fitted to threshold exceedances by a censored pairwise
//! likelihood over configurable sets of time lags. It provides:
//!
//! - semiparametric marginal modelling (empirical body + GPD tail) and the
//!   transformation to the unit Fréchet scale ([`margins`]);
//! - valid space-time correlation functions for the Gaussian component
//!   ([`correlation`]);
//! - the normalized expected overlap `alpha(h)` of random storm geometries:
//!   tilted cylinders in space-time and interval sets on the line
//!   ([`randomset`]);
//! - the bivariate exponent measure, censored pair density and pairwise /
//!   trivariate extremal coefficients ([`model`]);
//! - the censored pairwise log-likelihood kernel with deterministic parallel
//!   reduction ([`likelihood`]);
//! - box-constrained quasi-Newton maximization, staged fitting and
//!   block-jackknife variance ([`inference`], [`optim`]);
//! - exact-to-tolerance simulators for Gaussian fields, the random-set
//!   max-stable process and AR(1)/MA(1) series ([`simulate`]);
//! - asymptotic-relative-efficiency computations for pairwise likelihood
//!   estimators in simple time series models ([`efficiency`]);
//! - nonparametric censored estimators of extremal coefficients
//!   ([`empirical`]).

pub mod correlation;
pub mod efficiency;
pub mod empirical;
pub mod error;
pub mod inference;
pub mod likelihood;
pub mod margins;
pub mod model;
pub mod numeric;
pub mod optim;
pub mod panel;
pub mod randomset;
pub mod rng;
pub mod simulate;

pub use error::{Error, Result};
