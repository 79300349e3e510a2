//! Ridge regression whose penalty follows the sampling covariance of OLS, so
//! coefficients shrink hardest where OLS is least certain. Also contains the
//! tools to estimate that covariance under serial dependence and to run the
//! simulation and return forecasting studies.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod covariance;
pub mod error;
pub mod estimators;
pub mod io;
pub mod linalg;
pub mod realdata;
pub mod rng;
pub mod simulation;

#[cfg(test)]
mod testing;

pub use error::{Error, ErrorClass, Result};
