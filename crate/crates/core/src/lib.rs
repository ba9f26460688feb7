//! Firm-panel engine for production-function markups and takeover effects.
//!
//! The crate is organised around the stages of the pipeline:
//!
//! - [`panel`]: ingest, validate, deflate and derive firm-year variables.
//! - [`prodfn`]: per-industry production functions (OLS and the ACF proxy
//!   two-stage GMM estimator) and output elasticities.
//! - [`markup`]: firm-year markups `mu = theta / alpha`, aggregates and
//!   distributions.
//! - [`did`]: doubly robust staggered difference-in-differences, with
//!   aggregation, event studies, pretrend tests and multiplier bootstrap
//!   inference.
//! - [`psm`]: nearest-neighbour propensity matching, balance diagnostics and
//!   the two-way fixed-effects regression on the matched sample.
//! - [`vertical`]: horizontal / vertical / other deal classification from
//!   input-output technical coefficients.
//! - [`simgen`]: synthetic panels with known ground truth, plus a brute-force
//!   reference implementation of the group-time estimator.
//!
//! Numerical building blocks shared by the estimators live in [`linalg`],
//! [`logit`] and [`stats`]; CSV plumbing in [`table`].

pub mod did;
pub mod error;
pub mod linalg;
pub mod logit;
pub mod markup;
pub mod panel;
pub mod prodfn;
pub mod psm;
pub mod simgen;
pub mod stats;
pub mod table;
pub mod vertical;

pub use error::{Error, Result};
