//! Information geometry and matching priors for one-sided truncated families.
//!
//! A one-sided truncated family has density `q(x; θ) exp(-ψ(θ, γ))` on
//! `[γ, I₂)`. This crate computes its Fisher metric and connections, checks
//! the probability- and moment-matching prior conditions, and verifies them
//! against exact grid posteriors and Monte Carlo experiments.
//!
//! ```
//! use truncgeo::models::{ModelSpec, ParamPoint};
//!
//! let model = ModelSpec::trunc_exp();
//! let p = ParamPoint::new(vec![2.0], 0.0);
//! let lp = model.log_density(1.0, &p).unwrap();
//! assert!((lp - (2f64.ln() - 2.0)).abs() < 1e-12);
//! ```

// Negated comparisons are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod diff;
pub mod error;
pub mod expectations;
pub mod experiments;
pub mod expr;
pub mod geometry;
pub mod inference;
pub mod models;
pub mod priors;
pub mod quadrature;
pub mod special;
pub mod tensor;

pub use error::{Error, Result};

/// Version string written into every report and CSV header.
pub const TOOL_VERSION: &str = concat!("truncgeo ", env!("CARGO_PKG_VERSION"));
