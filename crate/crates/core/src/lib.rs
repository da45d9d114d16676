//! Two-sphere geometry-based stochastic channel model for polarized MIMO
//! links with moving scatterer clusters.

// Negated comparisons are used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod antenna;
pub mod directional;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod motion;
pub mod quadrature;
pub mod realization;
pub mod rng;
pub mod scenario;
pub mod stcf;
pub mod table;

pub use error::{Error, Result};
