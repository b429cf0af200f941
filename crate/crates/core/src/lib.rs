//! Toroidal subgroup analysis.
//!
//! Learns compact commutative Lie group representations (subgroups of a
//! maximal torus in SO(D)) from pairs of transformed data, with closed-form
//! Bayesian inference over the transformation, invariant representations and
//! invariant metrics.

pub mod bessel;
pub mod circular;
pub mod data;
pub mod error;
pub mod inference;
pub mod learning;
pub mod metrics;
pub mod toral;

pub use error::{Result, TsaError};
