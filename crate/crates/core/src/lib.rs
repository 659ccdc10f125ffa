//! Spectrum broadcast structures in the illuminated-sphere decoherence model.
//!
//! Two tiers live side by side:
//!
//! * [`asymptotics`] evaluates the closed-form large-box expressions for the
//!   decoherence factor, decoherence time, micro/macro overlaps and the
//!   broadcast timescale, fed by the discretized photon environment in
//!   [`scatter`].
//! * [`oracle`] simulates the post-scattering system/fraction state exactly
//!   for small photon numbers, exploiting the controlled-unitary structure so
//!   that only the observed fraction is ever assembled densely.
//!
//! [`bounds`] implements the continuity/Holevo inequality chain bounding
//! `|H_S - I|`, [`pfcast`] the stationary-spectrum broadcasting construction,
//! and [`runs`] the configuration-driven pipelines behind the `sbs` binary.

// negated comparisons below deliberately reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod bounds;
pub mod config;
pub mod error;
pub mod oracle;
pub mod output;
pub mod pfcast;
pub mod qmath;
pub mod runs;
pub mod scatter;

pub use error::{Error, Result};
