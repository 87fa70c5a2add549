//! Pseudo-spectral simulator for viscous gravity waves in flattened
//! (ALE) form, with the Wiener-space inequality bench used to analyse it.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod commands;
pub mod config;
pub mod diagnostics;
pub mod elliptic;
pub mod error;
pub mod evolution;
pub mod geometry;
pub mod lemmas;
pub mod runner;
pub mod spectral;
pub mod strip;
pub mod wiener;

pub use error::{Error, Result};
pub use spectral::SpectrumField;
pub use strip::{DepthGrid, StripField, StripNorm};
