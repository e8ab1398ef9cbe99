//! Modeling and estimation for electromechanical resonators: a microwave
//! cavity parametrically coupled to a mechanical mode.
//!
//! All frequencies and rates are angular (rad/s) internally. Hz, dBm and
//! kelvin appear only at construction helpers and file boundaries.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backaction;
pub mod circuit;
pub mod cooling;
pub mod crosscheck;
pub mod error;
pub mod estimate;
pub mod spectrum;
pub mod system;
pub mod table;
pub mod timedomain;
pub mod trace;

pub use error::{Error, Result};
