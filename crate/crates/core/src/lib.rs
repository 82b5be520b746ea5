//! Homothetic weighted averages for ergodic flows.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversary;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod flow;
pub mod measure;
pub mod quadrature;
pub mod rng;

pub use error::{Error, Result};
