//! Degeneracy-aware resilience metrics for virtualized network deployments.

// `!(x > 0.0)` is used on purpose so NaN fails validation too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arq;
pub mod error;
pub mod fixtures;
pub mod fss;
pub mod generator;
pub mod harness;
pub mod io;
pub mod mldi;
pub mod model;
pub mod rng;

pub use error::{Error, Result};
