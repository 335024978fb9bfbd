//! Core of a syndromic surveillance pipeline: short-message classification
//! into six syndromes, per-city hourly count storage, and EARS C2 alerting.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aberration;
pub mod classifier;
pub mod error;
pub mod eval;
pub mod exec;
pub mod geo;
pub mod nb;
pub mod pipeline;
pub mod store;
pub mod svm;
pub mod syndrome;
pub mod text;

pub use error::{Error, Result};
pub use syndrome::{Label, Syndrome};
