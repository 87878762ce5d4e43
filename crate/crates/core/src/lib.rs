//! Differentially private randomized quantization: mechanisms, exact error
//! evaluation, LP-based mechanism design, privacy auditing and experiments.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod io;
pub mod mechanisms;
pub mod quantizer;

pub use error::{Error, Result};
pub mod audit;
pub mod experiments;
pub mod lp;
pub mod optimizer;
pub mod simplex;
