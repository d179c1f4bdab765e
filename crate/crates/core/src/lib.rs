//! Sampling and reconstruction in mixed Lebesgue spaces `L^{p,q}` for signals
//! in a reproducing kernel subspace, with desk-scale numerical checks.

// NaN must fail the range checks, so `!(x > 0.0)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod kernel_space;
pub mod mixed_norms;
pub mod reconstruction;
pub mod sampling_analysis;

pub use error::{Error, Result};
