//! Mixed `L^{p,q}` / `l^{p,q}` norms on grids and finite sequences.

mod exponents;
mod grid;
pub mod io;
mod lemma41;
mod norms;

pub(crate) use exponents::recip;
pub use exponents::{holder_conjugate, Exponents};
pub use grid::{Cube, Grid, GridSignal, SampleMatrix};
pub use lemma41::{lemma41_inequality_check, InequalityVerdict, Lemma41Report};
pub use norms::{flat_lr_norm, grid_mixed_norm, seq_mixed_norm};
pub(crate) use norms::{iterated_norm, weighted_lp};
