//! Iterative reconstruction from samples: Voronoi partition of unity,
//! quasi-interpolation, the pre-contraction `S_X = T Q_X` and its
//! fixed-point iteration.

mod iterate;
mod partition;

pub use crate::sampling_analysis::error_certificate;
pub use iterate::{
    contraction_factor, functional_grid, iterate_reconstruct, ContractionFactor, IterateOptions,
    Reconstruction, ReconstructionTrace, SamplingOperator, StopReason, TraceRow,
};
pub use partition::{build_partition, quasi_interpolate, PartitionOfUnity};

use crate::error::Result;
use crate::kernel_space::{Applied, Kernel};
use crate::mixed_norms::SampleMatrix;

/// `S_X f = T Q_X f` on the partition grid.
pub fn approx_project(
    kernel: &Kernel,
    pu: &PartitionOfUnity,
    values: &SampleMatrix,
) -> Result<Applied> {
    kernel.apply(&quasi_interpolate(pu, values)?)
}
