//! Random samples on the study cube, concentration, the sampling inequality
//! and the closed-form probability and covering bounds.

mod bounds;
mod concentration;
mod constants;
mod evaluate;
mod inequality;
mod samples;

pub use bounds::{
    ball_covering_count, bernstein_tail_bound, c1_constant, covering_bounds, error_certificate,
    event_probability_bound, example_min_samples, main_theorem_probability, CoveringBounds,
    CoveringInputs, FailureBound, MinSamples, MinSamplesReading, ProbabilityBound, SuccessBound,
};
pub use concentration::{
    concentration_ratio, covering_grid, expansion_concentration, ConcentrationReport,
};
pub use constants::{
    c2_constant, c3_constant, g_constant, nodes_per_unit_cell, omega_alpha, omega_beta,
    overlap_count, overlap_counts, theory_constants, TheoryConstants, TheoryInputs,
};
pub use evaluate::{sample_values, Expansion, PointEvaluator};
pub use inequality::{
    empirical_frame_bounds, lemma42_bound_check, sampling_bounds, sampling_inequality_check,
    verdict_from_middle, verdict_from_values, FrameBounds, Lemma42Report, SamplingVerdict,
};
pub use samples::{covering_gap, derive_seed, PointIndex, SampleLayout, SampleSet};
