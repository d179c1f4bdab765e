use rayon::prelude::*;

use super::samples::SampleSet;
use crate::kernel_space::{CoeffSeq, Kernel};
use crate::mixed_norms::{GridSignal, SampleMatrix};

/// Pointwise access to a signal at arbitrary points of `R^{n+1}`.
pub trait PointEvaluator: Sync {
    fn eval(&self, point: &[f64]) -> f64;
}

/// Multilinear interpolation of grid values.
impl PointEvaluator for GridSignal {
    fn eval(&self, point: &[f64]) -> f64 {
        self.interpolate(point)
    }
}

/// Exact evaluation of `sum c_v phi(. - v)`.
#[derive(Debug, Clone, Copy)]
pub struct Expansion<'a> {
    pub kernel: &'a Kernel,
    pub coeffs: &'a CoeffSeq,
}

impl PointEvaluator for Expansion<'_> {
    fn eval(&self, point: &[f64]) -> f64 {
        self.kernel.eval_expansion(self.coeffs, point)
    }
}

/// `f(x_i, y_j)` as an `l x m` matrix.
pub fn sample_values(f: &dyn PointEvaluator, s: &SampleSet) -> SampleMatrix {
    let values: Vec<f64> = (0..s.len())
        .into_par_iter()
        .map(|k| f.eval(s.flat_point(k)))
        .collect();
    SampleMatrix::new(s.l(), s.m(), values).expect("sample set shape is valid")
}
