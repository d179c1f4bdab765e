use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::concentration::concentration_ratio;
use super::constants::TheoryConstants;
use super::evaluate::{sample_values, Expansion, PointEvaluator};
use super::samples::{derive_seed, SampleLayout, SampleSet};
use crate::error::{Error, Result};
use crate::kernel_space::{CoeffSeq, Kernel};
use crate::mixed_norms::{
    grid_mixed_norm, recip, seq_mixed_norm, Cube, Exponents, Grid, GridSignal, SampleMatrix,
};

/// Tolerance on the declared `delta` against the measured concentration.
const DELTA_TOL: f64 = 1e-9;

/// Both sides of the two-sided sampling inequality for one signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingVerdict {
    /// `||(f(x_i, y_j))||_{l^{p,q}}`.
    pub middle: f64,
    pub lower: f64,
    pub upper: f64,
    pub norm: f64,
    /// `middle - lower`.
    pub lower_slack: f64,
    /// `upper - middle`.
    pub upper_slack: f64,
    pub lower_holds: bool,
    pub upper_holds: bool,
}

impl SamplingVerdict {
    pub fn holds(&self) -> bool {
        self.lower_holds && self.upper_holds
    }
}

/// Factors `(lower, upper)` with lower bound `lower * ||f||` and upper bound
/// `upper * ||f||`:
/// `l^{1/p} m^{1/q} (1-delta)^{pq} D^{1-pq} R^{-np} S^{-q} (1-mu)` and
/// `lm (1 + mu D^{1-pq})`.
pub fn sampling_bounds(
    l: usize,
    m: usize,
    cube: &Cube,
    e: &Exponents,
    mu: f64,
    delta: f64,
    d: f64,
) -> Result<(f64, f64)> {
    e.require_finite()?;
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::param("mu", format!("{mu} must lie in (0, 1)")));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::param("delta", format!("{delta} must lie in [0, 1)")));
    }
    let (p, q) = (e.p(), e.q());
    let pq = p * q;
    let n = cube.n as f64;
    let (lf, mf) = (l as f64, m as f64);
    let lower = lf.powf(1.0 / p)
        * mf.powf(1.0 / q)
        * (1.0 - delta).powf(pq)
        * d.powf(1.0 - pq)
        * cube.r.powf(-n * p)
        * cube.s.powf(-q)
        * (1.0 - mu);
    let upper = lf * mf * (1.0 + mu * d.powf(1.0 - pq));
    Ok((lower, upper))
}

/// Verdict from already sampled values and a known norm.
pub fn verdict_from_values(
    values: &SampleMatrix,
    norm: f64,
    factors: (f64, f64),
    e: &Exponents,
) -> SamplingVerdict {
    verdict_from_middle(seq_mixed_norm(values, e), norm, factors)
}

/// Verdict from the sampled norm `||f(X)||_{l^{p,q}}` itself.
pub fn verdict_from_middle(middle: f64, norm: f64, factors: (f64, f64)) -> SamplingVerdict {
    let lower = factors.0 * norm;
    let upper = factors.1 * norm;
    SamplingVerdict {
        middle,
        lower,
        upper,
        norm,
        lower_slack: middle - lower,
        upper_slack: upper - middle,
        lower_holds: middle >= lower,
        upper_holds: middle <= upper,
    }
}

/// Checks the sampling inequality for a grid signal. The grid must cover the
/// support of `f` and contain the cube; `exact` replaces interpolation when
/// an exact evaluator is at hand.
#[allow(clippy::too_many_arguments)]
pub fn sampling_inequality_check(
    f: &GridSignal,
    exact: Option<&dyn PointEvaluator>,
    s: &SampleSet,
    e: &Exponents,
    mu: f64,
    delta: f64,
    tc: &TheoryConstants,
) -> Result<SamplingVerdict> {
    let cube = s.cube();
    let conc = concentration_ratio(f, cube, e)?;
    if conc.delta_min > delta + DELTA_TOL {
        return Err(Error::DeltaInconsistent {
            declared: delta,
            required: conc.delta_min,
        });
    }
    let factors = sampling_bounds(s.l(), s.m(), cube, e, mu, delta, tc.d)?;
    let values = sample_values(exact.unwrap_or(f), s);
    Ok(verdict_from_values(&values, conc.total, factors, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameBounds {
    pub a_emp: f64,
    pub b_emp: f64,
}

/// Extreme ratios of sampled norm to true norm over a family in the span of
/// the kernel's translates; true norms come from synthesis on `grid`.
pub fn empirical_frame_bounds(
    kernel: &Kernel,
    family: &[CoeffSeq],
    grid: &Grid,
    s: &SampleSet,
    e: &Exponents,
) -> Result<FrameBounds> {
    if family.is_empty() {
        return Err(Error::param("family", "must not be empty"));
    }
    let mut a_emp = f64::INFINITY;
    let mut b_emp = 0.0f64;
    for c in family {
        let norm = grid_mixed_norm(&kernel.synthesize(c, grid)?, e, None)?;
        if norm == 0.0 {
            return Err(Error::ZeroSignal);
        }
        let values = sample_values(&Expansion { kernel, coeffs: c }, s);
        let ratio = seq_mixed_norm(&values, e) / norm;
        a_emp = a_emp.min(ratio);
        b_emp = b_emp.max(ratio);
    }
    Ok(FrameBounds { a_emp, b_emp })
}

/// Monte Carlo estimates for `Z = |f(P)| - mean_C |f|` with `P` uniform on
/// the cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma42Report {
    pub mean: f64,
    pub mean_se: f64,
    pub mean_ok: bool,
    pub var_bound: f64,
    pub batch_vars: Vec<f64>,
    pub batch_var_se: Vec<f64>,
    /// Share of batches with variance at most bound plus three standard errors.
    pub var_pass_fraction: f64,
    pub sup_abs: f64,
    pub sup_bound: f64,
    pub sup_ok: bool,
    pub draws: usize,
}

/// `f` must have unit `L^{p,q}` norm on `grid` (to 1e-9); `grid` must hold the
/// cube with its boundary on cell faces, since the cube average of `|f|` is
/// taken by the midpoint rule.
#[allow(clippy::too_many_arguments)]
pub fn lemma42_bound_check(
    kernel: &Kernel,
    f: &CoeffSeq,
    grid: &Grid,
    cube: &Cube,
    tc: &TheoryConstants,
    e: &Exponents,
    batches: usize,
    batch_size: usize,
    seed: u64,
) -> Result<Lemma42Report> {
    if batches == 0 || batch_size < 2 {
        return Err(Error::param(
            "batches, batch_size",
            "need at least one batch of two draws",
        ));
    }
    let signal = kernel.synthesize(f, grid)?;
    let norm = grid_mixed_norm(&signal, e, None)?;
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::param(
            "f",
            format!("norm {norm} is not 1 within 1e-9"),
        ));
    }
    let mask = grid.center_mask(cube);
    let integral: f64 = signal
        .values()
        .iter()
        .zip(&mask)
        .filter(|(_, &keep)| keep)
        .map(|(v, _)| v.abs())
        .sum::<f64>()
        * grid.cell_volume();
    let avg = integral / cube.volume();
    let eval = Expansion { kernel, coeffs: f };

    // (sum z, sum z^2, sum z^4 about the batch mean, max |z|) per batch
    let stats: Vec<(f64, f64, f64, f64)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let s = SampleSet::draw(
                cube,
                batch_size,
                1,
                derive_seed(seed, &[b as u64], 0),
                SampleLayout::Independent,
            )
            .expect("positive counts");
            let z: Vec<f64> = s.points().map(|p| eval.eval(p).abs() - avg).collect();
            let k = z.len() as f64;
            let mean = z.iter().sum::<f64>() / k;
            let m2 = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
            let m4 = z.iter().map(|v| (v - mean).powi(4)).sum::<f64>();
            let sup = z.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            (mean, m2, m4, sup)
        })
        .collect();

    let k = batch_size as f64;
    let total = (batches * batch_size) as f64;
    let mean = stats.iter().map(|s| s.0).sum::<f64>() / batches as f64;
    // pooled second moment about the grand mean
    let ss: f64 = stats.iter().map(|s| s.1 + k * (s.0 - mean).powi(2)).sum();
    let mean_se = (ss / (total - 1.0) / total).sqrt();
    let var_bound = tc.k / (cube.r.powf(cube.n as f64 * recip(e.p())) * cube.s.powf(recip(e.q())));
    let batch_vars: Vec<f64> = stats.iter().map(|s| s.1 / (k - 1.0)).collect();
    let batch_var_se: Vec<f64> = stats
        .iter()
        .map(|s| {
            let var = s.1 / k;
            ((s.2 / k - var * var).max(0.0) / k).sqrt()
        })
        .collect();
    let passes = batch_vars
        .iter()
        .zip(&batch_var_se)
        .filter(|(v, se)| **v <= var_bound + 3.0 * **se)
        .count();
    let sup_abs = stats.iter().fold(0.0f64, |a, s| a.max(s.3));
    Ok(Lemma42Report {
        mean,
        mean_se,
        mean_ok: mean.abs() <= 4.0 * mean_se,
        var_bound,
        batch_vars,
        batch_var_se,
        var_pass_fraction: passes as f64 / batches as f64,
        sup_abs,
        sup_bound: tc.k,
        sup_ok: sup_abs <= tc.k,
        draws: batches * batch_size,
    })
}
