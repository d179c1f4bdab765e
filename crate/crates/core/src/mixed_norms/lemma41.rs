use serde::Serialize;

use super::exponents::{recip, Exponents};
use super::grid::{Cube, GridSignal, SampleMatrix};
use super::norms::{grid_mixed_norm, seq_mixed_norm};
use crate::error::Result;

/// One evaluated inequality `lhs <= rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityVerdict {
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`; negative means violated.
    pub slack: f64,
    pub holds: bool,
}

impl InequalityVerdict {
    /// `holds` allows `lhs` to exceed `rhs` by `rel_tol * max(|lhs|, |rhs|)`.
    pub fn evaluate(lhs: f64, rhs: f64, rel_tol: f64) -> Self {
        let scale = lhs.abs().max(rhs.abs());
        InequalityVerdict {
            lhs,
            rhs,
            slack: rhs - lhs,
            holds: lhs <= rhs + rel_tol * scale,
        }
    }
}

/// The three norm-comparison inequalities used to relate sampled and
/// continuous norms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma41Report {
    /// `||s||_{l^{p,q}} <= sum |s|`.
    pub seq_lower: InequalityVerdict,
    /// `sum |s| <= l^{1-1/p} m^{1-1/q} ||s||_{l^{p,q}}`.
    pub seq_upper: InequalityVerdict,
    /// `||f||_{L^{1,1}(C)} <= R^{n-n/p} S^{1-1/q} ||f||_{L^{p,q}(C)}`.
    pub l11_vs_lpq: InequalityVerdict,
    /// `||f||_{L^{p,q}(C)}^{pq} <= R^{(p-1)n} S^{q-1} D^{pq-1} ||f||_{L^{1,1}(C)}`;
    /// `None` when `p` or `q` is infinite.
    pub lpq_power_vs_l11: Option<InequalityVerdict>,
    /// Whether the supplied `D` dominates `||f||_inf / ||f||_{p,q}` on `C`.
    pub d_hypothesis_holds: bool,
}

impl Lemma41Report {
    pub fn all_hold(&self) -> bool {
        self.seq_lower.holds
            && self.seq_upper.holds
            && self.l11_vs_lpq.holds
            && self.lpq_power_vs_l11.is_none_or(|v| v.holds)
    }
}

const SEQ_TOL: f64 = 1e-12;

/// Evaluates both sides of each inequality. Violations are reported, not
/// raised: for sequences they indicate a bug, for the continuous norms
/// discretization error or an undersized `D`. The third inequality is not
/// scale invariant and presumes `f` has unit norm.
pub fn lemma41_inequality_check(
    f: &GridSignal,
    samples: &SampleMatrix,
    e: &Exponents,
    cube: &Cube,
    d: f64,
    quad_tol: f64,
) -> Result<Lemma41Report> {
    let (p, q) = (e.p(), e.q());
    let n = cube.n as f64;

    let seq = seq_mixed_norm(samples, e);
    let abs_sum: f64 = samples.values().iter().map(|v| v.abs()).sum();
    let factor =
        (samples.l() as f64).powf(1.0 - recip(p)) * (samples.m() as f64).powf(1.0 - recip(q));
    let seq_lower = InequalityVerdict::evaluate(seq, abs_sum, SEQ_TOL);
    let seq_upper = InequalityVerdict::evaluate(abs_sum, factor * seq, SEQ_TOL);

    let one = Exponents::uniform(1.0)?;
    let l11 = grid_mixed_norm(f, &one, Some(cube))?;
    let lpq = grid_mixed_norm(f, e, Some(cube))?;
    let linf = grid_mixed_norm(f, &Exponents::uniform(f64::INFINITY)?, Some(cube))?;

    let c2 = cube.r.powf(n - n * recip(p)) * cube.s.powf(1.0 - recip(q));
    let l11_vs_lpq = InequalityVerdict::evaluate(l11, c2 * lpq, quad_tol);

    let lpq_power_vs_l11 = e.is_finite().then(|| {
        let lhs = lpq.powf(p * q);
        let rhs = cube.r.powf((p - 1.0) * n) * cube.s.powf(q - 1.0) * d.powf(p * q - 1.0) * l11;
        InequalityVerdict::evaluate(lhs, rhs, quad_tol)
    });

    Ok(Lemma41Report {
        seq_lower,
        seq_upper,
        l11_vs_lpq,
        lpq_power_vs_l11,
        d_hypothesis_holds: linf <= d * lpq * (1.0 + quad_tol),
    })
}
