use serde::{Deserialize, Serialize};

use super::constants::TheoryConstants;
use crate::error::{Error, Result};
use crate::mixed_norms::{recip, Cube, Exponents};

/// A probability-type bound reported verbatim, with its natural log where
/// the raw value may overflow, a copy clamped to `[0, 1]` and a flag set
/// when the raw value carries no information.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityBound {
    pub raw: f64,
    pub clamped: f64,
    pub vacuous: bool,
}

impl ProbabilityBound {
    fn new(raw: f64) -> Self {
        ProbabilityBound {
            raw,
            clamped: if raw.is_nan() {
                1.0
            } else {
                raw.clamp(0.0, 1.0)
            },
            vacuous: !(0.0..=1.0).contains(&raw),
        }
    }
}

/// Upper bound on a failure probability of the form `exp(log_value)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FailureBound {
    pub log_value: f64,
    #[serde(flatten)]
    pub bound: ProbabilityBound,
}

impl FailureBound {
    fn from_log(log_value: f64) -> Self {
        let raw = log_value.exp();
        let mut bound = ProbabilityBound::new(raw);
        bound.vacuous = raw > 1.0;
        FailureBound { log_value, bound }
    }
}

/// Lower bound on a success probability, `1 - exp(log_failure)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessBound {
    pub log_failure: f64,
    #[serde(flatten)]
    pub bound: ProbabilityBound,
}

impl SuccessBound {
    fn from_log_failure(log_failure: f64) -> Self {
        SuccessBound {
            log_failure,
            bound: ProbabilityBound::new(-log_failure.exp_m1()),
        }
    }
}

/// `2 exp(-lambda^2 / (2 lm sigma^2 + 2 M lambda / 3))`, in `[0, 2]`.
pub fn bernstein_tail_bound(lambda: f64, l: u64, m: u64, sigma2: f64, big_m: f64) -> Result<f64> {
    if !(lambda >= 0.0 && sigma2 >= 0.0 && big_m >= 0.0) {
        return Err(Error::param("lambda, sigma2, M", "must be nonnegative"));
    }
    if lambda == 0.0 {
        return Ok(2.0);
    }
    let denom = 2.0 * (l * m) as f64 * sigma2 + 2.0 / 3.0 * big_m * lambda;
    if denom == 0.0 {
        return Err(Error::param(
            "sigma2, M",
            "cannot both vanish when lambda > 0",
        ));
    }
    Ok(2.0 * (-lambda * lambda / denom).exp())
}

fn check_cube(cube: &Cube, tc: &TheoryConstants) -> Result<()> {
    if cube.n != tc.n {
        return Err(Error::DimensionMismatch {
            expected: tc.n,
            actual: cube.n,
        });
    }
    Ok(())
}

/// `3a exp(-b lambda^2 / (12 lm R^{-n/p} S^{-1/q} + lambda))`.
pub fn event_probability_bound(
    lambda: f64,
    l: u64,
    m: u64,
    cube: &Cube,
    tc: &TheoryConstants,
    e: &Exponents,
) -> Result<FailureBound> {
    check_cube(cube, tc)?;
    if !(lambda >= 0.0) {
        return Err(Error::param("lambda", "must be nonnegative"));
    }
    let n = cube.n as f64;
    let lm = (l * m) as f64;
    let denom = 12.0 * lm * cube.r.powf(-n * recip(e.p())) * cube.s.powf(-recip(e.q())) + lambda;
    Ok(FailureBound::from_log(
        3f64.ln() + tc.log_a - tc.b * lambda * lambda / denom,
    ))
}

fn check_mu_delta(mu: f64, delta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&mu) {
        return Err(Error::param("mu", format!("{mu} must lie in [0, 1)")));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::param("delta", format!("{delta} must lie in [0, 1)")));
    }
    Ok(())
}

/// Exponent of the main failure bound without the `b` and `log(3a)` parts:
/// `mu^2 lm (1-delta)^{2pq} D^{2(1-pq)} / (12 R^{2np} S^{2q} + D^{1-pq} R^{np} S^q)`.
fn main_exponent(lm: f64, cube: &Cube, mu: f64, delta: f64, d: f64, p: f64, q: f64) -> f64 {
    let n = cube.n as f64;
    let pq = p * q;
    let num = mu * mu * lm * (1.0 - delta).powf(2.0 * pq) * d.powf(2.0 * (1.0 - pq));
    num / main_denominator(cube, d, p, q, n)
}

fn main_denominator(cube: &Cube, d: f64, p: f64, q: f64, n: f64) -> f64 {
    let pq = p * q;
    12.0 * cube.r.powf(2.0 * n * p) * cube.s.powf(2.0 * q)
        + d.powf(1.0 - pq) * cube.r.powf(n * p) * cube.s.powf(q)
}

/// `1 - 3a exp(-b mu^2 lm (1-delta)^{2pq} D^{2(1-pq)} / (12 R^{2np} S^{2q} + D^{1-pq} R^{np} S^q))`.
pub fn main_theorem_probability(
    l: u64,
    m: u64,
    cube: &Cube,
    mu: f64,
    delta: f64,
    tc: &TheoryConstants,
    e: &Exponents,
) -> Result<SuccessBound> {
    check_cube(cube, tc)?;
    e.require_finite()?;
    check_mu_delta(mu, delta)?;
    let x = main_exponent((l * m) as f64, cube, mu, delta, tc.d, e.p(), e.q());
    Ok(SuccessBound::from_log_failure(
        3f64.ln() + tc.log_a - tc.b * x,
    ))
}

/// Inputs of the finite-dimensional approximation and covering estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoveringInputs {
    pub b_frame: f64,
    /// `C = max{D_1, D_2, D_3}`.
    pub c_const: f64,
    pub n0: f64,
    pub d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoveringBounds {
    /// Truncation threshold with the `R^{n/q} S^{1/q}` factor.
    pub n_truncation: f64,
    /// Threshold used for the dimension count.
    pub n_dimension: f64,
    pub c1: f64,
    pub d_eps: f64,
    /// `log N(eps) <= d_eps log(8D/eps)`.
    pub log_n_eps: f64,
    pub n_eps: f64,
}

/// `(2(4/n + S + 1)^{nq} + (4/n + R + 1)^q)^{1/q}`.
fn tail_factor(cube: &Cube, q: f64) -> f64 {
    let n = cube.n as f64;
    let a = 2.0 * (4.0 / n + cube.s + 1.0).powf(n * q);
    let b = (4.0 / n + cube.r + 1.0).powf(q);
    (a + b).powf(1.0 / q)
}

fn frame_power(e: &Exponents, n: f64, extra: f64) -> f64 {
    4f64.powf(n * recip(e.p_conj()) + recip(e.q_conj()) + extra)
}

/// `C_1 = (B C 4^{n/p'+1/q'+1} (2(4/n+S+1)^{nq} + (4/n+R+1)^q)^{1/q})^{n+1}`.
pub fn c1_constant(cube: &Cube, e: &Exponents, b_frame: f64, c_const: f64) -> f64 {
    let n = cube.n as f64;
    (b_frame * c_const * frame_power(e, n, 1.0) * tail_factor(cube, e.q())).powf(n + 1.0)
}

/// Truncation thresholds, `d_eps` and the covering count for `eps`.
pub fn covering_bounds(
    eps: f64,
    cube: &Cube,
    e: &Exponents,
    c: &CoveringInputs,
) -> Result<CoveringBounds> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::param("epsilon", format!("{eps} must lie in (0, 1)")));
    }
    e.require_finite()?;
    for (name, v) in [
        ("B_frame", c.b_frame),
        ("C", c.c_const),
        ("N0", c.n0),
        ("D", c.d),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "covering inputs",
                reason: format!("{name} = {v} must be positive"),
            });
        }
    }
    let n = cube.n as f64;
    let q = e.q();
    let (r, s) = (cube.r, cube.s);
    let tail = tail_factor(cube, q);
    let eps_pow = eps.powf(-1.0 / (n + 2.0));
    let n_truncation = r
        + s
        + 2.0 / n
        + c.b_frame
            * c.c_const
            * frame_power(e, n, 0.5)
            * tail
            * r.powf(n / q)
            * s.powf(1.0 / q)
            * eps_pow;
    let n_dimension = r + s + 2.0 + c.b_frame * c.c_const * frame_power(e, n, 1.0) * tail * eps_pow;
    let c1 = c1_constant(cube, e, c.b_frame, c.c_const);
    let d_eps = 2f64.powf(n + 1.0)
        * c.n0
        * ((r + s + 2.0).powf(n + 1.0) + c1 * eps.powf(-(n + 1.0) / (n + 2.0)));
    let log_n_eps = d_eps * (8.0 * c.d / eps).ln();
    Ok(CoveringBounds {
        n_truncation,
        n_dimension,
        c1,
        d_eps,
        log_n_eps,
        n_eps: log_n_eps.exp(),
    })
}

/// `(2r/r1 + 1)^s` balls of radius `r1` cover a closed radius-`r` ball in
/// dimension `s`.
pub fn ball_covering_count(r: f64, r1: f64, s: u32) -> Result<f64> {
    if !(r > 0.0 && r1 > 0.0) {
        return Err(Error::param("r, r1", "must be positive"));
    }
    Ok((2.0 * r / r1 + 1.0).powi(s as i32))
}

/// How the closing sample-count relation, which has `lm` on both sides, is
/// solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinSamplesReading {
    /// Multiply through: `(lm)^2 > X`.
    #[default]
    Squared,
    /// Drop the right-hand `lm`: `lm > X`.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinSamples {
    pub reading: MinSamplesReading,
    /// `X` with the right-hand `lm` removed.
    pub x: f64,
    /// Real threshold: `sqrt(X)` or `X`.
    pub threshold: f64,
    /// Smallest integer strictly above the threshold (as a float; it can
    /// exceed `u64`).
    pub lm: f64,
}

/// Required `lm` from the closing example, with `b` replaced by
/// `1/(2^10 (n+3)^4)`.
#[allow(clippy::too_many_arguments)]
pub fn example_min_samples(
    cube: &Cube,
    e: &Exponents,
    mu: f64,
    delta: f64,
    eps_fail: f64,
    g: f64,
    d: f64,
    reading: MinSamplesReading,
) -> Result<MinSamples> {
    e.require_finite()?;
    check_mu_delta(mu, delta)?;
    if !(mu > 0.0) {
        return Err(Error::param("mu", "must be positive"));
    }
    if !(eps_fail > 0.0 && eps_fail < 1.0) {
        return Err(Error::param(
            "epsilon_fail",
            format!("{eps_fail} must lie in (0, 1)"),
        ));
    }
    let n = cube.n as f64;
    let (p, q) = (e.p(), e.q());
    let pq = p * q;
    let lead = 1024.0
        * (n + 3.0).powi(4)
        * (g * (cube.r + cube.s).powf(n * n + n) + (3.0 / eps_fail).ln());
    let x = lead * main_denominator(cube, d, p, q, n)
        / (mu * mu * (1.0 - delta).powf(2.0 * pq) * d.powf(2.0 * (1.0 - pq)));
    let threshold = match reading {
        MinSamplesReading::Squared => x.sqrt(),
        MinSamplesReading::Linear => x,
    };
    Ok(MinSamples {
        reading,
        x,
        threshold,
        lm: threshold.floor() + 1.0,
    })
}

/// `(1 + gamma)/(1 - gamma) gamma^{r+1} ||f||`.
pub fn error_certificate(gamma: f64, f_norm: f64, r: u32) -> Result<f64> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::NotContractive(gamma));
    }
    Ok((1.0 + gamma) / (1.0 - gamma) * gamma.powi(r as i32 + 1) * f_norm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bernstein_reference_point() {
        let v = bernstein_tail_bound(1.0, 1, 1, 1.0, 0.0).unwrap();
        assert!((v - 2.0 * (-0.5f64).exp()).abs() < 1e-15);
        assert!((v - 1.21306).abs() < 1e-5);
        assert_eq!(bernstein_tail_bound(0.0, 3, 3, 0.0, 0.0).unwrap(), 2.0);
        assert_eq!(bernstein_tail_bound(1e200, 1, 1, 1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn certificate_arithmetic() {
        assert_eq!(error_certificate(0.5, 1.0, 3).unwrap(), 0.1875);
        assert_eq!(error_certificate(0.0, 4.0, 0).unwrap(), 0.0);
        assert!(error_certificate(1.0, 1.0, 0).is_err());
    }

    #[test]
    fn prop_covering_count() {
        assert_eq!(ball_covering_count(1.5, 1.5, 3).unwrap(), 27.0);
    }

    #[test]
    fn success_bound_flags() {
        let s = SuccessBound::from_log_failure(1e6);
        assert!(s.bound.vacuous && s.bound.raw == f64::NEG_INFINITY && s.bound.clamped == 0.0);
        let s = SuccessBound::from_log_failure(-5.0);
        assert!(!s.bound.vacuous && s.bound.raw < 1.0);
    }
}
