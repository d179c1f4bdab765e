use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::bounds::{c1_constant, CoveringInputs};
use crate::error::{Error, Result};
use crate::kernel_space::{decay_envelope_check, decay_thresholds, exact_k_sup, Kernel, Lattice};
use crate::mixed_norms::{recip, Cube, Exponents};

/// Free inputs of the constant chain. The decay exponents default to one
/// above their thresholds; `eta` is the overlap radius for `A_Gamma`/`B_Gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryInputs {
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_b_frame")]
    pub b_frame: f64,
    #[serde(default)]
    pub delta: f64,
    /// Cloud resolution for the decay constant fit.
    #[serde(default = "default_decay_points")]
    pub decay_points: usize,
}

fn default_eta() -> f64 {
    0.5
}

fn default_b_frame() -> f64 {
    1.0
}

fn default_decay_points() -> usize {
    6
}

impl Default for TheoryInputs {
    fn default() -> Self {
        TheoryInputs {
            alpha: None,
            beta: None,
            eta: default_eta(),
            b_frame: default_b_frame(),
            delta: 0.0,
            decay_points: default_decay_points(),
        }
    }
}

/// Every scalar of the bound chain for one kernel, cube and exponent pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryConstants {
    pub n: usize,
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
    /// `sup_P ||K(P, .)||_{L^{p',q'}}` over `R^{n+1}`.
    pub k: f64,
    /// Same sup over the cube, divided by `(1 - delta)^{1/q}`.
    pub d: f64,
    pub a_gamma: f64,
    pub b_gamma: f64,
    pub n0: f64,
    /// Decay constant `c` fitted on the kernel.
    pub c_decay: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    /// `C = max{D_1, D_2, D_3}`.
    pub c_frame: f64,
    pub b_frame: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub g: f64,
    /// `log a = G (R+S)^{n^2+n}`; `a` itself overflows at desk scale.
    pub log_a: f64,
    pub a: f64,
    pub b: f64,
    pub omega_alpha: f64,
    pub omega_beta: f64,
}

impl TheoryConstants {
    pub fn covering_inputs(&self) -> CoveringInputs {
        CoveringInputs {
            b_frame: self.b_frame,
            c_const: self.c_frame,
            n0: self.n0,
            d: self.d,
        }
    }
}

/// `C_2 = 2^{1/(4 ln 2) - 6} (ln 2)^4 / (n+3)^4`.
pub fn c2_constant(n: usize) -> f64 {
    let ln2 = std::f64::consts::LN_2;
    2f64.powf(1.0 / (4.0 * ln2) - 6.0) * ln2.powi(4) / ((n + 3) as f64).powi(4)
}

/// `G = 2^{n+1} N0 (4(n+2)(n+3) + log D)(1 + 2(3 B C 4^{n/p'+1/q'+1})^{n+1})`.
pub fn g_constant(n: usize, e: &Exponents, n0: f64, d: f64, b_frame: f64, c_frame: f64) -> f64 {
    let nf = n as f64;
    let inner =
        3.0 * b_frame * c_frame * 4f64.powf(nf * recip(e.p_conj()) + recip(e.q_conj()) + 1.0);
    2f64.powf(nf + 1.0)
        * n0
        * (4.0 * (nf + 2.0) * (nf + 3.0) + d.ln())
        * (1.0 + 2.0 * inner.powf(nf + 1.0))
}

/// `C_3 = 2^{n+1} N0 [(R+S+2)^{n+1}(4 + log D) + C_1 (4(n+2)(n+3) + log D)]`.
pub fn c3_constant(cube: &Cube, n0: f64, d: f64, c1: f64) -> f64 {
    let nf = cube.n as f64;
    2f64.powf(nf + 1.0)
        * n0
        * ((cube.r + cube.s + 2.0).powf(nf + 1.0) * (4.0 + d.ln())
            + c1 * (4.0 * (nf + 2.0) * (nf + 3.0) + d.ln()))
}

/// `prod_{i=1..n} (alpha p' - i)`.
pub fn omega_alpha(n: usize, alpha: f64, p_conj: f64) -> f64 {
    (1..=n).map(|i| alpha * p_conj - i as f64).product()
}

/// `beta q' - 1`.
pub fn omega_beta(beta: f64, q_conj: f64) -> f64 {
    beta * q_conj - 1.0
}

/// Largest number of points among `pts` (stride `d`) within open max-norm
/// distance `eta` of a single location. Evaluated at the points just inside
/// every candidate upper corner `v + eta`.
pub fn overlap_count(pts: &[f64], d: usize, eta: f64) -> usize {
    let mut distinct: Vec<&[f64]> = pts.chunks_exact(d).collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    distinct.dedup();
    if distinct.is_empty() {
        return 0;
    }
    let tau = 1e-9 * eta.max(1.0);
    let axes: Vec<Vec<f64>> = (0..d)
        .map(|a| {
            let mut v: Vec<f64> = distinct.iter().map(|p| p[a] + eta - tau).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        })
        .collect();
    let mut best = 0;
    let mut idx = vec![0usize; d];
    let mut z = vec![0.0; d];
    loop {
        for a in 0..d {
            z[a] = axes[a][idx[a]];
        }
        let count = distinct
            .iter()
            .filter(|p| p.iter().zip(&z).all(|(u, w)| (u - w).abs() < eta))
            .count();
        best = best.max(count);
        let mut a = 0;
        loop {
            idx[a] += 1;
            if idx[a] < axes[a].len() {
                break;
            }
            idx[a] = 0;
            a += 1;
            if a == d {
                return best;
            }
        }
    }
}

/// Spatial and temporal overlap counts `(A_Gamma(eta), B_Gamma(eta))` of the
/// lattice projections.
pub fn overlap_counts(lattice: &Lattice, eta: f64) -> (usize, usize) {
    let n = lattice.n();
    let spatial: Vec<f64> = lattice.nodes().flat_map(|v| v[..n].to_vec()).collect();
    let temporal: Vec<f64> = lattice.nodes().map(|v| v[n]).collect();
    (
        overlap_count(&spatial, n, eta),
        overlap_count(&temporal, 1, eta),
    )
}

/// Largest number of nodes in a closed unit cell `k + [-1/2, 1/2]^{n+1}`.
pub fn nodes_per_unit_cell(lattice: &Lattice) -> usize {
    let mut counts: HashMap<Vec<i64>, usize> = HashMap::new();
    for v in lattice.nodes() {
        let choices: Vec<Vec<i64>> = v
            .iter()
            .map(|&u| {
                let lo = (u - 0.5).ceil() as i64;
                let hi = (u + 0.5).floor() as i64;
                (lo..=hi).collect()
            })
            .collect();
        let mut idx = vec![0usize; choices.len()];
        loop {
            let key: Vec<i64> = idx.iter().zip(&choices).map(|(&i, c)| c[i]).collect();
            *counts.entry(key).or_insert(0) += 1;
            let mut a = 0;
            loop {
                idx[a] += 1;
                if idx[a] < choices[a].len() {
                    break;
                }
                idx[a] = 0;
                a += 1;
                if a == choices.len() {
                    break;
                }
            }
            if a == choices.len() {
                break;
            }
        }
    }
    counts.values().copied().max().unwrap_or(0)
}

/// Assembles the constants for `kernel` on `cube`.
pub fn theory_constants(
    kernel: &Kernel,
    cube: &Cube,
    e: &Exponents,
    inputs: &TheoryInputs,
) -> Result<TheoryConstants> {
    if kernel.n() != cube.n {
        return Err(Error::DimensionMismatch {
            expected: kernel.n(),
            actual: cube.n,
        });
    }
    e.require_finite()?;
    let n = cube.n;
    let nf = n as f64;
    if !(0.0..1.0).contains(&inputs.delta) {
        return Err(Error::param(
            "delta",
            format!("{} must lie in [0, 1)", inputs.delta),
        ));
    }
    if !(inputs.eta > 0.0 && inputs.eta < 2.0 / nf) {
        return Err(Error::param(
            "eta",
            format!("{} must lie in (0, 2/n)", inputs.eta),
        ));
    }
    if !(inputs.b_frame > 0.0 && inputs.b_frame.is_finite()) {
        return Err(Error::param("b_frame", "must be positive"));
    }
    let (at, bt) = decay_thresholds(n, e);
    let alpha = inputs.alpha.unwrap_or(at + 1.0);
    let beta = inputs.beta.unwrap_or(bt + 1.0);
    let fit = decay_envelope_check(kernel, alpha, beta, e, inputs.decay_points)?;

    let k = exact_k_sup(kernel, e, None).value;
    let d = exact_k_sup(kernel, e, Some(cube)).value / (1.0 - inputs.delta).powf(recip(e.q()));
    let (a_gamma, b_gamma) = overlap_counts(kernel.lattice(), inputs.eta);
    let (a_gamma, b_gamma) = (a_gamma as f64, b_gamma as f64);
    let n0 = nodes_per_unit_cell(kernel.lattice()) as f64;

    let d1 = fit.c * a_gamma.powf(recip(e.p_conj())) * b_gamma.powf(recip(e.q_conj()));
    let d2 = d1 / (1.0 - nf * inputs.eta / 2.0).powf(alpha);
    let d3 = d1 / (1.0 - inputs.eta / 2.0).powf(beta);
    let c_frame = d1.max(d2).max(d3);

    let c1 = c1_constant(cube, e, inputs.b_frame, c_frame);
    let c2 = c2_constant(n);
    let c3 = c3_constant(cube, n0, d, c1);
    let g = g_constant(n, e, n0, d, inputs.b_frame, c_frame);
    let log_a = g * (cube.r + cube.s).powf(nf * nf + nf);
    let b = (2f64.sqrt() * c2).min(3.0 / (4.0 * k));
    Ok(TheoryConstants {
        n,
        delta: inputs.delta,
        alpha,
        beta,
        eta: inputs.eta,
        k,
        d,
        a_gamma,
        b_gamma,
        n0,
        c_decay: fit.c,
        d1,
        d2,
        d3,
        c_frame,
        b_frame: inputs.b_frame,
        c1,
        c2,
        c3,
        g,
        log_a,
        a: log_a.exp(),
        b,
        omega_alpha: omega_alpha(n, alpha, e.p_conj()),
        omega_beta: omega_beta(beta, e.q_conj()),
    })
}
