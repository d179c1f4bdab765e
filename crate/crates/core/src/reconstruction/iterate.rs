use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::partition::PartitionOfUnity;
use crate::error::{Error, Result};
use crate::kernel_space::{
    kernel_w_norm, modulus_w_eps, CoeffSeq, Kernel, Stencil, SUPPORT_RADIUS,
};
use crate::mixed_norms::{grid_mixed_norm, Cube, Exponents, Grid, GridSignal, SampleMatrix};
use crate::sampling_analysis::error_certificate;

/// `S_X = T Q_X` restricted to the span of the translates, as two sparse
/// factors: `W[v][k] = <beta_k, phi_v>` (midpoint rule on the partition grid)
/// and `E[k][v] = phi_v(P_k)` (exact).
#[derive(Debug, Clone)]
pub struct SamplingOperator {
    w: Vec<Vec<(u32, f64)>>,
    e: Vec<Vec<(u32, f64)>>,
    nodes: usize,
}

impl SamplingOperator {
    pub fn new(kernel: &Kernel, pu: &PartitionOfUnity) -> Result<Self> {
        let grid = pu.grid();
        let lat = kernel.lattice();
        if grid.n() != kernel.n() {
            return Err(Error::DimensionMismatch {
                expected: kernel.n(),
                actual: grid.n(),
            });
        }
        let vol = grid.cell_volume();
        let w: Vec<Vec<(u32, f64)>> = (0..lat.len())
            .into_par_iter()
            .map(|i| {
                let mut acc: Vec<(u32, f64)> = Vec::new();
                grid.for_each_in_box(&kernel.node_ranges(grid, i), |flat, z| {
                    if let Some(k) = pu.owner(flat) {
                        let v = kernel.translate(i, z);
                        if v != 0.0 {
                            acc.push((k as u32, v * vol));
                        }
                    }
                });
                // merge per sample in cell order, so sums are deterministic
                acc.sort_by_key(|a| a.0);
                let mut merged: Vec<(u32, f64)> = Vec::new();
                for (k, v) in acc {
                    match merged.last_mut() {
                        Some(last) if last.0 == k => last.1 += v,
                        _ => merged.push((k, v)),
                    }
                }
                merged
            })
            .collect();
        let s = pu.samples();
        let e: Vec<Vec<(u32, f64)>> = (0..s.len())
            .into_par_iter()
            .map_init(Vec::new, |cand, k| {
                let p = s.flat_point(k);
                lat.nodes_within(p, SUPPORT_RADIUS, cand);
                cand.iter()
                    .map(|&i| (i as u32, kernel.translate(i, p)))
                    .filter(|a| a.1 != 0.0)
                    .collect()
            })
            .collect();
        Ok(SamplingOperator {
            w,
            e,
            nodes: lat.len(),
        })
    }

    /// Coefficients of `S_X` applied to sampled data `y` (flat `j * l + i`).
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        self.w
            .iter()
            .map(|row| row.iter().map(|&(k, v)| v * y[k as usize]).sum())
            .collect()
    }

    /// Samples of `sum c_v phi_v`.
    pub fn evaluate(&self, c: &[f64]) -> Vec<f64> {
        self.e
            .iter()
            .map(|row| row.iter().map(|&(i, v)| v * c[i as usize]).sum())
            .collect()
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }
}

/// `gamma = ||K||_W (||w_theta(K)||_W + delta)` with its two factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionFactor {
    pub gamma: f64,
    pub kernel_w: f64,
    pub modulus_w: f64,
    pub theta: f64,
    pub delta: f64,
    pub h: f64,
    pub contractive: bool,
}

/// Evaluates `gamma` on a grid of step `h` (at most 1/12) holding every node
/// support grown by `theta`.
pub fn contraction_factor(
    kernel: &Kernel,
    theta: f64,
    delta: f64,
    h: f64,
    stencil: Stencil,
) -> Result<ContractionFactor> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::param("theta", format!("{theta} must be positive")));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::param("delta", format!("{delta} must lie in [0, 1)")));
    }
    let grid = functional_grid(kernel, theta, h)?;
    let kernel_w = kernel_w_norm(kernel, &grid)?;
    let modulus_w = modulus_w_eps(kernel, theta, &grid, stencil)?;
    let gamma = kernel_w * (modulus_w + delta);
    Ok(ContractionFactor {
        gamma,
        kernel_w,
        modulus_w,
        theta,
        delta,
        h,
        contractive: gamma < 1.0,
    })
}

/// Origin-centered grid of step `h` covering the supports grown by `pad`.
/// The cell count per axis is odd, so cell centers sit on multiples of `h`
/// and hit every node of a lattice whose spacing `h` divides.
pub fn functional_grid(kernel: &Kernel, pad: f64, h: f64) -> Result<Grid> {
    if !(h > 0.0) {
        return Err(Error::param("h", "must be positive"));
    }
    let (hr, hs) = match kernel.lattice().support_hull() {
        Some(hull) => (hull.r / 2.0, hull.s / 2.0),
        None => (SUPPORT_RADIUS, SUPPORT_RADIUS),
    };
    let cells = |v: f64| {
        let k = (2.0 * (v + pad) / h - 1e-9).ceil() as usize;
        k + 1 - k % 2
    };
    let (nr, ns) = (cells(hr), cells(hs));
    Grid::new(Cube::new(nr as f64 * h, ns as f64 * h, kernel.n())?, nr, ns)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIterations,
    NonContraction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub r: u32,
    /// `||f_r - f_{r-1}||` with `f_{-1} = 0`.
    pub residual: f64,
    pub f_norm: f64,
    /// `||f_r - f||` when the truth is known.
    pub error: Option<f64>,
    /// `(1+gamma)/(1-gamma) gamma^{r+1} ||f||` when `gamma < 1` and the truth is known.
    pub certificate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionTrace {
    pub rows: Vec<TraceRow>,
    pub gamma_theory: Option<f64>,
    /// `exp` of the least-squares slope of `log e_r` over `r >= 1`.
    pub gamma_emp: Option<f64>,
    pub stop: StopReason,
    pub truth_norm: Option<f64>,
}

impl ReconstructionTrace {
    pub fn converged(&self) -> bool {
        self.stop == StopReason::Converged
    }

    /// Iterations performed after `f_0`.
    pub fn iterations(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn error_ratios(&self) -> Vec<f64> {
        self.rows
            .windows(2)
            .filter_map(|w| Some(w[1].error? / w[0].error?))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterateOptions {
    pub r_max: u32,
    pub tol: f64,
    pub gamma_theory: Option<f64>,
}

impl Default for IterateOptions {
    fn default() -> Self {
        IterateOptions {
            r_max: 200,
            tol: 1e-9,
            gamma_theory: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub coeffs: CoeffSeq,
    pub signal: GridSignal,
    pub trace: ReconstructionTrace,
}

fn norm_on(kernel: &Kernel, c: &[f64], grid: &Grid, e: &Exponents) -> Result<f64> {
    let seq = CoeffSeq::new(kernel.lattice_arc().clone(), c.to_vec())?;
    grid_mixed_norm(&kernel.synthesize(&seq, grid)?, e, None)
}

/// Errors below this share of the truth norm are at rounding level and left
/// out of the rate fit.
const FIT_FLOOR: f64 = 1e-12;

fn fit_rate(rows: &[TraceRow], truth: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|row| row.r >= 1)
        .filter_map(|row| {
            row.error
                .filter(|&e| e > FIT_FLOOR * truth)
                .map(|e| (row.r as f64, e.ln()))
        })
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some((sxy / sxx).exp())
}

/// `f_0 = S_X f`, `f_r = f_0 + f_{r-1} - S_X f_{r-1}`. Every iterate lies in
/// the span of the translates, so the loop runs on coefficients; norms are
/// taken on the partition grid. Stops once `||f_r - f_{r-1}|| <= tol ||f_r||`,
/// at `r_max`, or after three consecutive non-decreasing residuals.
pub fn iterate_reconstruct(
    kernel: &Kernel,
    pu: &PartitionOfUnity,
    values: &SampleMatrix,
    e: &Exponents,
    truth: Option<&CoeffSeq>,
    opts: &IterateOptions,
) -> Result<Reconstruction> {
    let s = pu.samples();
    if values.l() != s.l() || values.m() != s.m() {
        return Err(Error::ShapeMismatch {
            expected: s.len(),
            actual: values.l() * values.m(),
        });
    }
    if let Some(t) = truth {
        if t.lattice().as_ref() != kernel.lattice() {
            return Err(Error::param("truth", "lattice differs from the kernel's"));
        }
    }
    let grid = pu.grid();
    let op = SamplingOperator::new(kernel, pu)?;
    let truth_c = truth.map(|t| t.coefficients().to_vec());
    let truth_norm = match &truth_c {
        Some(c) => Some(norm_on(kernel, c, grid, e)?),
        None => None,
    };
    let gamma = opts.gamma_theory.filter(|g| (0.0..1.0).contains(g));

    let c0 = op.project(values.values());
    let mut prev = vec![0.0; c0.len()];
    let mut cur = c0.clone();
    let mut rows = Vec::new();
    let mut growth = 0;
    let mut last_residual = f64::INFINITY;
    let stop = loop {
        let r = rows.len() as u32;
        let diff: Vec<f64> = cur.iter().zip(&prev).map(|(a, b)| a - b).collect();
        let residual = norm_on(kernel, &diff, grid, e)?;
        let f_norm = norm_on(kernel, &cur, grid, e)?;
        let error = match &truth_c {
            Some(t) => {
                let d: Vec<f64> = cur.iter().zip(t).map(|(a, b)| a - b).collect();
                Some(norm_on(kernel, &d, grid, e)?)
            }
            None => None,
        };
        let certificate = match (gamma, truth_norm) {
            (Some(g), Some(fnorm)) => Some(error_certificate(g, fnorm, r)?),
            _ => None,
        };
        rows.push(TraceRow {
            r,
            residual,
            f_norm,
            error,
            certificate,
        });
        if residual <= opts.tol * f_norm {
            break StopReason::Converged;
        }
        if r >= 1 {
            growth = if residual >= last_residual {
                growth + 1
            } else {
                0
            };
            if growth >= 3 {
                break StopReason::NonContraction;
            }
        }
        if r >= opts.r_max {
            break StopReason::MaxIterations;
        }
        last_residual = residual;
        let sx = op.project(&op.evaluate(&cur));
        let next: Vec<f64> = (0..cur.len()).map(|i| c0[i] + cur[i] - sx[i]).collect();
        prev = std::mem::replace(&mut cur, next);
    };
    let coeffs = CoeffSeq::new(kernel.lattice_arc().clone(), cur)?;
    let signal = kernel.synthesize(&coeffs, grid)?;
    let gamma_emp = truth_norm.and_then(|t| fit_rate(&rows, t));
    Ok(Reconstruction {
        coeffs,
        signal,
        trace: ReconstructionTrace {
            rows,
            gamma_theory: opts.gamma_theory,
            gamma_emp,
            stop,
            truth_norm,
        },
    })
}
