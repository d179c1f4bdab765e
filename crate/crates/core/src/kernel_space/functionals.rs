use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::Kernel;
use super::phi::SUPPORT_RADIUS;
use crate::error::{Error, Result};
use crate::mixed_norms::{recip, weighted_lp, Cube, Exponents, Grid};

/// Coarsest admissible grid step: eight cells across a support of width 2/3.
pub const MAX_FUNCTIONAL_STEP: f64 = 2.0 / 3.0 / 8.0;

fn check_resolution(grid: &Grid) -> Result<()> {
    for axis in 0..=grid.n() {
        if grid.step(axis) > MAX_FUNCTIONAL_STEP * (1.0 + 1e-12) {
            return Err(Error::InvalidGrid(format!(
                "step {} on axis {axis} does not resolve the support (need <= 1/12)",
                grid.step(axis)
            )));
        }
    }
    Ok(())
}

fn check_cover(kernel: &Kernel, grid: &Grid, pad: f64) -> Result<()> {
    if grid.n() != kernel.n() {
        return Err(Error::DimensionMismatch {
            expected: kernel.n(),
            actual: grid.n(),
        });
    }
    let cube = grid.cube();
    let lat = kernel.lattice();
    for i in 0..lat.len() {
        let inside = lat.node(i).iter().enumerate().all(|(axis, &u)| {
            u.abs() + SUPPORT_RADIUS + pad <= cube.half_extent(axis) * (1.0 + 1e-12) + 1e-12
        });
        if !inside {
            return Err(Error::TruncatedSupport { node: i });
        }
    }
    Ok(())
}

/// `sup_y sum_t g(y,t) dt` for a symmetric nonnegative `g` given row by row.
fn compose_symmetric(rows: &[Vec<f64>], dt: f64) -> f64 {
    rows.iter()
        .map(|row| row.iter().sum::<f64>() * dt)
        .fold(0.0, f64::max)
}

/// Temporal index range of one node and its `(M, m)` per index.
type SliceTable = (std::ops::Range<usize>, Vec<(f64, f64)>);

/// Discretized `||K||_W`: the inner `W^0` norm in the spatial pair, then the
/// outer `W^0` norm in the temporal pair.
///
/// Translates have disjoint supports, so at every `(x, y)` at most one node
/// contributes and the `x`-slice sup factors through per-node tables of the
/// slice maximum `M_v(y)` and slice mass `m_v(t)`.
pub fn kernel_w_norm(kernel: &Kernel, grid: &Grid) -> Result<f64> {
    check_resolution(grid)?;
    check_cover(kernel, grid, 0.0)?;
    let lat = kernel.lattice();
    let nt = grid.temporal_points();
    let n = kernel.n();
    let dx = grid.spatial_cell_volume();
    // per node: temporal range and (M, m) per temporal index in range
    let tables: Vec<SliceTable> = (0..lat.len())
        .into_par_iter()
        .map(|i| {
            let ranges = kernel.node_ranges(grid, i);
            let tr = ranges[n].clone();
            let mut table = vec![(0.0f64, 0.0f64); tr.len()];
            grid.for_each_in_box(&ranges, |flat, z| {
                let v = kernel.translate(i, z).abs();
                let e = &mut table[flat / grid.spatial_len() - tr.start];
                e.0 = e.0.max(v);
                e.1 += v * dx;
            });
            (tr, table)
        })
        .collect();
    let rows: Vec<Vec<f64>> = (0..nt)
        .into_par_iter()
        .map(|j| {
            let mut row = vec![0.0; nt];
            for (tr, table) in &tables {
                if !tr.contains(&j) {
                    continue;
                }
                let (my, sy) = table[j - tr.start];
                for (t, &(mt, st)) in tr.clone().zip(table) {
                    let g = (my * st).max(sy * mt);
                    if g > row[t] {
                        row[t] = g;
                    }
                }
            }
            row
        })
        .collect();
    Ok(compose_symmetric(&rows, grid.temporal_step()))
}

/// How the inner supremum over perturbations is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "points")]
pub enum Stencil {
    /// Exact box extrema of the piecewise-linear kernel.
    Exact,
    /// `m` equispaced offsets per coordinate on `[-eps, eps]` (`m` odd, >= 3),
    /// `m^{2(n+1)}` offset pairs in total.
    Uniform(usize),
}

/// Box extrema of one translate around a point.
#[derive(Debug, Clone, Copy, Default)]
struct BoxExtrema {
    center: f64,
    max: f64,
    min: f64,
}

fn box_extrema(kernel: &Kernel, i: usize, p: &[f64], eps: f64, corner: &mut [f64]) -> BoxExtrema {
    let node = kernel.lattice().node(i);
    let d = p.len();
    for a in 0..d {
        corner[a] = node[a].clamp(p[a] - eps, p[a] + eps);
    }
    let max = kernel.translate(i, corner);
    let mut min = f64::INFINITY;
    for mask in 0..(1usize << d) {
        for a in 0..d {
            corner[a] = if mask >> a & 1 == 1 {
                p[a] + eps
            } else {
                p[a] - eps
            };
        }
        min = min.min(kernel.translate(i, corner));
    }
    BoxExtrema {
        center: kernel.translate(i, p),
        max,
        min,
    }
}

/// Box extrema of node `i` at every grid node of its support grown by `eps`.
struct NodeTable {
    ranges: Vec<Range<usize>>,
    ext: Vec<BoxExtrema>,
}

impl NodeTable {
    fn build(kernel: &Kernel, i: usize, grid: &Grid, eps: f64) -> Self {
        let reach = SUPPORT_RADIUS + eps;
        let ranges: Vec<Range<usize>> = kernel
            .lattice()
            .node(i)
            .iter()
            .enumerate()
            .map(|(axis, &u)| grid.axis_range(axis, u - reach, u + reach))
            .collect();
        let mut ext = Vec::with_capacity(ranges.iter().map(|r| r.len()).product());
        let mut corner = vec![0.0; ranges.len()];
        grid.for_each_in_box(&ranges, |_, z| {
            ext.push(box_extrema(kernel, i, z, eps, &mut corner))
        });
        NodeTable { ranges, ext }
    }

    fn get(&self, idx: &[usize]) -> BoxExtrema {
        let mut local = 0;
        let mut stride = 1;
        for (r, &k) in self.ranges.iter().zip(idx) {
            if !r.contains(&k) {
                return BoxExtrema::default();
            }
            local += (k - r.start) * stride;
            stride *= r.len();
        }
        self.ext[local]
    }
}

/// `sup |K(P+a, Q+b) - K(P,Q)|` from the box extrema of every candidate
/// node. `K >= 0` and one node at a time is active, so the sup is either
/// `max K - K(P,Q)` or `K(P,Q) - min K`; the min is nonzero only when the
/// box around `P` sits inside a single support.
fn w_exact(pairs: impl Iterator<Item = (BoxExtrema, BoxExtrema)>) -> f64 {
    let mut k0 = 0.0;
    let mut kmax = 0.0f64;
    let mut kmin = 0.0;
    for (a, b) in pairs {
        k0 += a.center * b.center;
        kmax = kmax.max(a.max * b.max);
        if a.min > 0.0 {
            kmin = a.min * b.min;
        }
    }
    (kmax - k0).max(k0 - kmin)
}

/// Discretized `||w_eps(K)||_W`, where
/// `w_eps(K)(P,Q) = sup_{|a|,|b| <= eps} |K(P+a, Q+b) - K(P,Q)|`.
/// The grid must hold every node support grown by `eps`.
pub fn modulus_w_eps(kernel: &Kernel, eps: f64, grid: &Grid, stencil: Stencil) -> Result<f64> {
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::param("epsilon", format!("{eps} must be >= 0")));
    }
    if let Stencil::Uniform(m) = stencil {
        if m < 3 || m % 2 == 0 {
            return Err(Error::param(
                "stencil",
                format!("{m} points; need an odd count >= 3"),
            ));
        }
    }
    check_resolution(grid)?;
    check_cover(kernel, grid, eps)?;
    if eps == 0.0 || kernel.lattice().is_empty() {
        return Ok(0.0);
    }
    let n = kernel.n();
    let d = n + 1;
    let nt = grid.temporal_points();
    let spatial = grid.spatial_len();
    let ds = grid.spatial_cell_volume();
    let reach = SUPPORT_RADIUS + eps;
    let tables: Vec<NodeTable> = (0..kernel.lattice().len())
        .into_par_iter()
        .map(|i| NodeTable::build(kernel, i, grid, eps))
        .collect();
    let offsets: Vec<Vec<f64>> = match stencil {
        Stencil::Exact => Vec::new(),
        Stencil::Uniform(m) => {
            let ticks: Vec<f64> = (0..m)
                .map(|k| -eps + 2.0 * eps * k as f64 / (m - 1) as f64)
                .collect();
            (0..m.pow(d as u32))
                .map(|mut code| {
                    (0..d)
                        .map(|_| {
                            let t = ticks[code % m];
                            code /= m;
                            t
                        })
                        .collect()
                })
                .collect()
        }
    };
    // r[j][t] = max over spatial x of sum_s w((x, y_j), (s, t)) ds
    let r: Vec<Vec<f64>> = (0..nt)
        .into_par_iter()
        .map(|j| {
            let mut out = vec![0.0f64; nt];
            let mut acc = vec![0.0f64; nt];
            let mut cand = Vec::new();
            let mut qs: Vec<usize> = Vec::new();
            let mut p = vec![0.0; d];
            let mut q = vec![0.0; d];
            let mut pidx = vec![0usize; d];
            let mut qidx = vec![0usize; d];
            let mut shifted = vec![0.0; d];
            let mut pe: Vec<BoxExtrema> = Vec::new();
            for sx in 0..spatial {
                let pf = j * spatial + sx;
                grid.node_into(pf, &mut p);
                kernel.lattice().nodes_within(&p, reach, &mut cand);
                if cand.is_empty() {
                    continue;
                }
                grid.unflatten(pf, &mut pidx);
                qs.clear();
                for &i in &cand {
                    grid.for_each_in_box(&tables[i].ranges, |flat, _| qs.push(flat));
                }
                if cand.len() > 1 {
                    qs.sort_unstable();
                    qs.dedup();
                }
                pe.clear();
                pe.extend(cand.iter().map(|&i| tables[i].get(&pidx)));
                // phi_v(P + a) for every offset, used by the uniform stencil
                let pu: Vec<Vec<f64>> = offsets
                    .iter()
                    .map(|off| {
                        cand.iter()
                            .map(|&i| {
                                for a in 0..d {
                                    shifted[a] = p[a] + off[a];
                                }
                                kernel.translate(i, &shifted)
                            })
                            .collect()
                    })
                    .collect();
                acc.iter_mut().for_each(|v| *v = 0.0);
                for &qf in &qs {
                    let w = match stencil {
                        Stencil::Exact => {
                            grid.unflatten(qf, &mut qidx);
                            w_exact(
                                cand.iter()
                                    .zip(&pe)
                                    .map(|(&i, a)| (*a, tables[i].get(&qidx))),
                            )
                        }
                        Stencil::Uniform(_) => {
                            grid.node_into(qf, &mut q);
                            let k0: f64 = cand
                                .iter()
                                .zip(&pe)
                                .map(|(&i, a)| a.center * kernel.translate(i, &q))
                                .sum();
                            let mut w = 0.0f64;
                            for off in &offsets {
                                for a in 0..d {
                                    shifted[a] = q[a] + off[a];
                                }
                                let qv: Vec<f64> = cand
                                    .iter()
                                    .map(|&i| kernel.translate(i, &shifted))
                                    .collect();
                                for row in &pu {
                                    let k: f64 = row.iter().zip(&qv).map(|(a, b)| a * b).sum();
                                    w = w.max((k - k0).abs());
                                }
                            }
                            w
                        }
                    };
                    acc[qf / spatial] += w * ds;
                }
                for (o, a) in out.iter_mut().zip(&acc) {
                    *o = o.max(*a);
                }
            }
            out
        })
        .collect();
    // g(y,t) = max(r[y][t], r[t][y]) is symmetric
    let rows: Vec<Vec<f64>> = (0..nt)
        .map(|y| (0..nt).map(|t| r[y][t].max(r[t][y])).collect())
        .collect();
    Ok(compose_symmetric(&rows, grid.temporal_step()))
}

/// Decay thresholds `(alpha_min, beta_min)`; both exponents must exceed them.
pub fn decay_thresholds(n: usize, e: &Exponents) -> (f64, f64) {
    let n = n as f64;
    let ip = recip(e.p_conj());
    let iq = recip(e.q_conj());
    (n * ip + n + 2.0 + iq, iq + n + 2.0 + n * iq)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Smallest `c` with `|K| <= c / ((1+|x-s|_1)^alpha (1+|y-t|)^beta)` on the cloud.
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
    pub alpha_threshold: f64,
    pub beta_threshold: f64,
    pub cloud_points: usize,
}

/// Fits the decay constant over a cloud of `(2k+1)^{n+1}` points per node
/// support (spacing `1/(3k)`), pairing points of the same support.
pub fn decay_envelope_check(
    kernel: &Kernel,
    alpha: f64,
    beta: f64,
    e: &Exponents,
    per_half_width: usize,
) -> Result<DecayFit> {
    let (at, bt) = decay_thresholds(kernel.n(), e);
    if !(alpha > at) {
        return Err(Error::DecayExponent {
            which: "alpha",
            value: alpha,
            threshold: at,
        });
    }
    if !(beta > bt) {
        return Err(Error::DecayExponent {
            which: "beta",
            value: beta,
            threshold: bt,
        });
    }
    if per_half_width == 0 {
        return Err(Error::param("per_half_width", "must be positive"));
    }
    let n = kernel.n();
    let d = n + 1;
    let side = 2 * per_half_width + 1;
    let count = side.pow(d as u32);
    let h = SUPPORT_RADIUS / per_half_width as f64;
    let lat = kernel.lattice();
    let c = (0..lat.len())
        .into_par_iter()
        .map(|i| {
            let node = lat.node(i);
            let pts: Vec<Vec<f64>> = (0..count)
                .map(|mut code| {
                    (0..d)
                        .map(|a| {
                            let k = (code % side) as f64 - per_half_width as f64;
                            code /= side;
                            node[a] + k * h
                        })
                        .collect()
                })
                .collect();
            let vals: Vec<f64> = pts.iter().map(|z| kernel.translate(i, z)).collect();
            let mut best = 0.0f64;
            for (p, &vp) in pts.iter().zip(&vals) {
                if vp == 0.0 {
                    continue;
                }
                for (q, &vq) in pts.iter().zip(&vals) {
                    if vq == 0.0 {
                        continue;
                    }
                    let dx: f64 = (0..n).map(|a| (p[a] - q[a]).abs()).sum();
                    let dt = (p[n] - q[n]).abs();
                    let v = (vp * vq).abs() * (1.0 + dx).powf(alpha) * (1.0 + dt).powf(beta);
                    best = best.max(v);
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    Ok(DecayFit {
        c,
        alpha,
        beta,
        alpha_threshold: at,
        beta_threshold: bt,
        cloud_points: count * lat.len(),
    })
}

/// `||phi(. - v_i)||_{L^{a,b}}` by the midpoint rule on `grid`, streaming
/// over the node's support box.
pub fn node_mixed_norm(kernel: &Kernel, i: usize, e: &Exponents, grid: &Grid) -> f64 {
    let ranges = kernel.node_ranges(grid, i);
    let n = kernel.n();
    let tr = ranges[n].clone();
    let p = e.p();
    let mut inner = vec![0.0f64; tr.len()];
    grid.for_each_in_box(&ranges, |flat, z| {
        let v = kernel.translate(i, z).abs();
        let slot = &mut inner[flat / grid.spatial_len() - tr.start];
        if p.is_infinite() {
            *slot = slot.max(v);
        } else {
            *slot += v.powf(p);
        }
    });
    let dx = grid.spatial_cell_volume();
    let rows = inner.into_iter().map(|s| {
        let norm = if p.is_infinite() {
            s
        } else {
            (s * dx).powf(1.0 / p)
        };
        (grid.temporal_step(), norm)
    });
    weighted_lp(e.q(), rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSup {
    pub value: f64,
    /// Grid node where the sup is attained; empty when the lattice is empty.
    pub argmax: Vec<f64>,
}

/// `sup_P ||K(P, .)||_{L^{p',q'}}` over grid nodes `P` (restricted to cell
/// centers inside `restrict_to` when given). The slice at `P` is
/// `phi_v(P) phi_v(.)` for the single node `v` whose support holds `P`.
pub fn compute_k_sup(
    kernel: &Kernel,
    e: &Exponents,
    grid: &Grid,
    restrict_to: Option<&Cube>,
) -> Result<KSup> {
    check_cover(kernel, grid, 0.0)?;
    let conj = e.conjugate();
    let lat = kernel.lattice();
    let norms: Vec<f64> = (0..lat.len())
        .into_par_iter()
        .map(|i| node_mixed_norm(kernel, i, &conj, grid))
        .collect();
    let best = (0..lat.len())
        .into_par_iter()
        .map(|i| {
            let mut best: Option<(f64, usize)> = None;
            grid.for_each_in_box(&kernel.node_ranges(grid, i), |flat, z| {
                if restrict_to.is_some_and(|c| !c.contains(z)) {
                    return;
                }
                let v = kernel.translate(i, z).abs() * norms[i];
                if best.is_none_or(|(b, f)| v > b || (v == b && flat < f)) {
                    best = Some((v, flat));
                }
            });
            best
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .fold(None, |acc: Option<(f64, usize)>, (v, f)| match acc {
            Some((b, g)) if b > v || (b == v && g < f) => Some((b, g)),
            _ => Some((v, f)),
        });
    Ok(match best {
        Some((value, flat)) => KSup {
            value,
            argmax: grid.node(flat),
        },
        None => KSup {
            value: 0.0,
            argmax: Vec::new(),
        },
    })
}

/// Exact `sup_P ||K(P, .)||_{L^{p',q'}}`, over all of `R^{n+1}` or over
/// `restrict_to`. Each slice is `phi_v(P) phi_v`, so the sup is the closed-form
/// generator norm times the largest value of a translate on the region, which
/// for a box is attained at the node clamped into it.
pub fn exact_k_sup(kernel: &Kernel, e: &Exponents, restrict_to: Option<&Cube>) -> KSup {
    let norm = kernel.phi().mixed_norm(&e.conjugate());
    let lat = kernel.lattice();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for (i, node) in lat.nodes().enumerate() {
        let point: Vec<f64> = match restrict_to {
            Some(c) => node
                .iter()
                .enumerate()
                .map(|(a, &v)| v.clamp(-c.half_extent(a), c.half_extent(a)))
                .collect(),
            None => node.to_vec(),
        };
        let v = kernel.translate(i, &point).abs() * norm;
        if best.as_ref().is_none_or(|(b, _)| v > *b) {
            best = Some((v, point));
        }
    }
    match best {
        Some((value, argmax)) => KSup { value, argmax },
        None => KSup {
            value: 0.0,
            argmax: Vec::new(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel_space::{GeneratorPhi, Lattice, MIN_GAP};

    fn single(amplitude: f64) -> Kernel {
        let lat = Lattice::new(1, vec![vec![0.0, 0.0]], MIN_GAP).unwrap();
        Kernel::new(GeneratorPhi::new(1, amplitude).unwrap(), lat).unwrap()
    }

    #[test]
    fn empty_lattice_functionals_vanish() {
        let k = Kernel::new(
            GeneratorPhi::new(1, 1.0).unwrap(),
            Lattice::empty(1).unwrap(),
        )
        .unwrap();
        let grid = Grid::with_spacing(Cube::new(2.0, 2.0, 1).unwrap(), 1.0 / 12.0).unwrap();
        let e = Exponents::uniform(2.0).unwrap();
        assert_eq!(kernel_w_norm(&k, &grid).unwrap(), 0.0);
        assert_eq!(modulus_w_eps(&k, 0.1, &grid, Stencil::Exact).unwrap(), 0.0);
        assert_eq!(compute_k_sup(&k, &e, &grid, None).unwrap().value, 0.0);
        let (a, b) = decay_thresholds(1, &e);
        assert_eq!(
            decay_envelope_check(&k, a + 1.0, b + 1.0, &e, 4).unwrap().c,
            0.0
        );
    }

    #[test]
    fn coarse_grid_rejected() {
        let k = single(1.0);
        let grid = Grid::with_spacing(Cube::new(2.0, 2.0, 1).unwrap(), 0.125).unwrap();
        assert!(matches!(
            kernel_w_norm(&k, &grid),
            Err(Error::InvalidGrid(_))
        ));
    }

    #[test]
    fn thresholds_for_p_q_two() {
        let e = Exponents::uniform(2.0).unwrap();
        let (a, b) = decay_thresholds(1, &e);
        assert!((a - 4.0).abs() < 1e-15);
        assert!((b - 4.0).abs() < 1e-15);
        let k = single(1.0);
        assert!(matches!(
            decay_envelope_check(&k, 4.0, 5.0, &e, 2),
            Err(Error::DecayExponent { which: "alpha", .. })
        ));
    }

    #[test]
    fn exact_and_uniform_stencils_agree_roughly() {
        let k = single(1.0);
        let grid = Grid::with_spacing(Cube::new(1.0, 1.0, 1).unwrap(), 1.0 / 24.0).unwrap();
        let exact = modulus_w_eps(&k, 0.05, &grid, Stencil::Exact).unwrap();
        let coarse = modulus_w_eps(&k, 0.05, &grid, Stencil::Uniform(3)).unwrap();
        let fine = modulus_w_eps(&k, 0.05, &grid, Stencil::Uniform(5)).unwrap();
        assert!(coarse <= fine * (1.0 + 1e-12));
        assert!(fine <= exact * (1.0 + 1e-12));
        assert!(coarse > 0.8 * exact);
    }
}
