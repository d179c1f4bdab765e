use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel_space::{CoeffSeq, Kernel};
use crate::mixed_norms::{grid_mixed_norm, Cube, Exponents, Grid, GridSignal};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    /// `||f||_{L^{p,q}(C)} / ||f||_{L^{p,q}}`.
    pub ratio: f64,
    /// Smallest `delta` with `(1 - delta) ||f|| <= ||f||_{L^{p,q}(C)}`.
    pub delta_min: f64,
    pub inside: f64,
    pub total: f64,
}

/// Share of the mixed norm of `f` carried by `cube`. The grid of `f` must
/// contain the cube and should cover the support of `f`.
pub fn concentration_ratio(
    f: &GridSignal,
    cube: &Cube,
    e: &Exponents,
) -> Result<ConcentrationReport> {
    let inside = grid_mixed_norm(f, e, Some(cube))?;
    let total = grid_mixed_norm(f, e, None)?;
    if total == 0.0 {
        return Err(Error::ZeroSignal);
    }
    let ratio = (inside / total).min(1.0);
    Ok(ConcentrationReport {
        ratio,
        delta_min: 1.0 - ratio,
        inside,
        total,
    })
}

/// A grid with spacing about `h`, centered at the origin, holding both
/// `cube` and every node support of the kernel, with the cube boundary on
/// cell faces when `h` divides the cube sides.
pub fn covering_grid(kernel: &Kernel, cube: &Cube, h: f64) -> Result<Grid> {
    let (mut half_r, mut half_s) = (cube.r / 2.0, cube.s / 2.0);
    if let Some(hull) = kernel.lattice().support_hull() {
        half_r = half_r.max(hull.r / 2.0);
        half_s = half_s.max(hull.s / 2.0);
    }
    // extend to whole multiples of h beyond the cube so faces stay aligned
    let snap = |inner: f64, need: f64| inner + ((need - inner) / h).ceil().max(0.0) * h;
    let big = Cube::new(
        2.0 * snap(cube.r / 2.0, half_r),
        2.0 * snap(cube.s / 2.0, half_s),
        cube.n,
    )?;
    Grid::with_spacing(big, h)
}

/// Concentration of `sum c_v phi(. - v)` on `cube`, synthesized on a covering
/// grid of spacing `h`.
pub fn expansion_concentration(
    kernel: &Kernel,
    c: &CoeffSeq,
    cube: &Cube,
    e: &Exponents,
    h: f64,
) -> Result<ConcentrationReport> {
    let grid = covering_grid(kernel, cube, h)?;
    concentration_ratio(&kernel.synthesize(c, &grid)?, cube, e)
}
