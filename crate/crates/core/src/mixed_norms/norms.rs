use super::exponents::Exponents;
use super::grid::{Cube, GridSignal, SampleMatrix};
use crate::error::{Error, Result};

/// `(sum_k w_k |v_k|^p)^{1/p}`, or `max |v_k|` over positive weights for `p = inf`.
pub(crate) fn weighted_lp<I>(p: f64, items: I) -> f64
where
    I: IntoIterator<Item = (f64, f64)>,
{
    if p.is_infinite() {
        items
            .into_iter()
            .filter(|(w, _)| *w > 0.0)
            .fold(0.0, |m, (_, v)| m.max(v.abs()))
    } else if p == 1.0 {
        items.into_iter().map(|(w, v)| w * v.abs()).sum()
    } else {
        let s: f64 = items.into_iter().map(|(w, v)| w * v.abs().powf(p)).sum();
        s.powf(1.0 / p)
    }
}

/// Iterated norm: inner `L^p` within each group, outer `L^q` across groups.
/// Each group carries its outer weight and `(inner weight, value)` pairs.
pub(crate) fn iterated_norm<G, I>(e: &Exponents, groups: G) -> f64
where
    G: IntoIterator<Item = (f64, I)>,
    I: IntoIterator<Item = (f64, f64)>,
{
    let p = e.p();
    weighted_lp(
        e.q(),
        groups
            .into_iter()
            .map(|(outer_w, inner)| (outer_w, weighted_lp(p, inner))),
    )
}

/// `||c||_{l^{p,q}} = (sum_j (sum_i |c(i,j)|^p)^{q/p})^{1/q}`; spatial index inner.
pub fn seq_mixed_norm(c: &SampleMatrix, e: &Exponents) -> f64 {
    iterated_norm(
        e,
        c.columns().map(|col| (1.0, col.iter().map(|&v| (1.0, v)))),
    )
}

/// Midpoint-rule `L^{p,q}` norm of a grid signal: inner over the spatial axes,
/// outer over time. With `restrict_to`, cells whose center falls outside are
/// dropped.
pub fn grid_mixed_norm(f: &GridSignal, e: &Exponents, restrict_to: Option<&Cube>) -> Result<f64> {
    let grid = f.grid();
    let mask = match restrict_to {
        Some(inner) => {
            if !grid.cube().contains_cube(inner) {
                return Err(Error::RestrictionOutOfBounds {
                    inner: inner.to_string(),
                    outer: grid.cube().to_string(),
                });
            }
            Some(grid.center_mask(inner))
        }
        None => None,
    };
    let dx = grid.spatial_cell_volume();
    let dt = grid.temporal_step();
    let slice = grid.spatial_len();
    let values = f.values();
    let norm = iterated_norm(
        e,
        values.chunks(slice).enumerate().map(|(j, row)| {
            let mask = mask.as_deref();
            (
                dt,
                row.iter().enumerate().map(move |(i, &v)| {
                    let keep = mask.is_none_or(|m| m[j * slice + i]);
                    (if keep { dx } else { 0.0 }, if keep { v } else { 0.0 })
                }),
            )
        }),
    );
    Ok(norm)
}

/// Flat `l^r` norm of all entries; the `p = q = r` special case.
pub fn flat_lr_norm(values: &[f64], r: f64) -> f64 {
    weighted_lp(r, values.iter().map(|&v| (1.0, v)))
}
