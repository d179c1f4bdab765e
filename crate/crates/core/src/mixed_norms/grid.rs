use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const CONTAIN_TOL: f64 = 1e-12;

/// The closed cube `[-R/2, R/2]^n x [-S/2, S/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    pub r: f64,
    pub s: f64,
    pub n: usize,
}

impl Cube {
    pub fn new(r: f64, s: f64, n: usize) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidCube(format!("R = {r} must be positive")));
        }
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::InvalidCube(format!("S = {s} must be positive")));
        }
        if n == 0 {
            return Err(Error::InvalidCube("n must be at least 1".into()));
        }
        Ok(Cube { r, s, n })
    }

    /// Number of coordinates of a point, `n + 1`.
    pub fn dim(&self) -> usize {
        self.n + 1
    }

    pub fn volume(&self) -> f64 {
        self.r.powi(self.n as i32) * self.s
    }

    /// Half-extent along coordinate `axis` (the last axis is temporal).
    pub fn half_extent(&self, axis: usize) -> f64 {
        if axis < self.n {
            self.r / 2.0
        } else {
            self.s / 2.0
        }
    }

    /// Closed-cube membership with a relative tolerance of 1e-12.
    pub fn contains(&self, point: &[f64]) -> bool {
        debug_assert_eq!(point.len(), self.dim());
        point.iter().enumerate().all(|(axis, &u)| {
            let h = self.half_extent(axis);
            u.abs() <= h * (1.0 + CONTAIN_TOL)
        })
    }

    pub fn contains_cube(&self, other: &Cube) -> bool {
        self.n == other.n
            && other.r <= self.r * (1.0 + CONTAIN_TOL)
            && other.s <= self.s * (1.0 + CONTAIN_TOL)
    }

    /// The cube grown by `pad` on every side.
    pub fn padded(&self, pad: f64) -> Result<Cube> {
        Cube::new(self.r + 2.0 * pad, self.s + 2.0 * pad, self.n)
    }
}

impl std::fmt::Display for Cube {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "C(R={}, S={}, n={})", self.r, self.s, self.n)
    }
}

/// Midpoint-rule tensor grid over a cube. Node coordinates are cell centers.
///
/// Storage order is temporal-major: `flat = j * P^n + spatial_flat`, where
/// spatial axis 0 varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    cube: Cube,
    spatial_points: usize,
    temporal_points: usize,
    spatial_coords: Vec<f64>,
    temporal_coords: Vec<f64>,
}

impl Grid {
    pub fn new(cube: Cube, spatial_points: usize, temporal_points: usize) -> Result<Self> {
        if spatial_points == 0 || temporal_points == 0 {
            return Err(Error::InvalidGrid("point counts must be positive".into()));
        }
        let total = (spatial_points as u128).pow(cube.n as u32) * temporal_points as u128;
        if total > u32::MAX as u128 {
            return Err(Error::InvalidGrid(format!("{total} nodes is too many")));
        }
        let hx = cube.r / spatial_points as f64;
        let ht = cube.s / temporal_points as f64;
        let spatial_coords = (0..spatial_points)
            .map(|i| -cube.r / 2.0 + (i as f64 + 0.5) * hx)
            .collect();
        let temporal_coords = (0..temporal_points)
            .map(|j| -cube.s / 2.0 + (j as f64 + 0.5) * ht)
            .collect();
        Ok(Grid {
            cube,
            spatial_points,
            temporal_points,
            spatial_coords,
            temporal_coords,
        })
    }

    /// Grid with the same spacing `h` on every axis; `R/h` and `S/h` must be
    /// integers up to a relative 1e-9.
    pub fn with_spacing(cube: Cube, h: f64) -> Result<Self> {
        let count = |extent: f64| -> Result<usize> {
            let k = (extent / h).round();
            if k < 1.0 || ((k * h) - extent).abs() > 1e-9 * extent {
                return Err(Error::InvalidGrid(format!(
                    "extent {extent} is not a multiple of spacing {h}"
                )));
            }
            Ok(k as usize)
        };
        Grid::new(cube, count(cube.r)?, count(cube.s)?)
    }

    pub fn cube(&self) -> &Cube {
        &self.cube
    }

    pub fn n(&self) -> usize {
        self.cube.n
    }

    pub fn spatial_points(&self) -> usize {
        self.spatial_points
    }

    pub fn temporal_points(&self) -> usize {
        self.temporal_points
    }

    /// Number of nodes in one temporal slice, `P^n`.
    pub fn spatial_len(&self) -> usize {
        self.spatial_points.pow(self.cube.n as u32)
    }

    pub fn len(&self) -> usize {
        self.spatial_len() * self.temporal_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spatial_step(&self) -> f64 {
        self.cube.r / self.spatial_points as f64
    }

    pub fn temporal_step(&self) -> f64 {
        self.cube.s / self.temporal_points as f64
    }

    /// Spatial cell volume `(R/P)^n`.
    pub fn spatial_cell_volume(&self) -> f64 {
        self.spatial_step().powi(self.cube.n as i32)
    }

    pub fn cell_volume(&self) -> f64 {
        self.spatial_cell_volume() * self.temporal_step()
    }

    pub fn spatial_coords(&self) -> &[f64] {
        &self.spatial_coords
    }

    pub fn temporal_coords(&self) -> &[f64] {
        &self.temporal_coords
    }

    /// Per-axis step (spatial axes first, temporal last).
    pub fn step(&self, axis: usize) -> f64 {
        if axis < self.cube.n {
            self.spatial_step()
        } else {
            self.temporal_step()
        }
    }

    pub fn axis_points(&self, axis: usize) -> usize {
        if axis < self.cube.n {
            self.spatial_points
        } else {
            self.temporal_points
        }
    }

    pub fn axis_coord(&self, axis: usize, index: usize) -> f64 {
        if axis < self.cube.n {
            self.spatial_coords[index]
        } else {
            self.temporal_coords[index]
        }
    }

    /// Per-axis stride in the flat layout.
    pub fn stride(&self, axis: usize) -> usize {
        if axis < self.cube.n {
            self.spatial_points.pow(axis as u32)
        } else {
            self.spatial_len()
        }
    }

    /// Splits a flat index into per-axis indices.
    pub fn unflatten(&self, mut flat: usize, out: &mut [usize]) {
        let n = self.cube.n;
        out[n] = flat / self.spatial_len();
        flat %= self.spatial_len();
        for idx in out.iter_mut().take(n) {
            *idx = flat % self.spatial_points;
            flat /= self.spatial_points;
        }
    }

    pub fn flatten(&self, index: &[usize]) -> usize {
        index
            .iter()
            .enumerate()
            .map(|(axis, &i)| i * self.stride(axis))
            .sum()
    }

    /// Coordinates of node `flat`, written into `out` (length `n + 1`).
    pub fn node_into(&self, flat: usize, out: &mut [f64]) {
        let n = self.cube.n;
        let mut rest = flat % self.spatial_len();
        out[n] = self.temporal_coords[flat / self.spatial_len()];
        for u in out.iter_mut().take(n) {
            *u = self.spatial_coords[rest % self.spatial_points];
            rest /= self.spatial_points;
        }
    }

    pub fn node(&self, flat: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.cube.dim()];
        self.node_into(flat, &mut out);
        out
    }

    /// Indices along `axis` whose node coordinate lies in `[lo, hi]`.
    pub fn axis_range(&self, axis: usize, lo: f64, hi: f64) -> Range<usize> {
        let h = self.step(axis);
        let half = self.cube.half_extent(axis);
        let count = self.axis_points(axis);
        let to_index = |u: f64| (u + half) / h - 0.5;
        // a node sitting on an endpoint up to rounding is kept
        let start = (to_index(lo) - 1e-9).ceil().max(0.0);
        let end = ((to_index(hi) + 1e-9).floor() + 1.0).min(count as f64);
        if end <= start {
            0..0
        } else {
            start as usize..end as usize
        }
    }

    /// Calls `f(flat, coords)` for every node in the box spanned by
    /// `ranges` (one range per axis, temporal last).
    pub fn for_each_in_box(&self, ranges: &[Range<usize>], mut f: impl FnMut(usize, &[f64])) {
        let dim = self.cube.dim();
        debug_assert_eq!(ranges.len(), dim);
        if ranges.iter().any(|r| r.is_empty()) {
            return;
        }
        let mut idx: Vec<usize> = ranges.iter().map(|r| r.start).collect();
        let mut coords: Vec<f64> = (0..dim).map(|a| self.axis_coord(a, idx[a])).collect();
        loop {
            f(self.flatten(&idx), &coords);
            let mut axis = 0;
            loop {
                idx[axis] += 1;
                if idx[axis] < ranges[axis].end {
                    coords[axis] = self.axis_coord(axis, idx[axis]);
                    break;
                }
                idx[axis] = ranges[axis].start;
                coords[axis] = self.axis_coord(axis, idx[axis]);
                axis += 1;
                if axis == dim {
                    return;
                }
            }
        }
    }

    /// Mask of nodes whose cell center lies in the closed cube `inner`.
    pub fn center_mask(&self, inner: &Cube) -> Vec<bool> {
        let mut coords = vec![0.0; self.cube.dim()];
        (0..self.len())
            .map(|flat| {
                self.node_into(flat, &mut coords);
                inner.contains(&coords)
            })
            .collect()
    }
}

/// Real values tabulated on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridSignal {
    grid: Grid,
    values: Vec<f64>,
}

impl GridSignal {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(bad));
        }
        Ok(GridSignal { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        let len = grid.len();
        GridSignal {
            grid,
            values: vec![0.0; len],
        }
    }

    /// Tabulates `f` at every node.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(&[f64]) -> f64) -> Result<Self> {
        let mut coords = vec![0.0; grid.cube().dim()];
        let values = (0..grid.len())
            .map(|flat| {
                grid.node_into(flat, &mut coords);
                f(&coords)
            })
            .collect();
        GridSignal::new(grid, values)
    }

    /// Caller guarantees finiteness and length.
    pub(crate) fn from_parts_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(grid.len(), values.len());
        GridSignal { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scaled(&self, c: f64) -> GridSignal {
        GridSignal {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    fn zip_with(&self, other: &GridSignal, op: impl Fn(f64, f64) -> f64) -> Result<GridSignal> {
        if self.grid != other.grid {
            return Err(Error::InvalidGrid("signals live on different grids".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| op(*a, *b))
            .collect();
        Ok(GridSignal {
            grid: self.grid.clone(),
            values,
        })
    }

    pub fn add(&self, other: &GridSignal) -> Result<GridSignal> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridSignal) -> Result<GridSignal> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Multilinear interpolation between cell centers. Points in the
    /// half-cell band at the grid boundary take the nearest center value;
    /// points outside the grid cube evaluate to 0.
    pub fn interpolate(&self, point: &[f64]) -> f64 {
        let grid = &self.grid;
        let dim = grid.cube().dim();
        debug_assert_eq!(point.len(), dim);
        if !grid.cube().contains(point) {
            return 0.0;
        }
        let mut base = 0usize;
        let mut fracs = [0.0f64; 8];
        let mut strides = [0usize; 8];
        let mut fracs_vec;
        let mut strides_vec;
        let (fracs, strides): (&mut [f64], &mut [usize]) = if dim <= 8 {
            (&mut fracs[..dim], &mut strides[..dim])
        } else {
            fracs_vec = vec![0.0; dim];
            strides_vec = vec![0usize; dim];
            (&mut fracs_vec[..], &mut strides_vec[..])
        };
        for axis in 0..dim {
            let h = grid.step(axis);
            let count = grid.axis_points(axis);
            let t = (point[axis] + grid.cube().half_extent(axis)) / h - 0.5;
            let (i0, frac) = if t <= 0.0 {
                (0, 0.0)
            } else if t >= (count - 1) as f64 {
                (count - 1, 0.0)
            } else {
                let f = t.floor();
                (f as usize, t - f)
            };
            let stride = grid.stride(axis);
            base += i0 * stride;
            fracs[axis] = frac;
            strides[axis] = if frac > 0.0 { stride } else { 0 };
        }
        let mut total = 0.0;
        for corner in 0..(1usize << dim) {
            let mut weight = 1.0;
            let mut offset = 0;
            for axis in 0..dim {
                if corner >> axis & 1 == 1 {
                    if strides[axis] == 0 {
                        weight = 0.0;
                        break;
                    }
                    weight *= fracs[axis];
                    offset += strides[axis];
                } else {
                    weight *= 1.0 - fracs[axis];
                }
            }
            if weight != 0.0 {
                total += weight * self.values[base + offset];
            }
        }
        total
    }
}

/// Sampled values `c(i, j)`, `i` in `0..l` (spatial), `j` in `0..m` (temporal).
/// Stored with `j` outer: `values[j * l + i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    l: usize,
    m: usize,
    values: Vec<f64>,
}

impl SampleMatrix {
    pub fn new(l: usize, m: usize, values: Vec<f64>) -> Result<Self> {
        if l == 0 || m == 0 {
            return Err(Error::param("l, m", "must both be at least 1"));
        }
        if values.len() != l * m {
            return Err(Error::ShapeMismatch {
                expected: l * m,
                actual: values.len(),
            });
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(bad));
        }
        Ok(SampleMatrix { l, m, values })
    }

    /// From row-major nested rows `rows[i][j]`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let l = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::param("rows", "ragged rows"));
        }
        let mut values = vec![0.0; l * m];
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                values[j * l + i] = v;
            }
        }
        SampleMatrix::new(l, m, values)
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.l + i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn transpose(&self) -> SampleMatrix {
        let mut values = vec![0.0; self.values.len()];
        for j in 0..self.m {
            for i in 0..self.l {
                values[i * self.m + j] = self.get(i, j);
            }
        }
        SampleMatrix {
            l: self.m,
            m: self.l,
            values,
        }
    }

    /// Temporal columns `j = 0..m`, each a slice over `i`.
    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.l)
    }
}
