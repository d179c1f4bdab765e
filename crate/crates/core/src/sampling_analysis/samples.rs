use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mixed_norms::{Cube, Grid};

/// How the `l x m` sample points are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleLayout {
    /// `lm` independent uniform points, indexed by `(i, j)`.
    #[default]
    Independent,
    /// `l` uniform spatial points crossed with `m` uniform times.
    ProductGrid,
    /// Deterministic cell-centered points (no randomness).
    Regular,
}

/// Stable 64-bit seed for one trial, from the master seed, the sweep
/// coordinates and the trial index (first 8 bytes of a SHA-256 digest).
pub fn derive_seed(master: u64, coords: &[u64], trial: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(b"lpq-sampling/trial");
    h.update(master.to_le_bytes());
    h.update((coords.len() as u64).to_le_bytes());
    for c in coords {
        h.update(c.to_le_bytes());
    }
    h.update(trial.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Sample points `(x_i, y_j)` in a cube, stored flat with index
/// `j * l + i` and stride `n + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    cube: Cube,
    l: usize,
    m: usize,
    layout: SampleLayout,
    seed: Option<u64>,
    points: Vec<f64>,
}

fn check_counts(l: usize, m: usize) -> Result<()> {
    if l == 0 || m == 0 {
        return Err(Error::param(
            "l, m",
            format!("({l}, {m}) must both be positive"),
        ));
    }
    Ok(())
}

fn uniform(rng: &mut ChaCha8Rng, half: f64) -> f64 {
    -half + 2.0 * half * rng.gen::<f64>()
}

impl SampleSet {
    /// Uniform draws over the cube, reproducible from `seed`.
    pub fn draw(cube: &Cube, l: usize, m: usize, seed: u64, layout: SampleLayout) -> Result<Self> {
        check_counts(l, m)?;
        let d = cube.dim();
        let n = cube.n;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = Vec::with_capacity(l * m * d);
        match layout {
            SampleLayout::Independent => {
                for _ in 0..l * m {
                    for axis in 0..d {
                        points.push(uniform(&mut rng, cube.half_extent(axis)));
                    }
                }
            }
            SampleLayout::ProductGrid => {
                let xs: Vec<f64> = (0..l * n)
                    .map(|_| uniform(&mut rng, cube.r / 2.0))
                    .collect();
                let ys: Vec<f64> = (0..m).map(|_| uniform(&mut rng, cube.s / 2.0)).collect();
                for &y in &ys {
                    for i in 0..l {
                        points.extend_from_slice(&xs[i * n..(i + 1) * n]);
                        points.push(y);
                    }
                }
            }
            SampleLayout::Regular => return SampleSet::regular(cube, l, m),
        }
        Ok(SampleSet {
            cube: *cube,
            l,
            m,
            layout,
            seed: Some(seed),
            points,
        })
    }

    /// Cell centers of a `per_axis^n x m` tensor grid; `l = per_axis^n`.
    /// `l` must be a perfect `n`-th power.
    pub fn regular(cube: &Cube, l: usize, m: usize) -> Result<Self> {
        check_counts(l, m)?;
        let n = cube.n;
        let per_axis = (l as f64).powf(1.0 / n as f64).round() as usize;
        if per_axis.pow(n as u32) != l {
            return Err(Error::param(
                "l",
                format!("{l} is not a perfect power of degree {n}"),
            ));
        }
        let grid = Grid::new(*cube, per_axis, m)?;
        let mut points = Vec::with_capacity(grid.len() * cube.dim());
        let mut z = vec![0.0; cube.dim()];
        for flat in 0..grid.len() {
            grid.node_into(flat, &mut z);
            points.extend_from_slice(&z);
        }
        Ok(SampleSet {
            cube: *cube,
            l,
            m,
            layout: SampleLayout::Regular,
            seed: None,
            points,
        })
    }

    /// Explicit points, listed with index `j * l + i`.
    pub fn from_points(cube: &Cube, l: usize, m: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        check_counts(l, m)?;
        if points.len() != l * m {
            return Err(Error::ShapeMismatch {
                expected: l * m,
                actual: points.len(),
            });
        }
        let mut flat = Vec::with_capacity(l * m * cube.dim());
        for (k, p) in points.iter().enumerate() {
            if p.len() != cube.dim() {
                return Err(Error::DimensionMismatch {
                    expected: cube.n,
                    actual: p.len().saturating_sub(1),
                });
            }
            if !cube.contains(p) {
                return Err(Error::param(
                    "points",
                    format!("point {k} lies outside {cube}"),
                ));
            }
            flat.extend_from_slice(p);
        }
        Ok(SampleSet {
            cube: *cube,
            l,
            m,
            layout: SampleLayout::Independent,
            seed: None,
            points: flat,
        })
    }

    /// This set with the columns of `other` appended (`m` grows).
    pub fn with_columns_of(&self, other: &SampleSet) -> Result<SampleSet> {
        if other.l != self.l || other.cube != self.cube {
            return Err(Error::param("other", "needs the same cube and the same l"));
        }
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        Ok(SampleSet {
            cube: self.cube,
            l: self.l,
            m: self.m + other.m,
            layout: self.layout,
            seed: self.seed,
            points,
        })
    }

    pub fn cube(&self) -> &Cube {
        &self.cube
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.l * self.m
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn layout(&self) -> SampleLayout {
        self.layout
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.cube.dim()
    }

    /// Point `(x_i, y_j)`.
    pub fn point(&self, i: usize, j: usize) -> &[f64] {
        self.flat_point(j * self.l + i)
    }

    pub fn flat_point(&self, k: usize) -> &[f64] {
        let d = self.dim();
        &self.points[k * d..(k + 1) * d]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim())
    }

    pub fn raw(&self) -> &[f64] {
        &self.points
    }

    pub fn index(&self) -> PointIndex {
        let lo: Vec<f64> = (0..self.dim()).map(|a| -self.cube.half_extent(a)).collect();
        let hi: Vec<f64> = lo.iter().map(|v| -v).collect();
        PointIndex::new(&self.points, self.dim(), &lo, &hi)
    }
}

/// Bucket grid over a point cloud for max-norm nearest-neighbour queries.
#[derive(Debug, Clone)]
pub struct PointIndex {
    d: usize,
    side: f64,
    lo: Vec<f64>,
    dims: Vec<usize>,
    cells: Vec<Vec<u32>>,
    points: Vec<f64>,
}

impl PointIndex {
    /// `points` is flat with stride `d`; `lo`/`hi` bound the region where
    /// most points and queries live (others are clamped into edge cells).
    pub fn new(points: &[f64], d: usize, lo: &[f64], hi: &[f64]) -> Self {
        let count = (points.len() / d).max(1);
        let volume: f64 = lo.iter().zip(hi).map(|(a, b)| (b - a).max(1e-12)).product();
        let mut side = (volume / count as f64).powf(1.0 / d as f64);
        let dims = loop {
            let dims: Vec<usize> = lo
                .iter()
                .zip(hi)
                .map(|(a, b)| (((b - a) / side).ceil() as usize).max(1))
                .collect();
            if dims.iter().product::<usize>() <= 4 * count + 64 {
                break dims;
            }
            side *= 1.5;
        };
        let total: usize = dims.iter().product();
        let mut index = PointIndex {
            d,
            side,
            lo: lo.to_vec(),
            dims,
            cells: vec![Vec::new(); total],
            points: points.to_vec(),
        };
        let mut cell = vec![0usize; d];
        for k in 0..points.len() / d {
            index.cell_of(&points[k * d..(k + 1) * d], &mut cell);
            let c = index.cell_flat(&cell);
            index.cells[c].push(k as u32);
        }
        index
    }

    fn cell_of(&self, p: &[f64], out: &mut [usize]) {
        for a in 0..self.d {
            let c = ((p[a] - self.lo[a]) / self.side).floor();
            out[a] = c.clamp(0.0, (self.dims[a] - 1) as f64) as usize;
        }
    }

    fn cell_flat(&self, cell: &[usize]) -> usize {
        let mut flat = 0;
        for a in (0..self.d).rev() {
            flat = flat * self.dims[a] + cell[a];
        }
        flat
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Nearest point in the max-norm and its distance; ties go to the
    /// smallest index. `None` for an empty index.
    pub fn nearest(&self, p: &[f64]) -> Option<(usize, f64)> {
        if self.is_empty() {
            return None;
        }
        let d = self.d;
        let mut center = vec![0usize; d];
        self.cell_of(p, &mut center);
        let max_ring = *self.dims.iter().max().unwrap_or(&1);
        let mut best: Option<(usize, f64)> = None;
        let mut offset = vec![0i64; d];
        let mut cell = vec![0usize; d];
        for ring in 0..=max_ring as i64 {
            // visit cells at Chebyshev distance exactly `ring`
            offset.iter_mut().for_each(|o| *o = -ring);
            'cells: loop {
                let on_shell = offset.iter().any(|o| o.abs() == ring);
                if on_shell {
                    let mut inside = true;
                    for a in 0..d {
                        let c = center[a] as i64 + offset[a];
                        if c < 0 || c >= self.dims[a] as i64 {
                            inside = false;
                            break;
                        }
                        cell[a] = c as usize;
                    }
                    if inside {
                        for &k in &self.cells[self.cell_flat(&cell)] {
                            let k = k as usize;
                            let q = &self.points[k * d..(k + 1) * d];
                            let dist = p
                                .iter()
                                .zip(q)
                                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                            best = match best {
                                Some((bk, bd)) if bd < dist || (bd == dist && bk < k) => {
                                    Some((bk, bd))
                                }
                                _ => Some((k, dist)),
                            };
                        }
                    }
                }
                let mut a = 0;
                loop {
                    offset[a] += 1;
                    if offset[a] <= ring {
                        break;
                    }
                    offset[a] = -ring;
                    a += 1;
                    if a == d {
                        break 'cells;
                    }
                }
            }
            if let Some((_, bd)) = best {
                if bd < ring as f64 * self.side {
                    break;
                }
            }
        }
        best
    }
}

/// Largest max-norm distance from a probe-grid node to its nearest sample:
/// the covering radius of the sample set up to probe resolution.
pub fn covering_gap(s: &SampleSet, probe: &Grid) -> Result<f64> {
    if probe.n() != s.cube().n {
        return Err(Error::DimensionMismatch {
            expected: s.cube().n,
            actual: probe.n(),
        });
    }
    let index = s.index();
    let d = s.dim();
    Ok((0..probe.len())
        .into_par_iter()
        .map_init(
            || vec![0.0; d],
            |z, flat| {
                probe.node_into(flat, z);
                index.nearest(z).map_or(f64::INFINITY, |(_, dist)| dist)
            },
        )
        .reduce(|| 0.0, f64::max))
}
