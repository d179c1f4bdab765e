use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::phi::SUPPORT_RADIUS;
use crate::error::{Error, Result};
use crate::mixed_norms::Cube;

/// Smallest admissible separation: translates of the generator have disjoint
/// interiors once nodes are this far apart in the max-norm.
pub const MIN_GAP: f64 = 2.0 / 3.0;

const SEP_TOL: f64 = 1e-12;
const BUCKET: f64 = 2.0 * SUPPORT_RADIUS;

/// Which nodes of a scaled integer lattice are kept for a study cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    /// Node supports lie inside the cube.
    Contained,
    /// Node supports meet the interior of the cube.
    Touching,
}

/// Finite separated node set in `R^n x R`, stored flat with stride `n + 1`.
#[derive(Debug, Clone)]
pub struct Lattice {
    n: usize,
    gap: f64,
    nodes: Vec<f64>,
    buckets: HashMap<Vec<i64>, Vec<usize>>,
}

impl PartialEq for Lattice {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.gap == other.gap && self.nodes == other.nodes
    }
}

fn bucket_of(u: f64) -> i64 {
    (u / BUCKET).floor() as i64
}

impl Lattice {
    /// Builds a lattice from explicit nodes, checking max-norm separation.
    pub fn new(n: usize, nodes: Vec<Vec<f64>>, gap: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("n", "must be at least 1"));
        }
        if !(gap.is_finite() && gap >= MIN_GAP * (1.0 - SEP_TOL)) {
            return Err(Error::param(
                "gap",
                format!("{gap} is below the minimum separation 2/3"),
            ));
        }
        let dim = n + 1;
        let mut flat = Vec::with_capacity(nodes.len() * dim);
        for (i, v) in nodes.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: v.len().saturating_sub(1),
                });
            }
            if let Some(k) = v.iter().position(|u| !u.is_finite()) {
                return Err(Error::NonFinite(i * dim + k));
            }
            flat.extend_from_slice(v);
        }
        let mut lattice = Lattice {
            n,
            gap,
            nodes: flat,
            buckets: HashMap::new(),
        };
        lattice.rebuild_index();
        lattice.check_separation()?;
        Ok(lattice)
    }

    pub fn empty(n: usize) -> Result<Self> {
        Lattice::new(n, Vec::new(), MIN_GAP)
    }

    /// Nodes `spacing * k`, `k in Z^{n+1}`, kept according to `placement`.
    /// Ordered with the temporal index outermost and spatial axis 0 fastest.
    pub fn scaled_integer(cube: &Cube, spacing: f64, placement: Placement) -> Result<Self> {
        if !(spacing.is_finite() && spacing >= MIN_GAP * (1.0 - SEP_TOL)) {
            return Err(Error::param(
                "spacing",
                format!("{spacing} is below the minimum separation 2/3"),
            ));
        }
        let dim = cube.dim();
        let per_axis: Vec<Vec<f64>> = (0..dim)
            .map(|axis| {
                let half = cube.half_extent(axis);
                let kmax = ((half + SUPPORT_RADIUS) / spacing).ceil() as i64 + 1;
                (-kmax..=kmax)
                    .map(|k| k as f64 * spacing)
                    .filter(|&c| match placement {
                        Placement::Contained => {
                            c.abs() + SUPPORT_RADIUS <= half * (1.0 + SEP_TOL) + SEP_TOL
                        }
                        Placement::Touching => c.abs() - SUPPORT_RADIUS < half - SEP_TOL,
                    })
                    .collect()
            })
            .collect();
        let mut nodes = Vec::new();
        if per_axis.iter().all(|v| !v.is_empty()) {
            let mut idx = vec![0usize; dim];
            loop {
                nodes.push((0..dim).map(|a| per_axis[a][idx[a]]).collect());
                let mut axis = 0;
                loop {
                    idx[axis] += 1;
                    if idx[axis] < per_axis[axis].len() {
                        break;
                    }
                    idx[axis] = 0;
                    axis += 1;
                    if axis == dim {
                        break;
                    }
                }
                if axis == dim {
                    break;
                }
            }
        }
        Lattice::new(cube.n, nodes, spacing)
    }

    fn rebuild_index(&mut self) {
        self.buckets.clear();
        for i in 0..self.len() {
            let key: Vec<i64> = self.node(i).iter().map(|&u| bucket_of(u)).collect();
            self.buckets.entry(key).or_default().push(i);
        }
    }

    fn check_separation(&self) -> Result<()> {
        let mut near = Vec::new();
        for i in 0..self.len() {
            self.nodes_within(self.node(i), self.gap * (1.0 - SEP_TOL), &mut near);
            if let Some(&j) = near.iter().find(|&&j| j != i) {
                let (a, b) = (i.min(j), i.max(j));
                return Err(Error::LatticeSeparation {
                    a,
                    b,
                    gap: self.gap,
                });
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.n + 1
    }

    pub fn gap(&self) -> f64 {
        self.gap
    }

    pub fn len(&self) -> usize {
        self.nodes.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.nodes[i * d..(i + 1) * d]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> {
        self.nodes.chunks_exact(self.dim())
    }

    /// Temporal coordinate of node `i`.
    pub fn beta(&self, i: usize) -> f64 {
        self.node(i)[self.n]
    }

    /// Indices of nodes within max-norm distance `radius` of `point`
    /// (closed ball), written to `out` in ascending order.
    pub fn nodes_within(&self, point: &[f64], radius: f64, out: &mut Vec<usize>) {
        out.clear();
        if self.is_empty() {
            return;
        }
        let dim = self.dim();
        let lo: Vec<i64> = point.iter().map(|&u| bucket_of(u - radius)).collect();
        let hi: Vec<i64> = point.iter().map(|&u| bucket_of(u + radius)).collect();
        let mut key = lo.clone();
        loop {
            if let Some(list) = self.buckets.get(key.as_slice()) {
                for &i in list {
                    let v = self.node(i);
                    if (0..dim).all(|a| (v[a] - point[a]).abs() <= radius) {
                        out.push(i);
                    }
                }
            }
            let mut axis = 0;
            loop {
                key[axis] += 1;
                if key[axis] <= hi[axis] {
                    break;
                }
                key[axis] = lo[axis];
                axis += 1;
                if axis == dim {
                    out.sort_unstable();
                    return;
                }
            }
        }
    }

    /// Index of the node whose support box contains `point`, if any. Supports
    /// only share boundary points, where the generator vanishes, so the first
    /// hit is enough for evaluation.
    pub fn support_node(&self, point: &[f64]) -> Option<usize> {
        let mut out = Vec::new();
        self.nodes_within(point, SUPPORT_RADIUS, &mut out);
        out.first().copied()
    }

    /// Every node moved by `shift`.
    pub fn translated(&self, shift: &[f64]) -> Result<Lattice> {
        if shift.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: shift.len().saturating_sub(1),
            });
        }
        let nodes = self
            .nodes()
            .map(|v| v.iter().zip(shift).map(|(a, b)| a + b).collect())
            .collect();
        Lattice::new(self.n, nodes, self.gap)
    }

    /// Smallest cube centered at the origin holding every node support.
    pub fn support_hull(&self) -> Option<Cube> {
        if self.is_empty() {
            return None;
        }
        let mut half = vec![0.0f64; self.dim()];
        for v in self.nodes() {
            for (h, u) in half.iter_mut().zip(v) {
                *h = h.max(u.abs() + SUPPORT_RADIUS);
            }
        }
        let r = half[..self.n].iter().cloned().fold(0.0, f64::max);
        Cube::new(2.0 * r, 2.0 * half[self.n], self.n).ok()
    }

    /// Whether the support box of node `i` lies inside `cube`.
    pub fn support_inside(&self, i: usize, cube: &Cube) -> bool {
        self.node(i).iter().enumerate().all(|(axis, &u)| {
            u.abs() + SUPPORT_RADIUS <= cube.half_extent(axis) * (1.0 + 1e-12) + 1e-12
        })
    }
}
