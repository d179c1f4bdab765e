use std::ops::Range;
use std::sync::Arc;

use rayon::prelude::*;

use super::lattice::Lattice;
use super::phi::{GeneratorPhi, SUPPORT_RADIUS};
use crate::error::{Error, Result};
use crate::mixed_norms::{iterated_norm, Exponents, Grid, GridSignal};

/// `K(x,y,s,t) = sum over nodes of phi(x-a, y-b) phi(s-a, t-b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    phi: GeneratorPhi,
    lattice: Arc<Lattice>,
}

/// Coefficients of `sum c_v phi(. - v)` over the nodes of a lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffSeq {
    lattice: Arc<Lattice>,
    coefficients: Vec<f64>,
}

/// Result of applying the integral operator on a grid.
#[derive(Debug, Clone)]
pub struct Applied {
    pub signal: GridSignal,
    /// Nodes whose support sticks out of the grid; their contribution is
    /// truncated.
    pub truncated: Vec<usize>,
}

impl Kernel {
    pub fn new(phi: GeneratorPhi, lattice: Lattice) -> Result<Self> {
        Kernel::shared(phi, Arc::new(lattice))
    }

    pub fn shared(phi: GeneratorPhi, lattice: Arc<Lattice>) -> Result<Self> {
        if phi.n() != lattice.n() {
            return Err(Error::DimensionMismatch {
                expected: phi.n(),
                actual: lattice.n(),
            });
        }
        Ok(Kernel { phi, lattice })
    }

    pub fn phi(&self) -> &GeneratorPhi {
        &self.phi
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn lattice_arc(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn n(&self) -> usize {
        self.phi.n()
    }

    /// `phi(point - node_i)`.
    #[inline]
    pub fn translate(&self, i: usize, point: &[f64]) -> f64 {
        self.phi.eval_shifted(point, self.lattice.node(i))
    }

    /// `K(p, q)` with `p = (x, y)` and `q = (s, t)`. Only the node whose
    /// support holds `p` can contribute.
    pub fn eval(&self, p: &[f64], q: &[f64]) -> f64 {
        match self.lattice.support_node(p) {
            Some(i) => self.translate(i, p) * self.translate(i, q),
            None => 0.0,
        }
    }

    /// `sum_v c_v phi(point - v)` at a single point.
    pub fn eval_expansion(&self, c: &CoeffSeq, point: &[f64]) -> f64 {
        match self.lattice.support_node(point) {
            Some(i) => c.coefficients[i] * self.translate(i, point),
            None => 0.0,
        }
    }

    fn check_coeffs(&self, c: &CoeffSeq) -> Result<()> {
        if *c.lattice != *self.lattice {
            return Err(Error::param(
                "coefficients",
                "belong to a different lattice",
            ));
        }
        Ok(())
    }

    fn check_grid(&self, grid: &Grid) -> Result<()> {
        if grid.n() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                actual: grid.n(),
            });
        }
        Ok(())
    }

    /// Grid index ranges covering the support box of node `i`.
    pub(crate) fn node_ranges(&self, grid: &Grid, i: usize) -> Vec<Range<usize>> {
        self.lattice
            .node(i)
            .iter()
            .enumerate()
            .map(|(axis, &u)| grid.axis_range(axis, u - SUPPORT_RADIUS, u + SUPPORT_RADIUS))
            .collect()
    }

    /// Nodes whose support is not inside the grid's cube.
    pub fn truncated_nodes(&self, grid: &Grid) -> Vec<usize> {
        (0..self.lattice.len())
            .filter(|&i| !self.lattice.support_inside(i, grid.cube()))
            .collect()
    }

    /// Tabulates `sum c_v phi(. - v)` exactly at the grid nodes. Fails if a
    /// node with a nonzero coefficient has support outside the grid.
    pub fn synthesize(&self, c: &CoeffSeq, grid: &Grid) -> Result<GridSignal> {
        self.check_coeffs(c)?;
        self.check_grid(grid)?;
        if let Some(&node) = self
            .truncated_nodes(grid)
            .iter()
            .find(|&&i| c.coefficients[i] != 0.0)
        {
            return Err(Error::TruncatedSupport { node });
        }
        Ok(self.tabulate(&c.coefficients, grid))
    }

    /// Tabulation without the truncation check; parallel over time slices.
    fn tabulate(&self, coeffs: &[f64], grid: &Grid) -> GridSignal {
        let spatial = grid.spatial_len();
        let n = self.n();
        let active: Vec<(usize, Vec<Range<usize>>)> = (0..self.lattice.len())
            .filter(|&i| coeffs[i] != 0.0)
            .map(|i| (i, self.node_ranges(grid, i)))
            .filter(|(_, r)| r.iter().all(|r| !r.is_empty()))
            .collect();
        let mut values = vec![0.0; grid.len()];
        values
            .par_chunks_mut(spatial)
            .enumerate()
            .for_each(|(j, slice)| {
                for (i, ranges) in &active {
                    if !ranges[n].contains(&j) {
                        continue;
                    }
                    let mut sub = ranges.clone();
                    sub[n] = j..j + 1;
                    let offset = j * spatial;
                    let ci = coeffs[*i];
                    let node = self.lattice.node(*i);
                    grid.for_each_in_box(&sub, |flat, z| {
                        slice[flat - offset] += ci * self.phi.eval_shifted(z, node);
                    });
                }
            });
        GridSignal::from_parts_unchecked(grid.clone(), values)
    }

    /// Midpoint-rule inner products `<f, phi(. - v)>` for every node, plus
    /// the nodes whose support the grid truncates.
    pub fn inner_products(&self, f: &GridSignal) -> Result<(Vec<f64>, Vec<usize>)> {
        let grid = f.grid();
        self.check_grid(grid)?;
        let vol = grid.cell_volume();
        let vals = f.values();
        let ip: Vec<f64> = (0..self.lattice.len())
            .into_par_iter()
            .map(|i| {
                let node = self.lattice.node(i);
                let mut acc = 0.0;
                grid.for_each_in_box(&self.node_ranges(grid, i), |flat, z| {
                    acc += vals[flat] * self.phi.eval_shifted(z, node);
                });
                acc * vol
            })
            .collect();
        Ok((ip, self.truncated_nodes(grid)))
    }

    /// Coefficients of the orthogonal projection onto the span of the
    /// translates: `<f, phi_v> / ||phi||^2`.
    pub fn analyze(&self, f: &GridSignal) -> Result<CoeffSeq> {
        let (ip, truncated) = self.inner_products(f)?;
        if !truncated.is_empty() {
            log::warn!(
                "analysis grid truncates {} node supports; coefficients are biased",
                truncated.len()
            );
        }
        let norm2 = self.phi.l2_norm_squared();
        CoeffSeq::new(
            self.lattice.clone(),
            ip.into_iter().map(|v| v / norm2).collect(),
        )
    }

    /// `Tf(p) = int K(p, q) f(q) dq` by the midpoint rule on `f`'s grid.
    /// Because `K` is a finite sum of products this equals the direct double
    /// sum over grid nodes, computed in `O(N)` instead of `O(N^2)`.
    pub fn apply(&self, f: &GridSignal) -> Result<Applied> {
        let (ip, truncated) = self.inner_products(f)?;
        if !truncated.is_empty() {
            log::warn!(
                "grid truncates {} node supports; Tf carries truncation bias",
                truncated.len()
            );
        }
        Ok(Applied {
            signal: self.tabulate(&ip, f.grid()),
            truncated,
        })
    }

    /// Same kernel with every node moved by `shift`.
    pub fn translated(&self, shift: &[f64]) -> Result<Kernel> {
        Kernel::new(self.phi, self.lattice.translated(shift)?)
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Result<Kernel> {
        Kernel::shared(self.phi.with_amplitude(amplitude)?, self.lattice.clone())
    }
}

impl CoeffSeq {
    pub fn new(lattice: Arc<Lattice>, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != lattice.len() {
            return Err(Error::ShapeMismatch {
                expected: lattice.len(),
                actual: coefficients.len(),
            });
        }
        if let Some(i) = coefficients.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(CoeffSeq {
            lattice,
            coefficients,
        })
    }

    pub fn zeros(lattice: Arc<Lattice>) -> Self {
        let len = lattice.len();
        CoeffSeq {
            lattice,
            coefficients: vec![0.0; len],
        }
    }

    pub fn one_hot(lattice: Arc<Lattice>, node: usize) -> Result<Self> {
        if node >= lattice.len() {
            return Err(Error::param("node", format!("{node} is out of range")));
        }
        let mut c = CoeffSeq::zeros(lattice);
        c.coefficients[node] = 1.0;
        Ok(c)
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn into_coefficients(self) -> Vec<f64> {
        self.coefficients
    }

    fn zip_with(&self, other: &CoeffSeq, op: impl Fn(f64, f64) -> f64) -> Result<CoeffSeq> {
        if *self.lattice != *other.lattice {
            return Err(Error::param("coefficients", "belong to different lattices"));
        }
        CoeffSeq::new(
            self.lattice.clone(),
            self.coefficients
                .iter()
                .zip(&other.coefficients)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        )
    }

    pub fn add(&self, other: &CoeffSeq) -> Result<CoeffSeq> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &CoeffSeq) -> Result<CoeffSeq> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scaled(&self, k: f64) -> CoeffSeq {
        CoeffSeq {
            lattice: self.lattice.clone(),
            coefficients: self.coefficients.iter().map(|c| c * k).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.coefficients.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// `l^{p,q}` norm over the nodes: inner over nodes sharing a temporal
    /// coordinate, outer across temporal coordinates.
    pub fn mixed_norm(&self, e: &Exponents) -> f64 {
        let mut order: Vec<usize> = (0..self.coefficients.len()).collect();
        order.sort_by(|&a, &b| {
            self.lattice
                .beta(a)
                .total_cmp(&self.lattice.beta(b))
                .then(a.cmp(&b))
        });
        let groups = order
            .chunk_by(|&a, &b| self.lattice.beta(a) == self.lattice.beta(b))
            .map(|g| (1.0, g.iter().map(|&i| (1.0, self.coefficients[i]))));
        iterated_norm(e, groups)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel_space::{Placement, MIN_GAP};
    use crate::mixed_norms::Cube;

    fn canonical() -> Kernel {
        let cube = Cube::new(4.0, 4.0, 1).unwrap();
        let lat = Lattice::scaled_integer(&cube, MIN_GAP, Placement::Contained).unwrap();
        Kernel::new(GeneratorPhi::normalized(1).unwrap(), lat).unwrap()
    }

    #[test]
    fn kernel_point_values() {
        let k = canonical();
        let a = k.phi().amplitude();
        let v = k.lattice().node(7).to_vec();
        assert!((k.eval(&v, &v) - a * a).abs() < 1e-12);
        let w = k.lattice().node(8).to_vec();
        assert_eq!(k.eval(&v, &w), 0.0);
        assert_eq!(
            k.eval(&[0.05, 0.1], &[-0.1, 0.02]),
            k.eval(&[-0.1, 0.02], &[0.05, 0.1])
        );
    }

    #[test]
    fn synthesize_rejects_truncation() {
        let k = canonical();
        let grid = Grid::new(Cube::new(2.0, 2.0, 1).unwrap(), 49, 49).unwrap();
        let c = CoeffSeq::one_hot(k.lattice_arc().clone(), 0).unwrap();
        assert!(matches!(
            k.synthesize(&c, &grid),
            Err(Error::TruncatedSupport { node: 0 })
        ));
        let c = CoeffSeq::one_hot(k.lattice_arc().clone(), 12).unwrap();
        let f = k.synthesize(&c, &grid).unwrap();
        assert!((f.max_abs() - k.phi().amplitude()).abs() < 1e-12);
    }

    #[test]
    fn coefficient_norm_groups_by_time() {
        let lat = Arc::new(
            Lattice::new(
                1,
                vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
                MIN_GAP,
            )
            .unwrap(),
        );
        let c = CoeffSeq::new(lat, vec![1.0, 1.0, 1.0]).unwrap();
        let e = Exponents::new(1.0, f64::INFINITY).unwrap();
        assert_eq!(c.mixed_norm(&e), 2.0);
        let e = Exponents::new(f64::INFINITY, 1.0).unwrap();
        assert_eq!(c.mixed_norm(&e), 2.0);
        let e = Exponents::new(2.0, 1.0).unwrap();
        assert!((c.mixed_norm(&e) - (2f64.sqrt() + 1.0)).abs() < 1e-15);
    }
}
