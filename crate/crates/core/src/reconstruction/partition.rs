use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mixed_norms::{Grid, GridSignal, SampleMatrix};
use crate::sampling_analysis::SampleSet;

const NO_OWNER: u32 = u32::MAX;

/// Voronoi indicators of the samples under the max-norm, one owner per grid
/// cell whose center lies in the cube; ties go to the smallest `(j, i)`.
#[derive(Debug, Clone)]
pub struct PartitionOfUnity {
    samples: SampleSet,
    theta: f64,
    grid: Grid,
    owner: Vec<u32>,
    /// Largest center-to-owner distance.
    reach: f64,
}

/// Assigns every cell inside the sample cube to its nearest sample. Fails
/// when some cell is farther than `theta` from every sample.
pub fn build_partition(s: &SampleSet, theta: f64, grid: &Grid) -> Result<PartitionOfUnity> {
    let cube = s.cube();
    if grid.n() != cube.n {
        return Err(Error::DimensionMismatch {
            expected: cube.n,
            actual: grid.n(),
        });
    }
    if !grid.cube().contains_cube(cube) {
        return Err(Error::RestrictionOutOfBounds {
            inner: cube.to_string(),
            outer: grid.cube().to_string(),
        });
    }
    if s.len() >= NO_OWNER as usize {
        return Err(Error::param("samples", "too many points"));
    }
    let mask = grid.center_mask(cube);
    let index = s.index();
    let d = cube.dim();
    let assigned: Vec<(u32, f64)> = (0..grid.len())
        .into_par_iter()
        .map_init(
            || vec![0.0; d],
            |z, flat| {
                if !mask[flat] {
                    return (NO_OWNER, 0.0);
                }
                grid.node_into(flat, z);
                let (k, dist) = index.nearest(z).expect("sample set is nonempty");
                (k as u32, dist)
            },
        )
        .collect();
    let reach = assigned.iter().fold(0.0f64, |m, a| m.max(a.1));
    if reach > theta {
        return Err(Error::UncoverableCube { theta, gap: reach });
    }
    Ok(PartitionOfUnity {
        samples: s.clone(),
        theta,
        grid: grid.clone(),
        owner: assigned.into_iter().map(|a| a.0).collect(),
        reach,
    })
}

impl PartitionOfUnity {
    pub fn samples(&self) -> &SampleSet {
        &self.samples
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Largest distance from a cell center to its sample.
    pub fn reach(&self) -> f64 {
        self.reach
    }

    /// Flat sample index `j * l + i` owning the cell, if the cell is in the cube.
    pub fn owner(&self, cell: usize) -> Option<usize> {
        match self.owner[cell] {
            NO_OWNER => None,
            k => Some(k as usize),
        }
    }

    /// `beta_k` at grid cell `cell`.
    pub fn weight(&self, cell: usize, sample: usize) -> f64 {
        if self.owner(cell) == Some(sample) {
            1.0
        } else {
            0.0
        }
    }

    /// `sum_k beta_k` at a cell: 1 inside the cube, 0 outside.
    pub fn weight_sum(&self, cell: usize) -> f64 {
        if self.owner(cell).is_some() {
            1.0
        } else {
            0.0
        }
    }
}

/// `Q_X f = sum_k f(P_k) beta_k` on the partition's grid.
pub fn quasi_interpolate(pu: &PartitionOfUnity, values: &SampleMatrix) -> Result<GridSignal> {
    let s = pu.samples();
    if values.l() != s.l() || values.m() != s.m() {
        return Err(Error::ShapeMismatch {
            expected: s.len(),
            actual: values.l() * values.m(),
        });
    }
    let v = values.values();
    let out: Vec<f64> = pu
        .owner
        .iter()
        .map(|&k| if k == NO_OWNER { 0.0 } else { v[k as usize] })
        .collect();
    GridSignal::new(pu.grid.clone(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixed_norms::Cube;

    #[test]
    fn two_halves() {
        let cube = Cube::new(1.0, 1.0, 1).unwrap();
        let s =
            SampleSet::from_points(&cube, 2, 1, vec![vec![-0.25, 0.0], vec![0.25, 0.0]]).unwrap();
        let grid = Grid::new(cube, 8, 8).unwrap();
        let pu = build_partition(&s, 0.5, &grid).unwrap();
        for cell in 0..grid.len() {
            let z = grid.node(cell);
            let d0 = (z[0] + 0.25).abs().max(z[1].abs());
            let d1 = (z[0] - 0.25).abs().max(z[1].abs());
            // far from t = 0 both samples are equidistant and the lower index wins
            assert_eq!(pu.owner(cell), Some(if d1 < d0 { 1 } else { 0 }));
            if z[1].abs() < 0.1875 {
                assert_eq!(pu.owner(cell), Some(if z[0] < 0.0 { 0 } else { 1 }));
            }
        }
        assert!(matches!(
            build_partition(&s, 0.3, &grid),
            Err(Error::UncoverableCube { .. })
        ));
    }
}
