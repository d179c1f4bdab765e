use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixed_norms::Exponents;

/// Half-width of the generator's support in every coordinate; the support is
/// the l1 ball `3 * ||z||_1 <= 1`, contained in `[-1/3, 1/3]^{n+1}`.
pub const SUPPORT_RADIUS: f64 = 1.0 / 3.0;

/// Piecewise-linear pyramid `A * max(1 - 3 sum|x_i| - 3|y|, 0)` on `R^n x R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorPhi {
    n: usize,
    amplitude: f64,
    normalized: bool,
}

impl GeneratorPhi {
    pub fn new(n: usize, amplitude: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("n", "must be at least 1"));
        }
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(Error::param(
                "amplitude",
                format!("{amplitude} must be positive"),
            ));
        }
        Ok(GeneratorPhi {
            n,
            amplitude,
            normalized: false,
        })
    }

    /// Amplitude chosen so that `||phi||_{L^2(R^{n+1})} = 1`.
    pub fn normalized(n: usize) -> Result<Self> {
        let mut phi = GeneratorPhi::new(n, normalize_phi(n)?)?;
        phi.normalized = true;
        Ok(phi)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Result<Self> {
        GeneratorPhi::new(self.n, amplitude)
    }

    /// Evaluates at a point of `R^{n+1}` (spatial coordinates first).
    #[inline]
    pub fn eval(&self, z: &[f64]) -> f64 {
        debug_assert_eq!(z.len(), self.n + 1);
        let l1: f64 = z.iter().map(|u| u.abs()).sum();
        self.amplitude * (1.0 - 3.0 * l1).max(0.0)
    }

    /// Evaluates `phi(z - center)` without allocating.
    #[inline]
    pub fn eval_shifted(&self, z: &[f64], center: &[f64]) -> f64 {
        let mut l1 = 0.0;
        for (a, b) in z.iter().zip(center) {
            l1 += (a - b).abs();
        }
        let t = 1.0 - 3.0 * l1;
        if t > 0.0 {
            self.amplitude * t
        } else {
            0.0
        }
    }

    /// `||phi||_{L^2}^2` in closed form: `A^2 2^{d+1} / (3^d (d+2)!)`, `d = n+1`.
    pub fn l2_norm_squared(&self) -> f64 {
        self.amplitude * self.amplitude * unit_pyramid_l2_squared(self.n + 1)
    }

    /// Exact `int |phi|` over `R^{n+1}`: `A 2^d / (3^d (d+1)!)`.
    pub fn l1_norm(&self) -> f64 {
        let d = self.n + 1;
        self.amplitude * 2f64.powi(d as i32) / (3f64.powi(d as i32) * factorial(d + 1))
    }
}

impl GeneratorPhi {
    /// Exact `||phi||_{L^{a,b}(R^{n+1})}` for exponents `(a, b) = (e.p(), e.q())`.
    /// Scaling the time slice `x -> (1 - 3|y|) x` reduces both integrals to
    /// one-dimensional ones.
    pub fn mixed_norm(&self, e: &Exponents) -> f64 {
        let n = self.n as i32;
        let (a, b) = (e.p(), e.q());
        let (inner, kappa) = if a.is_infinite() {
            (1.0, 1.0)
        } else {
            let prod: f64 = (1..=self.n).map(|i| a + i as f64).product();
            let i = 2f64.powi(n) / (3f64.powi(n) * prod);
            (i.powf(1.0 / a), 1.0 + self.n as f64 / a)
        };
        let outer = if b.is_infinite() {
            1.0
        } else {
            (2.0 / (3.0 * (b * kappa + 1.0))).powf(1.0 / b)
        };
        self.amplitude * inner * outer
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// `int_{R^d} max(1 - 3||z||_1, 0)^2 dz`. Over each orthant the substitution
/// `u = 3z` turns this into `3^{-d} int_simplex (1 - sum u)^2 du = 3^{-d} 2/(d+2)!`.
fn unit_pyramid_l2_squared(d: usize) -> f64 {
    2f64.powi(d as i32) * 2.0 / (3f64.powi(d as i32) * factorial(d + 2))
}

/// Amplitude `A*` with `||phi_{A*}||_{L^2(R^{n+1})} = 1`. For `n = 1` this is
/// `3 sqrt 3`.
pub fn normalize_phi(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::param("n", "must be at least 1"));
    }
    Ok(1.0 / unit_pyramid_l2_squared(n + 1).sqrt())
}

/// The prefactor `(3/2)^{n/2} 3 / sqrt(n^2 - 3n - 2)` printed alongside the
/// pyramid generator. It is not real for `n <= 3` and does not coincide with
/// [`normalize_phi`] where it is real.
pub fn printed_prefactor(n: usize) -> Option<f64> {
    let n = n as f64;
    let radicand = n * n - 3.0 * n - 2.0;
    (radicand > 0.0).then(|| 1.5f64.powf(n / 2.0) * 3.0 / radicand.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_values() {
        let phi = GeneratorPhi::new(1, 1.0).unwrap();
        assert_eq!(phi.eval(&[0.0, 0.0]), 1.0);
        assert_eq!(phi.eval(&[1.0 / 6.0, 1.0 / 6.0]), 0.0);
        assert!((phi.eval(&[1.0 / 12.0, 1.0 / 12.0]) - 0.5).abs() < 1e-15);
        assert_eq!(phi.eval(&[0.4, 0.0]), 0.0);
        assert_eq!(phi.eval_shifted(&[1.0, 2.0], &[1.0, 2.0]), 1.0);
    }

    #[test]
    fn n1_normalizer_is_three_root_three() {
        let a = normalize_phi(1).unwrap();
        assert!((a - 3.0 * 3f64.sqrt()).abs() < 1e-12);
        assert!((a - 5.196152423).abs() < 1e-9);
        let phi = GeneratorPhi::normalized(1).unwrap();
        assert!((phi.l2_norm_squared() - 1.0).abs() < 1e-12);
        assert!(phi.is_normalized());
    }

    #[test]
    fn printed_prefactor_is_not_real_for_small_n() {
        for n in 1..=3 {
            assert!(printed_prefactor(n).is_none());
        }
        let p4 = printed_prefactor(4).unwrap();
        assert!((p4 - 2.25 * 3.0 / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(GeneratorPhi::new(0, 1.0).is_err());
        assert!(GeneratorPhi::new(1, 0.0).is_err());
        assert!(GeneratorPhi::new(1, f64::NAN).is_err());
    }

    #[test]
    fn closed_form_mixed_norms() {
        let phi = GeneratorPhi::normalized(1).unwrap();
        let two = Exponents::uniform(2.0).unwrap();
        assert!((phi.mixed_norm(&two) - 1.0).abs() < 1e-14);
        let one = Exponents::uniform(1.0).unwrap();
        assert!((phi.mixed_norm(&one) - phi.l1_norm()).abs() < 1e-14);
        let inf = Exponents::uniform(f64::INFINITY).unwrap();
        assert!((phi.mixed_norm(&inf) - phi.amplitude()).abs() < 1e-14);
        let phi3 = GeneratorPhi::normalized(3).unwrap();
        assert!((phi3.mixed_norm(&two) - 1.0).abs() < 1e-13);
    }
}
