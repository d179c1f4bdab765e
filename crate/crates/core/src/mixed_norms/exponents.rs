use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hölder conjugate of `p`: the `p'` with `1/p + 1/p' = 1`, using `1/inf = 0`.
pub fn holder_conjugate(p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 || p == f64::NEG_INFINITY {
        return Err(Error::InvalidExponent(p));
    }
    if p == 1.0 {
        Ok(f64::INFINITY)
    } else if p.is_infinite() {
        Ok(1.0)
    } else {
        Ok(p / (p - 1.0))
    }
}

/// `1/p` with the convention `1/inf = 0`.
pub(crate) fn recip(p: f64) -> f64 {
    if p.is_infinite() {
        0.0
    } else {
        1.0 / p
    }
}

/// The exponent pair `(p, q)`: `p` acts on the spatial variable (inner),
/// `q` on the temporal variable (outer).
///
/// Conjugates are derived at construction and cannot be set independently.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawExponents", into = "RawExponents")]
pub struct Exponents {
    p: f64,
    q: f64,
    p_conj: f64,
    q_conj: f64,
}

#[derive(Serialize, Deserialize)]
struct RawExponents {
    p: f64,
    q: f64,
}

impl TryFrom<RawExponents> for Exponents {
    type Error = Error;
    fn try_from(raw: RawExponents) -> Result<Self> {
        Exponents::new(raw.p, raw.q)
    }
}

impl From<Exponents> for RawExponents {
    fn from(e: Exponents) -> Self {
        RawExponents { p: e.p, q: e.q }
    }
}

impl Exponents {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        let p_conj = holder_conjugate(p)?;
        let q_conj = holder_conjugate(q)?;
        Ok(Exponents {
            p,
            q,
            p_conj,
            q_conj,
        })
    }

    /// `p = q = r`.
    pub fn uniform(r: f64) -> Result<Self> {
        Self::new(r, r)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn p_conj(&self) -> f64 {
        self.p_conj
    }

    pub fn q_conj(&self) -> f64 {
        self.q_conj
    }

    /// The conjugate pair `(p', q')`.
    pub fn conjugate(&self) -> Exponents {
        Exponents {
            p: self.p_conj,
            q: self.q_conj,
            p_conj: self.p,
            q_conj: self.q,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.p.is_finite() && self.q.is_finite()
    }

    /// Errors unless both exponents are finite; the probability bounds are
    /// only stated for `1 <= p, q < inf`.
    pub fn require_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::param(
                "exponents",
                format!("p = {}, q = {} must both be finite here", self.p, self.q),
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conjugate_examples() {
        assert_eq!(holder_conjugate(2.0).unwrap(), 2.0);
        assert_eq!(holder_conjugate(1.0).unwrap(), f64::INFINITY);
        assert_eq!(holder_conjugate(f64::INFINITY).unwrap(), 1.0);
        assert!((holder_conjugate(4.0).unwrap() - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn conjugate_rejects_bad_input() {
        for bad in [0.5, 0.0, -1.0, f64::NAN, f64::NEG_INFINITY] {
            assert!(holder_conjugate(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn conjugate_is_involution() {
        for p in [1.0, 1.5, 2.0, 3.0, 7.25, f64::INFINITY] {
            let back = holder_conjugate(holder_conjugate(p).unwrap()).unwrap();
            if p.is_infinite() {
                assert!(back.is_infinite());
            } else {
                assert!((back - p).abs() < 1e-12 * p);
            }
        }
    }

    #[test]
    fn reciprocal_identity_holds() {
        let e = Exponents::new(3.0, 1.25).unwrap();
        assert!((recip(e.p()) + recip(e.p_conj()) - 1.0).abs() < 1e-15);
        assert!((recip(e.q()) + recip(e.q_conj()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn serde_rederives_conjugates() {
        let e: Exponents = serde_json::from_str(r#"{"p": 4.0, "q": 1.0}"#).unwrap();
        assert!(e.q_conj().is_infinite());
        assert!((e.p_conj() - 4.0 / 3.0).abs() < 1e-15);
        assert!(serde_json::from_str::<Exponents>(r#"{"p": 0.5, "q": 1.0}"#).is_err());
    }
}
