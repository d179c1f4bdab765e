use serde::{Deserialize, Serialize};

use super::kernel::Kernel;
use super::lattice::{Lattice, Placement, MIN_GAP};
use super::phi::GeneratorPhi;
use crate::error::{Error, Result};
use crate::mixed_norms::Cube;

/// Generator amplitude: the string `"normalized"` or a positive number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAmplitude", into = "RawAmplitude")]
pub enum Amplitude {
    Normalized,
    Value(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawAmplitude {
    Text(String),
    Number(f64),
}

impl TryFrom<RawAmplitude> for Amplitude {
    type Error = String;

    fn try_from(raw: RawAmplitude) -> std::result::Result<Self, String> {
        match raw {
            RawAmplitude::Text(s) if s == "normalized" => Ok(Amplitude::Normalized),
            RawAmplitude::Text(s) => Err(format!(
                "amplitude must be \"normalized\" or a number, got {s:?}"
            )),
            RawAmplitude::Number(v) => Ok(Amplitude::Value(v)),
        }
    }
}

impl From<Amplitude> for RawAmplitude {
    fn from(a: Amplitude) -> Self {
        match a {
            Amplitude::Normalized => RawAmplitude::Text("normalized".into()),
            Amplitude::Value(v) => RawAmplitude::Number(v),
        }
    }
}

fn default_spacing() -> f64 {
    MIN_GAP
}

fn default_placement() -> Placement {
    Placement::Contained
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LatticeConfig {
    /// `spacing * Z^{n+1}` intersected with the study cube per `placement`.
    ScaledInteger {
        #[serde(default = "default_spacing")]
        spacing: f64,
        #[serde(default = "default_placement")]
        placement: Placement,
    },
    Explicit {
        nodes: Vec<Vec<f64>>,
        #[serde(default = "default_spacing")]
        gap: f64,
    },
}

impl Default for LatticeConfig {
    fn default() -> Self {
        LatticeConfig::ScaledInteger {
            spacing: MIN_GAP,
            placement: Placement::Contained,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub n: usize,
    pub amplitude: Amplitude,
    #[serde(default)]
    pub lattice: LatticeConfig,
}

impl KernelConfig {
    /// Appends one message per problem, prefixed with `prefix`.
    pub fn validate(&self, prefix: &str, errors: &mut Vec<String>) {
        if self.n == 0 {
            errors.push(format!("{prefix}.n: must be at least 1"));
        }
        if let Amplitude::Value(a) = self.amplitude {
            if !(a.is_finite() && a > 0.0) {
                errors.push(format!("{prefix}.amplitude: {a} must be positive"));
            }
        }
        match &self.lattice {
            LatticeConfig::ScaledInteger { spacing, .. } => {
                if !(spacing.is_finite() && *spacing >= MIN_GAP * (1.0 - 1e-12)) {
                    errors.push(format!(
                        "{prefix}.lattice.spacing: {spacing} is below the minimum separation 2/3"
                    ));
                }
            }
            LatticeConfig::Explicit { nodes, gap } => {
                if !(gap.is_finite() && *gap >= MIN_GAP * (1.0 - 1e-12)) {
                    errors.push(format!(
                        "{prefix}.lattice.gap: {gap} is below the minimum separation 2/3"
                    ));
                }
                for (i, v) in nodes.iter().enumerate() {
                    if v.len() != self.n + 1 {
                        errors.push(format!(
                            "{prefix}.lattice.nodes[{i}]: expected {} coordinates, got {}",
                            self.n + 1,
                            v.len()
                        ));
                    }
                }
            }
        }
    }

    pub fn phi(&self) -> Result<GeneratorPhi> {
        match self.amplitude {
            Amplitude::Normalized => GeneratorPhi::normalized(self.n),
            Amplitude::Value(a) => GeneratorPhi::new(self.n, a),
        }
    }

    pub fn build(&self, cube: &Cube) -> Result<Kernel> {
        if cube.n != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: cube.n,
            });
        }
        let lattice = match &self.lattice {
            LatticeConfig::ScaledInteger { spacing, placement } => {
                Lattice::scaled_integer(cube, *spacing, *placement)?
            }
            LatticeConfig::Explicit { nodes, gap } => Lattice::new(self.n, nodes.clone(), *gap)?,
        };
        Kernel::new(self.phi()?, lattice)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_amplitude_forms() {
        let c: KernelConfig = toml::from_str("n = 1\namplitude = \"normalized\"\n").unwrap();
        assert_eq!(c.amplitude, Amplitude::Normalized);
        assert_eq!(c.lattice, LatticeConfig::default());
        let c: KernelConfig = toml::from_str(
            "n = 1\namplitude = 2.5\n[lattice]\nkind = \"explicit\"\nnodes = [[0.0, 0.0]]\n",
        )
        .unwrap();
        assert_eq!(c.amplitude, Amplitude::Value(2.5));
        let cube = Cube::new(2.0, 2.0, 1).unwrap();
        assert_eq!(c.build(&cube).unwrap().lattice().len(), 1);
        assert!(toml::from_str::<KernelConfig>("n = 1\namplitude = \"unit\"\n").is_err());
    }

    #[test]
    fn validation_lists_every_problem() {
        let c = KernelConfig {
            n: 0,
            amplitude: Amplitude::Value(-1.0),
            lattice: LatticeConfig::ScaledInteger {
                spacing: 0.5,
                placement: Placement::Touching,
            },
        };
        let mut errs = Vec::new();
        c.validate("kernel", &mut errs);
        assert_eq!(errs.len(), 3);
        assert!(errs[0].starts_with("kernel.n"));
    }
}
