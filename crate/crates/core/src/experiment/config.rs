use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel_space::{Amplitude, KernelConfig, Stencil};
use crate::mixed_norms::{Cube, Exponents};
use crate::sampling_analysis::{MinSamplesReading, SampleLayout, TheoryInputs};

/// Whole experiment document. Sections other than `cube`, `kernel` and
/// `exponents` are optional; each subcommand reads its own.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub trials: usize,
    pub cube: Cube,
    pub kernel: KernelConfig,
    pub exponents: Exponents,
    pub grid: GridConfig,
    pub theory: TheoryInputs,
    pub bounds: BoundsConfig,
    pub sweep: SweepConfig,
    pub reconstruct: ReconstructConfig,
    pub kernel_check: KernelCheckConfig,
    /// Not part of the config hash.
    #[serde(skip)]
    pub output_dir: Option<String>,
}

/// Quadrature spacing `h = 1 / resolution`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub resolution: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { resolution: 24 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsConfig {
    /// Approximation level for `d_eps` and `N(eps)`.
    pub covering_eps: f64,
    /// Target failure probability for the required sample count.
    pub failure_eps: f64,
    pub reading: MinSamplesReading,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        BoundsConfig {
            covering_eps: 0.1,
            failure_eps: 0.01,
            reading: MinSamplesReading::Squared,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// Every `l` with every `m`.
    #[default]
    Cross,
    /// `l[k]` with `m[k]`.
    Zip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FamilyConfig {
    /// One-hot members on distinct random nodes.
    pub singles: usize,
    /// Random combinations of all translates.
    pub combinations: usize,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        FamilyConfig {
            singles: 5,
            combinations: 20,
        }
    }
}

/// Sweep axes. Empty `r` / `s` lists mean the base cube's extent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub l: Vec<usize>,
    pub m: Vec<usize>,
    pub pairing: Pairing,
    pub r: Vec<f64>,
    pub s: Vec<f64>,
    pub delta: Vec<f64>,
    pub mu: Vec<f64>,
    pub layout: SampleLayout,
    pub family: FamilyConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            l: vec![10],
            m: vec![25],
            pairing: Pairing::Cross,
            r: Vec::new(),
            s: Vec::new(),
            delta: vec![0.0],
            mu: vec![0.5],
            layout: SampleLayout::Independent,
            family: FamilyConfig::default(),
        }
    }
}

impl SweepConfig {
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        match self.pairing {
            Pairing::Cross => self
                .l
                .iter()
                .flat_map(|&l| self.m.iter().map(move |&m| (l, m)))
                .collect(),
            Pairing::Zip => self.l.iter().copied().zip(self.m.iter().copied()).collect(),
        }
    }

    pub fn cubes(&self, base: &Cube) -> Result<Vec<Cube>> {
        let rs = if self.r.is_empty() {
            vec![base.r]
        } else {
            self.r.clone()
        };
        let ss = if self.s.is_empty() {
            vec![base.s]
        } else {
            self.s.clone()
        };
        let mut out = Vec::new();
        for &r in &rs {
            for &s in &ss {
                out.push(Cube::new(r, s, base.n)?);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum SampleSource {
    /// Cell centers of an `l^{1/n} x ... x m` product grid.
    Regular { l: usize, m: usize },
    /// Uniform draw seeded from the master seed.
    Draw {
        l: usize,
        m: usize,
        #[serde(default)]
        layout: SampleLayout,
    },
    /// CSV with columns `x1..xn,y` and optionally `value`, `l * m` rows in
    /// `j * l + i` order.
    File { path: String, l: usize, m: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TruthConfig {
    OneHot {
        node: usize,
    },
    Coefficients {
        values: Vec<f64>,
    },
    /// Uniform coefficients in `[-1, 1]` seeded from the master seed.
    Random,
    /// Use the `value` column of a sample file.
    FromFile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StencilConfig {
    Exact,
    Uniform3,
    Uniform5,
}

impl StencilConfig {
    pub fn stencil(self) -> Stencil {
        match self {
            StencilConfig::Exact => Stencil::Exact,
            StencilConfig::Uniform3 => Stencil::Uniform(3),
            StencilConfig::Uniform5 => Stencil::Uniform(5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconstructConfig {
    pub samples: SampleSource,
    pub truth: TruthConfig,
    /// Partition radius; defaults to the covering gap times 1.01.
    pub theta: Option<f64>,
    /// Partition grid resolution.
    pub resolution: usize,
    /// Resolution of the contraction-factor functionals.
    pub gamma_resolution: usize,
    pub stencil: StencilConfig,
    pub delta: f64,
    pub tol: f64,
    pub r_max: u32,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        ReconstructConfig {
            samples: SampleSource::Regular { l: 40, m: 40 },
            truth: TruthConfig::OneHot { node: 0 },
            theta: None,
            resolution: 120,
            gamma_resolution: 60,
            stencil: StencilConfig::Exact,
            delta: 0.0,
            tol: 1e-9,
            r_max: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelCheckConfig {
    /// Resolutions of the idempotency ladder.
    pub ladder: Vec<usize>,
    /// Cells per unit of the piecewise-constant random test signals.
    pub noise_resolution: usize,
    pub random_functions: usize,
    pub eps: Vec<f64>,
    /// Resolution of the `||K||_W` and `w_eps` grids.
    pub functional_resolution: usize,
    pub stencil: StencilConfig,
    /// Cloud refinements for the decay fit.
    pub decay_points: Vec<usize>,
    pub delta: f64,
}

impl Default for KernelCheckConfig {
    fn default() -> Self {
        KernelCheckConfig {
            ladder: vec![32, 64, 128],
            noise_resolution: 16,
            random_functions: 3,
            eps: vec![0.1, 0.05, 0.025],
            functional_resolution: 48,
            stencil: StencilConfig::Exact,
            decay_points: vec![4, 8],
            delta: 0.0,
        }
    }
}

const KNOWN: &[&str] = &[
    "master_seed",
    "trials",
    "output_dir",
    "cube",
    "kernel",
    "exponents",
    "grid",
    "theory",
    "bounds",
    "sweep",
    "reconstruct",
    "kernel_check",
];

fn section<T: DeserializeOwned>(
    table: &toml::Table,
    key: &str,
    errors: &mut Vec<String>,
) -> Option<T> {
    let v = table.get(key)?;
    match v.clone().try_into::<T>() {
        Ok(t) => Some(t),
        Err(e) => {
            errors.push(format!("{key}: {}", e.message().trim()));
            None
        }
    }
}

fn required<T: DeserializeOwned>(
    table: &toml::Table,
    key: &str,
    errors: &mut Vec<String>,
) -> Option<T> {
    if !table.contains_key(key) {
        errors.push(format!("{key}: missing"));
        return None;
    }
    section(table, key, errors)
}

fn optional<T: DeserializeOwned + Default>(
    table: &toml::Table,
    key: &str,
    errors: &mut Vec<String>,
) -> T {
    if table.contains_key(key) {
        section(table, key, errors).unwrap_or_default()
    } else {
        T::default()
    }
}

fn positive(path: &str, v: f64, errors: &mut Vec<String>) {
    if !(v.is_finite() && v > 0.0) {
        errors.push(format!("{path}: {v} must be positive and finite"));
    }
}

fn unit_open(path: &str, v: f64, errors: &mut Vec<String>) {
    if !(v > 0.0 && v < 1.0) {
        errors.push(format!("{path}: {v} must lie in (0, 1)"));
    }
}

fn delta_range(path: &str, v: f64, errors: &mut Vec<String>) {
    if !(0.0..1.0).contains(&v) {
        errors.push(format!("{path}: {v} must lie in [0, 1)"));
    }
}

fn resolution(path: &str, v: usize, extents: &[f64], errors: &mut Vec<String>) {
    if v == 0 {
        errors.push(format!("{path}: must be positive"));
        return;
    }
    for &x in extents {
        let cells = x * v as f64;
        if (cells - cells.round()).abs() > 1e-9 * cells.max(1.0) {
            errors.push(format!("{path}: {v} cells per unit do not tile extent {x}"));
        }
    }
}

impl ExperimentConfig {
    /// Parses and validates, collecting every problem before failing.
    pub fn from_toml(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            Error::Validation(vec![format!("syntax: {}", e.message().trim())])
        })?;
        let mut errors = Vec::new();
        for key in table.keys() {
            if !KNOWN.contains(&key.as_str()) {
                errors.push(format!("{key}: unknown key"));
            }
        }
        let master_seed = section::<u64>(&table, "master_seed", &mut errors).unwrap_or(0);
        let trials = section::<usize>(&table, "trials", &mut errors).unwrap_or(100);
        let output_dir = section::<String>(&table, "output_dir", &mut errors);
        let cube = required::<Cube>(&table, "cube", &mut errors);
        let kernel = required::<KernelConfig>(&table, "kernel", &mut errors);
        let exponents = required::<Exponents>(&table, "exponents", &mut errors);
        let grid: GridConfig = optional(&table, "grid", &mut errors);
        let theory: TheoryInputs = optional(&table, "theory", &mut errors);
        let bounds: BoundsConfig = optional(&table, "bounds", &mut errors);
        let sweep: SweepConfig = optional(&table, "sweep", &mut errors);
        let reconstruct: ReconstructConfig = optional(&table, "reconstruct", &mut errors);
        let kernel_check: KernelCheckConfig = optional(&table, "kernel_check", &mut errors);
        let complete = cube.is_some() && kernel.is_some() && exponents.is_some();
        // stand-ins for missing sections so the rest is still checked
        let n = cube
            .map(|c| c.n)
            .or(kernel.as_ref().map(|k| k.n))
            .unwrap_or(1);
        let cfg = ExperimentConfig {
            master_seed,
            trials,
            cube: cube.unwrap_or(Cube { r: 1.0, s: 1.0, n }),
            kernel: kernel.unwrap_or(KernelConfig {
                n,
                amplitude: Amplitude::Normalized,
                lattice: Default::default(),
            }),
            exponents: exponents.unwrap_or(Exponents::uniform(2.0)?),
            grid,
            theory,
            bounds,
            sweep,
            reconstruct,
            kernel_check,
            output_dir,
        };
        cfg.validate_into(&mut errors);
        if errors.is_empty() && complete {
            Ok(cfg)
        } else {
            Err(Error::Validation(errors))
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        self.validate_into(&mut errors);
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errors))
        }
    }

    fn validate_into(&self, errors: &mut Vec<String>) {
        let cube = &self.cube;
        positive("cube.r", cube.r, errors);
        positive("cube.s", cube.s, errors);
        if cube.n == 0 {
            errors.push("cube.n: must be at least 1".into());
        }
        self.kernel.validate("kernel", errors);
        if self.kernel.n != cube.n {
            errors.push(format!(
                "kernel.n: {} differs from cube.n = {}",
                self.kernel.n, cube.n
            ));
        }
        let extents = [cube.r, cube.s];
        resolution("grid.resolution", self.grid.resolution, &extents, errors);

        let t = &self.theory;
        if let Some(a) = t.alpha {
            positive("theory.alpha", a, errors);
        }
        if let Some(b) = t.beta {
            positive("theory.beta", b, errors);
        }
        if !(t.eta > 0.0 && t.eta < 2.0 / cube.n.max(1) as f64) {
            errors.push(format!("theory.eta: {} must lie in (0, 2/n)", t.eta));
        }
        positive("theory.b_frame", t.b_frame, errors);
        delta_range("theory.delta", t.delta, errors);
        if t.decay_points == 0 {
            errors.push("theory.decay_points: must be positive".into());
        }

        unit_open("bounds.covering_eps", self.bounds.covering_eps, errors);
        unit_open("bounds.failure_eps", self.bounds.failure_eps, errors);

        let s = &self.sweep;
        for (name, list) in [("sweep.l", &s.l), ("sweep.m", &s.m)] {
            if list.is_empty() {
                errors.push(format!("{name}: must not be empty"));
            }
            for (i, &v) in list.iter().enumerate() {
                if v == 0 {
                    errors.push(format!("{name}[{i}]: must be positive"));
                }
            }
        }
        if s.pairing == Pairing::Zip && s.l.len() != s.m.len() {
            errors.push(format!(
                "sweep.m: zip pairing needs {} entries like sweep.l, got {}",
                s.l.len(),
                s.m.len()
            ));
        }
        for (i, &v) in s.r.iter().enumerate() {
            positive(&format!("sweep.r[{i}]"), v, errors);
        }
        for (i, &v) in s.s.iter().enumerate() {
            positive(&format!("sweep.s[{i}]"), v, errors);
        }
        if s.delta.is_empty() {
            errors.push("sweep.delta: must not be empty".into());
        }
        for (i, &v) in s.delta.iter().enumerate() {
            delta_range(&format!("sweep.delta[{i}]"), v, errors);
        }
        if s.mu.is_empty() {
            errors.push("sweep.mu: must not be empty".into());
        }
        for (i, &v) in s.mu.iter().enumerate() {
            unit_open(&format!("sweep.mu[{i}]"), v, errors);
        }
        if s.family.singles + s.family.combinations == 0 {
            errors.push("sweep.family: needs at least one member".into());
        }
        for (i, &r) in s.r.iter().enumerate() {
            resolution(
                &format!("sweep.r[{i}] at grid.resolution"),
                self.grid.resolution,
                &[r],
                errors,
            );
        }
        for (i, &v) in s.s.iter().enumerate() {
            resolution(
                &format!("sweep.s[{i}] at grid.resolution"),
                self.grid.resolution,
                &[v],
                errors,
            );
        }

        let rc = &self.reconstruct;
        match &rc.samples {
            SampleSource::Regular { l, m }
            | SampleSource::Draw { l, m, .. }
            | SampleSource::File { l, m, .. } => {
                if *l == 0 || *m == 0 {
                    errors.push("reconstruct.samples: l and m must be positive".into());
                }
                if matches!(rc.samples, SampleSource::Regular { .. }) && cube.n > 0 {
                    let side = (*l as f64).powf(1.0 / cube.n as f64).round() as usize;
                    if side.pow(cube.n as u32) != *l {
                        errors.push(format!(
                            "reconstruct.samples.l: {l} is not a perfect power {}",
                            cube.n
                        ));
                    }
                }
            }
        }
        if matches!(rc.truth, TruthConfig::FromFile)
            && !matches!(rc.samples, SampleSource::File { .. })
        {
            errors.push("reconstruct.truth: from_file needs a file sample source".into());
        }
        if let Some(th) = rc.theta {
            positive("reconstruct.theta", th, errors);
        }
        resolution("reconstruct.resolution", rc.resolution, &extents, errors);
        if rc.gamma_resolution == 0 {
            errors.push("reconstruct.gamma_resolution: must be positive".into());
        }
        delta_range("reconstruct.delta", rc.delta, errors);
        if !(rc.tol >= 0.0) {
            errors.push(format!("reconstruct.tol: {} must be nonnegative", rc.tol));
        }

        let kc = &self.kernel_check;
        if kc.ladder.len() < 2 {
            errors.push("kernel_check.ladder: needs at least two resolutions".into());
        }
        for (i, &v) in kc.ladder.iter().enumerate() {
            resolution(&format!("kernel_check.ladder[{i}]"), v, &extents, errors);
            if kc.noise_resolution > 0 && v % kc.noise_resolution != 0 {
                errors.push(format!(
                    "kernel_check.ladder[{i}]: {v} is not a multiple of noise_resolution {}",
                    kc.noise_resolution
                ));
            }
        }
        resolution(
            "kernel_check.noise_resolution",
            kc.noise_resolution,
            &extents,
            errors,
        );
        for (i, &v) in kc.eps.iter().enumerate() {
            positive(&format!("kernel_check.eps[{i}]"), v, errors);
        }
        if kc.functional_resolution < 12 {
            errors.push(format!(
                "kernel_check.functional_resolution: {} is below 12 cells per unit",
                kc.functional_resolution
            ));
        }
        for (i, &v) in kc.decay_points.iter().enumerate() {
            if v == 0 {
                errors.push(format!("kernel_check.decay_points[{i}]: must be positive"));
            }
        }
        delta_range("kernel_check.delta", kc.delta, errors);
    }

    pub fn h(&self) -> f64 {
        1.0 / self.grid.resolution as f64
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_string(self).expect("config serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
