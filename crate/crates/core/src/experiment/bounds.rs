use serde::Serialize;

use super::config::ExperimentConfig;
use super::output::{num, OutputDir};
use crate::error::{Error, Result};
use crate::mixed_norms::Cube;
use crate::sampling_analysis::{
    covering_bounds, example_min_samples, main_theorem_probability, theory_constants,
    TheoryConstants, TheoryInputs,
};

/// One point of the bound table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsRow {
    pub r: f64,
    pub s: f64,
    pub l: usize,
    pub m: usize,
    pub delta: f64,
    pub mu: f64,
    pub k: f64,
    pub d: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub g: f64,
    pub log_a: f64,
    pub a: f64,
    pub b: f64,
    pub log_failure: f64,
    pub success_raw: f64,
    pub success: f64,
    pub success_vacuous: bool,
    pub n_truncation: f64,
    pub n_dimension: f64,
    pub d_eps: f64,
    pub log_n_eps: f64,
    pub n_eps: f64,
    pub min_lm_x: f64,
    pub min_lm: f64,
    pub lm_sufficient: bool,
}

pub const BOUNDS_HEADER: &[&str] = &[
    "r",
    "s",
    "l",
    "m",
    "delta",
    "mu",
    "k",
    "d",
    "c1",
    "c2",
    "c3",
    "g",
    "log_a",
    "a",
    "b",
    "log_failure",
    "success_raw",
    "success",
    "success_vacuous",
    "n_truncation",
    "n_dimension",
    "d_eps",
    "log_n_eps",
    "n_eps",
    "min_lm_x",
    "min_lm",
    "lm_sufficient",
];

impl BoundsRow {
    fn record(&self) -> Vec<String> {
        vec![
            num(self.r),
            num(self.s),
            self.l.to_string(),
            self.m.to_string(),
            num(self.delta),
            num(self.mu),
            num(self.k),
            num(self.d),
            num(self.c1),
            num(self.c2),
            num(self.c3),
            num(self.g),
            num(self.log_a),
            num(self.a),
            num(self.b),
            num(self.log_failure),
            num(self.success_raw),
            num(self.success),
            self.success_vacuous.to_string(),
            num(self.n_truncation),
            num(self.n_dimension),
            num(self.d_eps),
            num(self.log_n_eps),
            num(self.n_eps),
            num(self.min_lm_x),
            num(self.min_lm),
            self.lm_sufficient.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsSummary {
    pub rows: usize,
    pub vacuous_rows: usize,
    pub constants: Vec<TheoryConstants>,
}

pub(crate) fn require_finite_exponents(cfg: &ExperimentConfig, command: &str) -> Result<()> {
    if cfg.exponents.is_finite() {
        Ok(())
    } else {
        Err(Error::Validation(vec![format!(
            "exponents: {command} needs finite p and q"
        )]))
    }
}

pub(crate) fn constants_for(
    cfg: &ExperimentConfig,
    cube: &Cube,
    delta: f64,
) -> Result<TheoryConstants> {
    let kernel = cfg.kernel.build(cube)?;
    let inputs = TheoryInputs {
        delta,
        ..cfg.theory
    };
    theory_constants(&kernel, cube, &cfg.exponents, &inputs)
}

/// Tabulates every closed-form bound across the sweep axes.
pub fn bounds_table(cfg: &ExperimentConfig) -> Result<(Vec<BoundsRow>, Vec<TheoryConstants>)> {
    require_finite_exponents(cfg, "bounds")?;
    let e = &cfg.exponents;
    let mut rows = Vec::new();
    let mut constants = Vec::new();
    for cube in cfg.sweep.cubes(&cfg.cube)? {
        for &delta in &cfg.sweep.delta {
            let tc = constants_for(cfg, &cube, delta)?;
            let cov = covering_bounds(cfg.bounds.covering_eps, &cube, e, &tc.covering_inputs())?;
            for &mu in &cfg.sweep.mu {
                let need = example_min_samples(
                    &cube,
                    e,
                    mu,
                    delta,
                    cfg.bounds.failure_eps,
                    tc.g,
                    tc.d,
                    cfg.bounds.reading,
                )?;
                for (l, m) in cfg.sweep.pairs() {
                    let p = main_theorem_probability(l as u64, m as u64, &cube, mu, delta, &tc, e)?;
                    rows.push(BoundsRow {
                        r: cube.r,
                        s: cube.s,
                        l,
                        m,
                        delta,
                        mu,
                        k: tc.k,
                        d: tc.d,
                        c1: tc.c1,
                        c2: tc.c2,
                        c3: tc.c3,
                        g: tc.g,
                        log_a: tc.log_a,
                        a: tc.a,
                        b: tc.b,
                        log_failure: p.log_failure,
                        success_raw: p.bound.raw,
                        success: p.bound.clamped,
                        success_vacuous: p.bound.vacuous,
                        n_truncation: cov.n_truncation,
                        n_dimension: cov.n_dimension,
                        d_eps: cov.d_eps,
                        log_n_eps: cov.log_n_eps,
                        n_eps: cov.n_eps,
                        min_lm_x: need.x,
                        min_lm: need.lm,
                        lm_sufficient: (l * m) as f64 >= need.lm,
                    });
                }
            }
            constants.push(tc);
        }
    }
    Ok((rows, constants))
}

pub fn cmd_bounds(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<BoundsSummary> {
    let (rows, constants) = bounds_table(cfg)?;
    let records: Vec<Vec<String>> = rows.iter().map(BoundsRow::record).collect();
    out.write_csv("bounds.csv", BOUNDS_HEADER, &records)?;
    let summary = BoundsSummary {
        rows: rows.len(),
        vacuous_rows: rows.iter().filter(|r| r.success_vacuous).count(),
        constants,
    };
    out.write_json("bounds_summary.json", &summary)?;
    Ok(summary)
}
