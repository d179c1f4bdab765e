use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::bounds::{constants_for, require_finite_exponents};
use super::config::ExperimentConfig;
use super::output::{num, wilson, OutputDir, SeedEntry};
use crate::error::Result;
use crate::kernel_space::{CoeffSeq, Kernel};
use crate::mixed_norms::{grid_mixed_norm, Cube, SampleMatrix};
use crate::sampling_analysis::{
    covering_grid, derive_seed, expansion_concentration, main_theorem_probability, sampling_bounds,
    verdict_from_middle, SampleSet,
};

const FAMILY_TAG: u64 = 0x6661_6d69_6c79;

/// Unit-norm test functions in `V_phi`.
#[derive(Debug, Clone)]
pub struct Family {
    pub members: Vec<CoeffSeq>,
    /// Smallest admissible `delta` of each member.
    pub delta_min: Vec<f64>,
}

/// One-hot members on distinct random nodes followed by random combinations,
/// each scaled to unit grid norm.
pub fn build_family(cfg: &ExperimentConfig, kernel: &Kernel, cube: &Cube) -> Result<Family> {
    let lat = kernel.lattice_arc().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.master_seed, &[FAMILY_TAG], 0));
    let mut raw = Vec::new();
    if !lat.is_empty() {
        let singles = cfg.sweep.family.singles.min(lat.len());
        for node in sample(&mut rng, lat.len(), singles).into_vec() {
            raw.push(CoeffSeq::one_hot(lat.clone(), node)?);
        }
        for _ in 0..cfg.sweep.family.combinations {
            let c: Vec<f64> = (0..lat.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            raw.push(CoeffSeq::new(lat.clone(), c)?);
        }
    }
    let grid = covering_grid(kernel, cube, cfg.h())?;
    let mut members = Vec::with_capacity(raw.len());
    let mut delta_min = Vec::with_capacity(raw.len());
    for c in raw {
        let norm = grid_mixed_norm(&kernel.synthesize(&c, &grid)?, &cfg.exponents, None)?;
        if norm == 0.0 {
            continue;
        }
        let c = c.scaled(1.0 / norm);
        delta_min
            .push(expansion_concentration(kernel, &c, cube, &cfg.exponents, cfg.h())?.delta_min);
        members.push(c);
    }
    Ok(Family { members, delta_min })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub r: f64,
    pub s: f64,
    pub l: usize,
    pub m: usize,
    pub lm: usize,
    pub mu: f64,
    pub delta: f64,
    pub members: usize,
    pub trials: usize,
    /// Trials where some member violates the lower bound.
    pub lower_failures: usize,
    pub upper_failures: usize,
    pub failures: usize,
    pub failure_rate: Option<f64>,
    pub failure_ci: Option<(f64, f64)>,
    pub theorem_success: f64,
    pub theorem_vacuous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub trials: usize,
    pub rows: usize,
    pub family_size: usize,
    pub family_delta_max: f64,
    pub cells: Vec<SweepCell>,
}

pub const SWEEP_HEADER: &[&str] = &[
    "r",
    "s",
    "l",
    "m",
    "mu",
    "delta",
    "trial",
    "seed",
    "member",
    "middle",
    "lower",
    "upper",
    "lower_holds",
    "upper_holds",
];

struct TrialOutcome {
    /// Per member `||f(X)||_{l^{p,q}}`.
    middles: Vec<f64>,
}

/// Monte Carlo check of the two-sided sampling inequality.
pub fn cmd_sample_sweep(
    cfg: &ExperimentConfig,
    out: &mut OutputDir,
) -> Result<(SweepSummary, Vec<SeedEntry>)> {
    require_finite_exponents(cfg, "sample-sweep")?;
    let e = &cfg.exponents;
    let mut records = Vec::new();
    let mut cells = Vec::new();
    let mut seeds = Vec::new();
    let mut family_size = 0;
    let mut family_delta_max = 0.0f64;
    for cube in cfg.sweep.cubes(&cfg.cube)? {
        let kernel = cfg.kernel.build(&cube)?;
        let family = build_family(cfg, &kernel, &cube)?;
        family_size = family.members.len();
        family_delta_max = family
            .delta_min
            .iter()
            .fold(family_delta_max, |a, &b| a.max(b));
        let coeffs: Vec<&[f64]> = family.members.iter().map(|c| c.coefficients()).collect();
        let deltas: Vec<_> = cfg
            .sweep
            .delta
            .iter()
            .map(|&d| constants_for(cfg, &cube, d).map(|tc| (d, tc)))
            .collect::<Result<_>>()?;
        for (l, m) in cfg.sweep.pairs() {
            let coords = [l as u64, m as u64, cube.r.to_bits(), cube.s.to_bits()];
            let trial_seeds: Vec<u64> = (0..cfg.trials as u64)
                .map(|t| derive_seed(cfg.master_seed, &coords, t))
                .collect();
            for (t, &seed) in trial_seeds.iter().enumerate() {
                seeds.push(SeedEntry {
                    coords: coords.to_vec(),
                    trial: t as u64,
                    seed,
                });
            }
            let outcomes: Vec<TrialOutcome> = trial_seeds
                .par_iter()
                .map(|&seed| run_trial(&kernel, &cube, l, m, seed, cfg, &coeffs))
                .collect::<Result<_>>()?;
            for &mu in &cfg.sweep.mu {
                for (delta, tc) in &deltas {
                    let factors = sampling_bounds(l, m, &cube, e, mu, *delta, tc.d)?;
                    let admissible: Vec<bool> = family
                        .delta_min
                        .iter()
                        .map(|&dm| dm <= delta + 1e-9)
                        .collect();
                    let (mut lower_f, mut upper_f, mut any_f) = (0, 0, 0);
                    for (t, o) in outcomes.iter().enumerate() {
                        let (mut lo, mut up) = (false, false);
                        for (k, &middle) in o.middles.iter().enumerate() {
                            if !admissible[k] {
                                continue;
                            }
                            let v = verdict_from_middle(middle, 1.0, factors);
                            lo |= !v.lower_holds;
                            up |= !v.upper_holds;
                            records.push(vec![
                                num(cube.r),
                                num(cube.s),
                                l.to_string(),
                                m.to_string(),
                                num(mu),
                                num(*delta),
                                t.to_string(),
                                trial_seeds[t].to_string(),
                                k.to_string(),
                                num(v.middle),
                                num(v.lower),
                                num(v.upper),
                                v.lower_holds.to_string(),
                                v.upper_holds.to_string(),
                            ]);
                        }
                        lower_f += lo as usize;
                        upper_f += up as usize;
                        any_f += (lo || up) as usize;
                    }
                    let n = outcomes.len();
                    let theorem =
                        main_theorem_probability(l as u64, m as u64, &cube, mu, *delta, tc, e)?;
                    cells.push(SweepCell {
                        r: cube.r,
                        s: cube.s,
                        l,
                        m,
                        lm: l * m,
                        mu,
                        delta: *delta,
                        members: admissible.iter().filter(|&&a| a).count(),
                        trials: n,
                        lower_failures: lower_f,
                        upper_failures: upper_f,
                        failures: any_f,
                        failure_rate: (n > 0).then(|| any_f as f64 / n as f64),
                        failure_ci: wilson(any_f, n),
                        theorem_success: theorem.bound.clamped,
                        theorem_vacuous: theorem.bound.vacuous,
                    });
                }
            }
        }
    }
    out.write_csv("sweep_trials.csv", SWEEP_HEADER, &records)?;
    let summary = SweepSummary {
        trials: cfg.trials,
        rows: records.len(),
        family_size,
        family_delta_max,
        cells,
    };
    out.write_json("sweep_summary.json", &summary)?;
    Ok((summary, seeds))
}

fn run_trial(
    kernel: &Kernel,
    cube: &Cube,
    l: usize,
    m: usize,
    seed: u64,
    cfg: &ExperimentConfig,
    coeffs: &[&[f64]],
) -> Result<TrialOutcome> {
    let s = SampleSet::draw(cube, l, m, seed, cfg.sweep.layout)?;
    let lat = kernel.lattice();
    // each point meets at most one support
    let hits: Vec<Option<(usize, f64)>> = s
        .points()
        .map(|p| lat.support_node(p).map(|i| (i, kernel.translate(i, p))))
        .collect();
    let mut values = vec![0.0; s.len()];
    let middles = coeffs
        .iter()
        .map(|c| {
            for (v, h) in values.iter_mut().zip(&hits) {
                *v = h.map_or(0.0, |(i, phi)| c[i] * phi);
            }
            let mat = SampleMatrix::new(l, m, values.clone())?;
            Ok(crate::mixed_norms::seq_mixed_norm(&mat, &cfg.exponents))
        })
        .collect::<Result<_>>()?;
    Ok(TrialOutcome { middles })
}
