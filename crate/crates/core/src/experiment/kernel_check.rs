use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::output::{num, OutputDir, SeedEntry};
use crate::error::Result;
use crate::kernel_space::{
    compute_k_sup, decay_envelope_check, decay_thresholds, exact_k_sup, kernel_w_norm,
    modulus_w_eps, node_mixed_norm, printed_prefactor, DecayFit, Kernel,
};
use crate::mixed_norms::{grid_mixed_norm, recip, Cube, Exponents, Grid, GridSignal};
use crate::reconstruction::functional_grid;
use crate::sampling_analysis::{covering_grid, derive_seed};

const NOISE_TAG: u64 = 0x6e6f_6973;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Normalization {
    pub amplitude: f64,
    pub normalized: bool,
    /// Closed-form `||phi||_{L^2}`.
    pub l2_exact: f64,
    /// Midpoint-rule `||phi||_{L^2}` on the functional grid.
    pub l2_grid: f64,
    /// The generator prefactor as printed, when real.
    pub printed_prefactor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelReport {
    pub nodes: usize,
    /// Per random function, the relative residuals along the ladder.
    pub idempotency: Vec<Vec<f64>>,
    /// Smallest observed order between consecutive ladder levels.
    pub idempotency_min_order: Option<f64>,
    pub truncated_nodes: usize,
    pub decay: Vec<DecayFit>,
    pub modulus: Vec<(f64, f64)>,
    pub modulus_nonincreasing: bool,
    pub kernel_w: f64,
    pub k_exact: f64,
    pub k_grid: f64,
    pub d: f64,
    /// `D >= k_grid (1-delta)^{-1/q}` with `k_grid` taken over the cube.
    pub d_consistent: bool,
    pub normalization: Normalization,
}

/// Piecewise-constant noise on cells of side `1/res` anchored at the cube corner.
fn noise_signal(grid: &Grid, cube: &Cube, res: usize, table: &[f64]) -> Result<GridSignal> {
    let d = cube.dim();
    let counts: Vec<usize> = (0..d)
        .map(|a| ((2.0 * cube.half_extent(a)) * res as f64).round() as usize)
        .collect();
    GridSignal::from_fn(grid.clone(), |z| {
        let mut flat = 0;
        for a in (0..d).rev() {
            let k = ((z[a] + cube.half_extent(a)) * res as f64)
                .floor()
                .clamp(0.0, (counts[a] - 1) as f64) as usize;
            flat = flat * counts[a] + k;
        }
        table[flat]
    })
}

fn rel(a: &GridSignal, b: &GridSignal, e: &Exponents) -> Result<f64> {
    Ok(grid_mixed_norm(&a.sub(b)?, e, None)? / grid_mixed_norm(b, e, None)?)
}

pub fn idempotency_ladder(
    kernel: &Kernel,
    cube: &Cube,
    e: &Exponents,
    ladder: &[usize],
    noise_res: usize,
    table: &[f64],
) -> Result<(Vec<f64>, usize)> {
    let mut out = Vec::with_capacity(ladder.len());
    let mut truncated = 0;
    for &res in ladder {
        let grid = Grid::with_spacing(*cube, 1.0 / res as f64)?;
        let f = noise_signal(&grid, cube, noise_res, table)?;
        let tf = kernel.apply(&f)?;
        truncated = truncated.max(tf.truncated.len());
        let ttf = kernel.apply(&tf.signal)?.signal;
        out.push(rel(&ttf, &tf.signal, e)?);
    }
    Ok((out, truncated))
}

pub fn cmd_kernel_check(
    cfg: &ExperimentConfig,
    out: &mut OutputDir,
) -> Result<(KernelReport, Vec<SeedEntry>)> {
    let kc = &cfg.kernel_check;
    let cube = cfg.cube;
    let e = &cfg.exponents;
    let kernel = cfg.kernel.build(&cube)?;

    let cells: usize = (0..cube.dim())
        .map(|a| ((2.0 * cube.half_extent(a)) * kc.noise_resolution as f64).round() as usize)
        .product();
    let mut seeds = Vec::new();
    let mut idempotency = Vec::new();
    let mut truncated = 0;
    let mut idem_rows = Vec::new();
    for t in 0..kc.random_functions as u64 {
        let seed = derive_seed(cfg.master_seed, &[NOISE_TAG], t);
        seeds.push(SeedEntry {
            coords: vec![NOISE_TAG],
            trial: t,
            seed,
        });
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let table: Vec<f64> = (0..cells).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (res, tr) =
            idempotency_ladder(&kernel, &cube, e, &kc.ladder, kc.noise_resolution, &table)?;
        truncated = truncated.max(tr);
        for (i, (&r, &lvl)) in res.iter().zip(&kc.ladder).enumerate() {
            let order = (i > 0)
                .then(|| (res[i - 1] / r).ln() / (lvl as f64 / kc.ladder[i - 1] as f64).ln());
            idem_rows.push(vec![
                t.to_string(),
                lvl.to_string(),
                num(1.0 / lvl as f64),
                num(r),
                super::output::opt(order),
            ]);
        }
        idempotency.push(res);
    }
    let idempotency_min_order = idempotency
        .iter()
        .flat_map(|res| {
            res.windows(2)
                .zip(kc.ladder.windows(2))
                .map(|(r, l)| (r[0] / r[1]).ln() / (l[1] as f64 / l[0] as f64).ln())
                .collect::<Vec<_>>()
        })
        .reduce(f64::min);
    out.write_csv(
        "kernel_check_idempotency.csv",
        &["function", "resolution", "h", "residual", "order"],
        &idem_rows,
    )?;

    let (at, bt) = decay_thresholds(cube.n, e);
    let alpha = cfg.theory.alpha.unwrap_or(at + 1.0);
    let beta = cfg.theory.beta.unwrap_or(bt + 1.0);
    let decay: Vec<DecayFit> = kc
        .decay_points
        .iter()
        .map(|&k| decay_envelope_check(&kernel, alpha, beta, e, k))
        .collect::<Result<_>>()?;
    let decay_rows: Vec<Vec<String>> = decay
        .iter()
        .zip(&kc.decay_points)
        .map(|(f, &k)| {
            vec![
                k.to_string(),
                f.cloud_points.to_string(),
                num(f.alpha),
                num(f.beta),
                num(f.c),
            ]
        })
        .collect();
    out.write_csv(
        "kernel_check_decay.csv",
        &["per_half_width", "cloud_points", "alpha", "beta", "c"],
        &decay_rows,
    )?;

    let h = 1.0 / kc.functional_resolution as f64;
    let pad = kc.eps.iter().copied().fold(0.0, f64::max);
    let fgrid = functional_grid(&kernel, pad, h)?;
    let kernel_w = kernel_w_norm(&kernel, &fgrid)?;
    let modulus: Vec<(f64, f64)> = kc
        .eps
        .iter()
        .map(|&eps| {
            Ok((
                eps,
                modulus_w_eps(&kernel, eps, &fgrid, kc.stencil.stencil())?,
            ))
        })
        .collect::<Result<_>>()?;
    let mut sorted = modulus.clone();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let modulus_nonincreasing = sorted.windows(2).all(|w| w[1].1 <= w[0].1);
    let mod_rows: Vec<Vec<String>> = modulus
        .iter()
        .map(|&(eps, w)| vec![num(eps), num(w), num(w / eps)])
        .collect();
    out.write_csv(
        "kernel_check_modulus.csv",
        &["eps", "modulus_w", "slope"],
        &mod_rows,
    )?;

    let k_exact = exact_k_sup(&kernel, e, None).value;
    let cgrid = covering_grid(&kernel, &cube, h)?;
    let k_grid = compute_k_sup(&kernel, e, &cgrid, None)?.value;
    let k_cube_grid = compute_k_sup(&kernel, e, &cgrid, Some(&cube))?.value;
    let shrink = (1.0 - kc.delta).powf(recip(e.q()));
    let d = exact_k_sup(&kernel, e, Some(&cube)).value / shrink;
    let l2 = Exponents::uniform(2.0)?;
    let normalization = Normalization {
        amplitude: kernel.phi().amplitude(),
        normalized: kernel.phi().is_normalized(),
        l2_exact: kernel.phi().mixed_norm(&l2),
        l2_grid: if kernel.lattice().is_empty() {
            0.0
        } else {
            node_mixed_norm(&kernel, 0, &l2, &cgrid)
        },
        printed_prefactor: printed_prefactor(cube.n),
    };
    let report = KernelReport {
        nodes: kernel.lattice().len(),
        idempotency,
        idempotency_min_order,
        truncated_nodes: truncated,
        decay,
        modulus,
        modulus_nonincreasing,
        kernel_w,
        k_exact,
        k_grid,
        d,
        d_consistent: d >= k_cube_grid / shrink * (1.0 - 1e-12),
        normalization,
    };
    out.write_json("kernel_check.json", &report)?;
    Ok((report, seeds))
}
