use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{ExperimentConfig, SampleSource, TruthConfig};
use super::output::{num, opt, OutputDir, SeedEntry};
use crate::error::{Error, Result};
use crate::kernel_space::{CoeffSeq, Kernel};
use crate::mixed_norms::io::{write_signal_to, Encoding};
use crate::mixed_norms::{Cube, Grid, SampleMatrix};
use crate::reconstruction::{
    build_partition, contraction_factor, iterate_reconstruct, ContractionFactor, IterateOptions,
    StopReason,
};
use crate::sampling_analysis::{
    covering_gap, covering_grid, derive_seed, sample_values, Expansion, SampleSet,
};

const SAMPLE_TAG: u64 = 0x7361_6d70;
const TRUTH_TAG: u64 = 0x7472_7574;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReconstructSummary {
    pub l: usize,
    pub m: usize,
    pub nodes: usize,
    pub theta: f64,
    /// Largest cell-to-sample distance of the partition.
    pub partition_reach: f64,
    pub contraction: ContractionFactor,
    pub gamma_theory: f64,
    pub gamma_emp: Option<f64>,
    pub stop: StopReason,
    pub converged: bool,
    pub iterations: usize,
    pub truth_norm: Option<f64>,
    pub final_error: Option<f64>,
    pub final_relative_error: Option<f64>,
    /// Largest `e_{r+1} / e_r` over `r >= 2`.
    pub max_ratio_after_two: Option<f64>,
    /// Every `e_r` under its certificate; `None` when `gamma_theory >= 1`.
    pub certificate_holds: Option<bool>,
}

pub const TRACE_HEADER: &[&str] = &["r", "residual", "f_norm", "error", "certificate"];

pub(crate) fn read_sample_file(
    path: &Path,
    cube: &Cube,
    l: usize,
    m: usize,
) -> Result<(SampleSet, Option<Vec<f64>>)> {
    let mut rdr = csv::Reader::from_path(path)?;
    let d = cube.dim();
    let has_value = rdr.headers()?.len() == d + 1;
    let mut points = Vec::new();
    let mut values = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let nums: Vec<f64> = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(format!("{}: row {}: {e}", path.display(), row + 1)))?;
        if nums.len() < d {
            return Err(Error::Format(format!(
                "{}: row {} has {} fields",
                path.display(),
                row + 1,
                nums.len()
            )));
        }
        points.push(nums[..d].to_vec());
        if has_value {
            values.push(nums[d]);
        }
    }
    let s = SampleSet::from_points(cube, l, m, points)?;
    Ok((s, has_value.then_some(values)))
}

fn truth_coeffs(cfg: &ExperimentConfig, kernel: &Kernel) -> Result<Option<CoeffSeq>> {
    let lat = kernel.lattice_arc().clone();
    Ok(match &cfg.reconstruct.truth {
        TruthConfig::OneHot { node } => Some(CoeffSeq::one_hot(lat, *node)?),
        TruthConfig::Coefficients { values } => Some(CoeffSeq::new(lat, values.clone())?),
        TruthConfig::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.master_seed, &[TRUTH_TAG], 0));
            let c = (0..lat.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            Some(CoeffSeq::new(lat, c)?)
        }
        TruthConfig::FromFile => None,
    })
}

pub fn cmd_reconstruct(
    cfg: &ExperimentConfig,
    out: &mut OutputDir,
) -> Result<(ReconstructSummary, Vec<SeedEntry>)> {
    let rc = &cfg.reconstruct;
    let cube = cfg.cube;
    let kernel = cfg.kernel.build(&cube)?;
    let h = 1.0 / rc.resolution as f64;
    let mut seeds = Vec::new();
    let (s, file_values) = match &rc.samples {
        SampleSource::Regular { l, m } => (SampleSet::regular(&cube, *l, *m)?, None),
        SampleSource::Draw { l, m, layout } => {
            let seed = derive_seed(cfg.master_seed, &[SAMPLE_TAG], 0);
            seeds.push(SeedEntry {
                coords: vec![SAMPLE_TAG],
                trial: 0,
                seed,
            });
            (SampleSet::draw(&cube, *l, *m, seed, *layout)?, None)
        }
        SampleSource::File { path, l, m } => read_sample_file(Path::new(path), &cube, *l, *m)?,
    };
    let truth = truth_coeffs(cfg, &kernel)?;
    let values = match (&truth, file_values) {
        (Some(c), _) => sample_values(
            &Expansion {
                kernel: &kernel,
                coeffs: c,
            },
            &s,
        ),
        (None, Some(v)) => SampleMatrix::new(s.l(), s.m(), v)?,
        (None, None) => {
            return Err(Error::Validation(vec![
                "reconstruct.truth: sample file has no value column".into(),
            ]))
        }
    };

    let theta = match rc.theta {
        Some(t) => t,
        None => covering_gap(&s, &Grid::with_spacing(cube, h)?)? * 1.01,
    };
    let grid = covering_grid(&kernel, &cube, h)?;
    let pu = build_partition(&s, theta, &grid)?;
    let contraction = contraction_factor(
        &kernel,
        theta,
        rc.delta,
        1.0 / rc.gamma_resolution as f64,
        rc.stencil.stencil(),
    )?;
    let opts = IterateOptions {
        r_max: rc.r_max,
        tol: rc.tol,
        gamma_theory: Some(contraction.gamma),
    };
    let rec = iterate_reconstruct(&kernel, &pu, &values, &cfg.exponents, truth.as_ref(), &opts)?;
    let t = &rec.trace;

    let records: Vec<Vec<String>> = t
        .rows
        .iter()
        .map(|r| {
            vec![
                r.r.to_string(),
                num(r.residual),
                num(r.f_norm),
                opt(r.error),
                opt(r.certificate),
            ]
        })
        .collect();
    out.write_csv("reconstruct_trace.csv", TRACE_HEADER, &records)?;
    let mut bytes = Vec::new();
    write_signal_to(&mut bytes, &rec.signal, Encoding::F64le)?;
    out.write_bytes("reconstruct_signal.bin", &bytes)?;

    let final_error = t.rows.last().and_then(|r| r.error);
    let ratios = t.error_ratios();
    let summary = ReconstructSummary {
        l: s.l(),
        m: s.m(),
        nodes: kernel.lattice().len(),
        theta,
        partition_reach: pu.reach(),
        gamma_theory: contraction.gamma,
        contraction,
        gamma_emp: t.gamma_emp,
        stop: t.stop,
        converged: t.converged(),
        iterations: t.iterations(),
        truth_norm: t.truth_norm,
        final_error,
        final_relative_error: final_error.zip(t.truth_norm).map(|(e, n)| e / n),
        max_ratio_after_two: ratios.iter().skip(2).copied().reduce(f64::max),
        certificate_holds: (t.truth_norm.is_some() && contraction.contractive).then(|| {
            t.rows
                .iter()
                .all(|r| r.error.zip(r.certificate).is_none_or(|(e, c)| e <= c))
        }),
    };
    out.write_json("reconstruct_summary.json", &summary)?;
    if t.stop == StopReason::NonContraction {
        return Err(Error::IterationDiverged {
            gamma_theory: contraction.gamma,
            iterations: t.iterations(),
        });
    }
    Ok((summary, seeds))
}
