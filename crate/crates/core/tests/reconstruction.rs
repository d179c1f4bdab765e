use approx::assert_relative_eq;
use lpq_sampling::kernel_space::*;
use lpq_sampling::mixed_norms::{grid_mixed_norm, Cube, Exponents, Grid, GridSignal, SampleMatrix};
use lpq_sampling::reconstruction::*;
use lpq_sampling::sampling_analysis::*;
use lpq_sampling::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c22() -> Cube {
    Cube::new(2.0, 2.0, 1).unwrap()
}

fn canonical(cube: &Cube) -> Kernel {
    let lat = Lattice::scaled_integer(cube, MIN_GAP, Placement::Contained).unwrap();
    Kernel::new(GeneratorPhi::normalized(cube.n).unwrap(), lat).unwrap()
}

fn single() -> Kernel {
    let lat = Lattice::new(1, vec![vec![0.0, 0.0]], MIN_GAP).unwrap();
    Kernel::new(GeneratorPhi::normalized(1).unwrap(), lat).unwrap()
}

fn two() -> Exponents {
    Exponents::uniform(2.0).unwrap()
}

fn chebyshev(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Exhaustive scan of the three partition invariants.
fn check_partition(pu: &PartitionOfUnity) {
    let grid = pu.grid();
    let s = pu.samples();
    let inside = grid.center_mask(s.cube());
    for (cell, &keep) in inside.iter().enumerate() {
        let mut sum = 0.0;
        for k in 0..s.len() {
            let w = pu.weight(cell, k);
            assert!((0.0..=1.0).contains(&w));
            if w > 0.0 {
                assert!(chebyshev(&grid.node(cell), s.flat_point(k)) <= pu.theta());
            }
            sum += w;
        }
        assert_eq!(sum, if keep { 1.0 } else { 0.0 });
        assert_eq!(sum, pu.weight_sum(cell));
    }
}

#[test]
fn one_sample_owns_the_cube() {
    let cube = Cube::new(1.0, 1.0, 1).unwrap();
    let grid = Grid::with_spacing(cube, 1.0 / 16.0).unwrap();
    let s = SampleSet::from_points(&cube, 1, 1, vec![vec![0.1, -0.2]]).unwrap();
    let pu = build_partition(&s, 1.0, &grid).unwrap();
    assert!((0..grid.len()).all(|c| pu.weight(c, 0) == 1.0));
    check_partition(&pu);
    assert!(matches!(
        build_partition(&s, 0.3, &grid),
        Err(Error::UncoverableCube { .. })
    ));
}

#[test]
fn random_partitions_are_exact() {
    let cube = c22();
    let grid = Grid::with_spacing(Cube::new(2.5, 2.5, 1).unwrap(), 1.0 / 24.0).unwrap();
    for seed in 0..5 {
        let s = SampleSet::draw(&cube, 10, 5, seed, SampleLayout::Independent).unwrap();
        let pu = build_partition(&s, 2.0, &grid).unwrap();
        assert!(pu.reach() <= covering_gap(&s, &grid).unwrap() + 1e-12);
        check_partition(&pu);
    }
}

#[test]
fn grid_must_hold_the_cube() {
    let s = SampleSet::draw(&c22(), 2, 2, 1, SampleLayout::Independent).unwrap();
    let small = Grid::with_spacing(Cube::new(1.0, 1.0, 1).unwrap(), 0.1).unwrap();
    assert!(matches!(
        build_partition(&s, 5.0, &small),
        Err(Error::RestrictionOutOfBounds { .. })
    ));
}

#[test]
fn quasi_interpolant_reproduces_constants() {
    let cube = c22();
    let grid = Grid::with_spacing(cube, 1.0 / 24.0).unwrap();
    let s = SampleSet::draw(&cube, 6, 6, 3, SampleLayout::Independent).unwrap();
    let pu = build_partition(&s, 2.0, &grid).unwrap();
    let q = quasi_interpolate(&pu, &SampleMatrix::new(6, 6, vec![-2.5; 36]).unwrap()).unwrap();
    assert!(q.values().iter().all(|&v| v == -2.5));
    let z = quasi_interpolate(&pu, &SampleMatrix::new(6, 6, vec![0.0; 36]).unwrap()).unwrap();
    assert!(z.is_zero());
    assert!(quasi_interpolate(&pu, &SampleMatrix::new(5, 6, vec![0.0; 30]).unwrap()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn quasi_interpolant_error_is_lipschitz(seed in any::<u64>(), cx in -1.0f64..1.0, cy in -1.0f64..1.0, w in 0.2f64..2.0) {
        let cube = c22();
        let grid = Grid::with_spacing(cube, 1.0 / 24.0).unwrap();
        let s = SampleSet::draw(&cube, 8, 8, seed, SampleLayout::Independent).unwrap();
        let gap = covering_gap(&s, &grid).unwrap();
        let pu = build_partition(&s, gap, &grid).unwrap();
        // tent of slope 1/w in each coordinate, Lipschitz 1/w under the max-norm per axis
        let tent = |p: &[f64]| (1.0 - ((p[0] - cx).abs() + (p[1] - cy).abs()) / w).max(0.0);
        let vals: Vec<f64> = (0..s.len()).map(|k| tent(s.flat_point(k))).collect();
        let q = quasi_interpolate(&pu, &SampleMatrix::new(8, 8, vals).unwrap()).unwrap();
        let err = (0..grid.len()).fold(0.0f64, |m, c| m.max((q.values()[c] - tent(&grid.node(c))).abs()));
        prop_assert!(err <= gap * 2.0 / w + 1e-12);
    }

    #[test]
    fn approx_project_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let cube = c22();
        let k = canonical(&cube);
        let grid = covering_grid(&k, &cube, 1.0 / 24.0).unwrap();
        let s = SampleSet::draw(&cube, 5, 5, seed, SampleLayout::Independent).unwrap();
        let pu = build_partition(&s, 4.0, &grid).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y1: Vec<f64> = (0..25).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y2: Vec<f64> = (0..25).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mix: Vec<f64> = y1.iter().zip(&y2).map(|(u, v)| a * u + b * v).collect();
        let m = |v: Vec<f64>| SampleMatrix::new(5, 5, v).unwrap();
        let p1 = approx_project(&k, &pu, &m(y1)).unwrap().signal;
        let p2 = approx_project(&k, &pu, &m(y2)).unwrap().signal;
        let pm = approx_project(&k, &pu, &m(mix)).unwrap().signal;
        let want = p1.scaled(a).add(&p2.scaled(b)).unwrap();
        let scale = want.max_abs().max(1.0);
        prop_assert!(pm.sub(&want).unwrap().max_abs() <= 1e-12 * scale);
    }
}

#[test]
fn coefficient_operator_matches_grid_projection() {
    let cube = c22();
    let k = canonical(&cube);
    let grid = covering_grid(&k, &cube, 1.0 / 24.0).unwrap();
    let s = SampleSet::draw(&cube, 6, 6, 42, SampleLayout::Independent).unwrap();
    let pu = build_partition(&s, 4.0, &grid).unwrap();
    let c = CoeffSeq::new(
        k.lattice_arc().clone(),
        (0..9).map(|i| (i as f64).sin()).collect(),
    )
    .unwrap();
    let y = sample_values(
        &Expansion {
            kernel: &k,
            coeffs: &c,
        },
        &s,
    );
    let direct = approx_project(&k, &pu, &y).unwrap();
    assert!(direct.truncated.is_empty());
    let op = SamplingOperator::new(&k, &pu).unwrap();
    let coeffs = CoeffSeq::new(k.lattice_arc().clone(), op.project(y.values())).unwrap();
    let via = k.synthesize(&coeffs, &grid).unwrap();
    assert!(via.sub(&direct.signal).unwrap().max_abs() <= 1e-12 * direct.signal.max_abs());
    assert_eq!(op.evaluate(c.coefficients()), y.values().to_vec());
    assert!(
        approx_project(&k, &pu, &SampleMatrix::new(6, 6, vec![0.0; 36]).unwrap())
            .unwrap()
            .signal
            .is_zero()
    );
}

#[test]
fn contraction_is_monotone() {
    let k = single();
    let h = 1.0 / 48.0;
    let gammas: Vec<f64> = [1.0 / 48.0, 1.0 / 24.0, 1.0 / 12.0]
        .iter()
        .map(|&t| {
            contraction_factor(&k, t, 0.0, h, Stencil::Exact)
                .unwrap()
                .gamma
        })
        .collect();
    assert!(gammas[0] < gammas[1] && gammas[1] < gammas[2], "{gammas:?}");
    let at = |t: f64, d: f64| contraction_factor(&k, t, d, h, Stencil::Exact).unwrap();
    let a = at(1.0 / 24.0, 0.0);
    let b = at(1.0 / 24.0, 0.1);
    assert_relative_eq!(b.gamma - a.gamma, 0.1 * a.kernel_w, max_relative = 1e-12);
    assert!(!a.contractive && a.kernel_w > 0.0);
    assert!(contraction_factor(&k, 0.0, 0.0, h, Stencil::Exact).is_err());
    assert!(contraction_factor(&k, 0.1, 1.0, h, Stencil::Exact).is_err());
}

#[test]
fn contraction_vanishes_with_theta() {
    let k = single();
    let ladder: Vec<f64> = [1.0 / 96.0, 1.0 / 192.0, 1.0 / 384.0]
        .iter()
        .map(|&t| {
            contraction_factor(&k, t, 0.0, 1.0 / 96.0, Stencil::Exact)
                .unwrap()
                .gamma
        })
        .collect();
    for w in ladder.windows(2) {
        assert!(w[1] < 0.6 * w[0], "{ladder:?}");
    }
}

#[test]
fn functional_grid_is_centered_and_odd() {
    let k = single();
    let g = functional_grid(&k, 0.05, 1.0 / 60.0).unwrap();
    for axis in 0..2 {
        assert_eq!(g.axis_points(axis) % 2, 1);
        let mid = g.axis_points(axis) / 2;
        assert!(g.axis_coord(axis, mid).abs() < 1e-15);
    }
}

struct Setup {
    kernel: Kernel,
    pu: PartitionOfUnity,
    truth: CoeffSeq,
    values: SampleMatrix,
}

fn setup() -> Setup {
    let cube = c22();
    let kernel = canonical(&cube);
    let grid = covering_grid(&kernel, &cube, 1.0 / 60.0).unwrap();
    let s = SampleSet::regular(&cube, 20, 20).unwrap();
    let pu = build_partition(&s, 0.05, &grid).unwrap();
    let truth = CoeffSeq::new(
        kernel.lattice_arc().clone(),
        (0..9).map(|i| 1.0 + (i as f64).cos()).collect(),
    )
    .unwrap();
    let values = sample_values(
        &Expansion {
            kernel: &kernel,
            coeffs: &truth,
        },
        &s,
    );
    Setup {
        kernel,
        pu,
        truth,
        values,
    }
}

#[test]
fn iteration_recovers_dense_samples() {
    let st = setup();
    let e = Exponents::new(2.0, 3.0).unwrap();
    let rec = iterate_reconstruct(
        &st.kernel,
        &st.pu,
        &st.values,
        &e,
        Some(&st.truth),
        &IterateOptions::default(),
    )
    .unwrap();
    let t = &rec.trace;
    assert!(t.converged(), "{:?}", t.stop);
    assert_eq!(t.rows.len(), t.iterations() + 1);
    let last = t.rows.last().unwrap();
    assert!(last.error.unwrap() <= 1e-6 * t.truth_norm.unwrap());
    let g = t.gamma_emp.unwrap();
    assert!(g > 0.0 && g < 0.5, "{g}");
    for (r, row) in t.rows.iter().enumerate() {
        assert_eq!(row.r as usize, r);
        assert!(row.error.unwrap() >= 0.0 && row.certificate.is_none());
    }
}

#[test]
fn zero_samples_stay_zero() {
    let st = setup();
    let zero = SampleMatrix::new(20, 20, vec![0.0; 400]).unwrap();
    let opts = IterateOptions {
        r_max: 5,
        tol: 0.0,
        gamma_theory: None,
    };
    let rec = iterate_reconstruct(&st.kernel, &st.pu, &zero, &two(), None, &opts).unwrap();
    assert!(rec.signal.is_zero());
    assert!(rec
        .trace
        .rows
        .iter()
        .all(|r| r.residual == 0.0 && r.f_norm == 0.0));
    assert_eq!(rec.trace.stop, StopReason::Converged);
}

#[test]
fn infinite_tolerance_stops_at_first_iterate() {
    let st = setup();
    let opts = IterateOptions {
        tol: f64::INFINITY,
        ..IterateOptions::default()
    };
    let rec = iterate_reconstruct(&st.kernel, &st.pu, &st.values, &two(), None, &opts).unwrap();
    assert_eq!(rec.trace.iterations(), 0);
    let f0 = approx_project(&st.kernel, &st.pu, &st.values)
        .unwrap()
        .signal;
    assert!(rec.signal.sub(&f0).unwrap().max_abs() <= 1e-12 * f0.max_abs());
}

#[test]
fn max_iterations_and_certificates() {
    let st = setup();
    let opts = IterateOptions {
        r_max: 3,
        tol: 0.0,
        gamma_theory: Some(0.5),
    };
    let rec = iterate_reconstruct(
        &st.kernel,
        &st.pu,
        &st.values,
        &two(),
        Some(&st.truth),
        &opts,
    )
    .unwrap();
    assert_eq!(rec.trace.stop, StopReason::MaxIterations);
    assert_eq!(rec.trace.rows.len(), 4);
    let fnorm = rec.trace.truth_norm.unwrap();
    for row in &rec.trace.rows {
        assert_eq!(
            row.certificate.unwrap(),
            error_certificate(0.5, fnorm, row.r).unwrap()
        );
    }
}

#[test]
fn stationary_at_a_fixed_point() {
    let st = setup();
    let opts = IterateOptions {
        tol: 1e-13,
        ..IterateOptions::default()
    };
    let rec = iterate_reconstruct(&st.kernel, &st.pu, &st.values, &two(), None, &opts).unwrap();
    let fixed = rec.coeffs.clone();
    let op = SamplingOperator::new(&st.kernel, &st.pu).unwrap();
    // restarting from the limit as truth: the error never grows
    let opts = IterateOptions {
        r_max: 10,
        tol: 1e-9,
        gamma_theory: None,
    };
    let again =
        iterate_reconstruct(&st.kernel, &st.pu, &st.values, &two(), Some(&fixed), &opts).unwrap();
    let f0 = again.trace.rows[0].error.unwrap();
    for row in &again.trace.rows {
        assert!(row.error.unwrap() <= f0 * (1.0 + 1e-9));
    }
    // the fixed point satisfies c = c0 + c - S c, so S c = c0
    let c0 = op.project(st.values.values());
    let sc = op.project(&op.evaluate(fixed.coefficients()));
    let gap = c0
        .iter()
        .zip(&sc)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(gap <= 1e-10, "{gap}");
}

#[test]
fn sample_perturbations_stay_bounded() {
    let st = setup();
    let e = two();
    let opts = IterateOptions::default();
    let base =
        iterate_reconstruct(&st.kernel, &st.pu, &st.values, &e, Some(&st.truth), &opts).unwrap();
    let gamma = base.trace.gamma_emp.unwrap();
    let eps = 1e-3;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let noisy: Vec<f64> = st
        .values
        .values()
        .iter()
        .map(|v| v + eps * rng.gen_range(-1.0..1.0))
        .collect();
    let noisy = SampleMatrix::new(20, 20, noisy).unwrap();
    let pert = iterate_reconstruct(&st.kernel, &st.pu, &noisy, &e, None, &opts).unwrap();
    let diff = grid_mixed_norm(&pert.signal.sub(&base.signal).unwrap(), &e, None).unwrap();
    // ||T Q_X d|| <= ||T||_{op} eps ||1_C||, and the iteration sums a geometric series in gamma
    let grid = st.pu.grid();
    let ones =
        GridSignal::from_fn(grid.clone(), |p| if c22().contains(p) { 1.0 } else { 0.0 }).unwrap();
    let t_norm = st.kernel.apply(&ones).unwrap().signal;
    let bound = eps
        * grid_mixed_norm(&t_norm, &e, None)
            .unwrap()
            .max(grid_mixed_norm(&ones, &e, None).unwrap())
        / (1.0 - gamma);
    assert!(diff > 0.0 && diff <= bound, "{diff} > {bound}");
}

#[test]
fn certificate_examples() {
    for r in 0..5 {
        assert_eq!(error_certificate(0.0, 3.0, r).unwrap(), 0.0);
        assert!(
            error_certificate(0.7, 1.0, r + 1).unwrap() < error_certificate(0.7, 1.0, r).unwrap()
        );
    }
    assert_relative_eq!(
        error_certificate(0.5, 1.0, 3).unwrap(),
        0.1875,
        max_relative = 1e-15
    );
    assert!(matches!(
        error_certificate(1.0, 1.0, 1),
        Err(Error::NotContractive { .. })
    ));
}
