use approx::assert_relative_eq;
use lpq_sampling::kernel_space::*;
use lpq_sampling::mixed_norms::{grid_mixed_norm, Cube, Exponents, Grid, GridSignal};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

fn canonical(cube: &Cube) -> Kernel {
    let lat = Lattice::scaled_integer(cube, MIN_GAP, Placement::Contained).unwrap();
    Kernel::new(GeneratorPhi::normalized(cube.n).unwrap(), lat).unwrap()
}

fn c44() -> Cube {
    Cube::new(4.0, 4.0, 1).unwrap()
}

fn single(amplitude: f64) -> Kernel {
    let lat = Lattice::new(1, vec![vec![0.0, 0.0]], MIN_GAP).unwrap();
    Kernel::new(GeneratorPhi::new(1, amplitude).unwrap(), lat).unwrap()
}

/// Brute force: every node, no lookup.
fn full_sum(k: &Kernel, p: &[f64], q: &[f64]) -> f64 {
    let a = k.phi().amplitude();
    let tent = |z: &[f64], v: &[f64]| {
        let l1: f64 = z.iter().zip(v).map(|(x, y)| (x - y).abs()).sum();
        a * (1.0 - 3.0 * l1).max(0.0)
    };
    k.lattice().nodes().map(|v| tent(p, v) * tent(q, v)).sum()
}

fn random_coeffs(k: &Kernel, rng: &mut ChaCha8Rng) -> CoeffSeq {
    let c = (0..k.lattice().len())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    CoeffSeq::new(k.lattice_arc().clone(), c).unwrap()
}

fn rel_l2(a: &GridSignal, b: &GridSignal) -> f64 {
    let e = Exponents::uniform(2.0).unwrap();
    grid_mixed_norm(&a.sub(b).unwrap(), &e, None).unwrap() / grid_mixed_norm(b, &e, None).unwrap()
}

fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

proptest! {
    #[test]
    fn kernel_matches_full_sum(x in -2.2f64..2.2, y in -2.2f64..2.2, s in -2.2f64..2.2, t in -2.2f64..2.2) {
        let k = canonical(&c44());
        let v = k.eval(&[x, y], &[s, t]);
        let w = full_sum(&k, &[x, y], &[s, t]);
        prop_assert!((v - w).abs() <= 1e-14 * w.abs().max(1.0));
    }

    #[test]
    fn kernel_is_symmetric(x in -2.2f64..2.2, y in -2.2f64..2.2, dx in -0.4f64..0.4, dy in -0.4f64..0.4) {
        let k = canonical(&c44());
        let p = [x, y];
        let q = [x + dx, y + dy];
        prop_assert_eq!(k.eval(&p, &q), k.eval(&q, &p));
    }

    #[test]
    fn phi_support_in_box(x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let phi = GeneratorPhi::new(1, 1.0).unwrap();
        if x.abs() > SUPPORT_RADIUS || y.abs() > SUPPORT_RADIUS {
            prop_assert_eq!(phi.eval(&[x, y]), 0.0);
        }
    }
}

#[test]
fn kernel_zero_across_nodes_and_peak_at_node() {
    let k = canonical(&c44());
    let a = k.phi().amplitude();
    for i in 0..k.lattice().len() {
        let v = k.lattice().node(i).to_vec();
        assert_relative_eq!(k.eval(&v, &v), a * a, max_relative = 1e-14);
        let w = k.lattice().node((i + 1) % k.lattice().len()).to_vec();
        assert_eq!(k.eval(&[v[0] + 0.05, v[1]], &[w[0] - 0.05, w[1]]), 0.0);
    }
}

/// Refining midpoint rule of `int phi^2` on the positive orthant, times 2^d.
fn orthant_l2_squared(d: usize, cells: usize) -> f64 {
    let h = SUPPORT_RADIUS / cells as f64;
    let mut idx = vec![0usize; d];
    let mut sum = 0.0;
    loop {
        let l1: f64 = idx.iter().map(|&i| (i as f64 + 0.5) * h).sum();
        let v = (1.0 - 3.0 * l1).max(0.0);
        sum += v * v;
        let mut a = 0;
        loop {
            idx[a] += 1;
            if idx[a] < cells {
                break;
            }
            idx[a] = 0;
            a += 1;
            if a == d {
                return sum * h.powi(d as i32) * 2f64.powi(d as i32);
            }
        }
    }
}

#[test]
fn normalizer_matches_quadrature_oracle() {
    // n = 1: Richardson-extrapolated midpoint quadrature gives 1/27
    let q1 = orthant_l2_squared(2, 800);
    let q2 = orthant_l2_squared(2, 1600);
    let extrap = (4.0 * q2 - q1) / 3.0;
    assert_relative_eq!(extrap, 1.0 / 27.0, max_relative = 1e-9);
    let a = normalize_phi(1).unwrap();
    assert_relative_eq!(a, 1.0 / extrap.sqrt(), max_relative = 1e-9);
    assert_relative_eq!(a, 5.196152423, max_relative = 1e-9);
    // n = 4: the quadrature decides against the printed prefactor
    let q = orthant_l2_squared(5, 24);
    let a4 = normalize_phi(4).unwrap();
    assert_relative_eq!(a4 * a4 * q, 1.0, max_relative = 2e-2);
    let printed = printed_prefactor(4).unwrap();
    assert!((printed * printed * q - 1.0).abs() > 0.5);
}

#[test]
fn apply_matches_direct_double_sum() {
    let cube = Cube::new(2.0, 2.0, 1).unwrap();
    let k = canonical(&cube);
    let grid = Grid::with_spacing(cube, 1.0 / 24.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let f = GridSignal::from_fn(grid.clone(), |_| rng.gen_range(-1.0..1.0)).unwrap();
    let tf = k.apply(&f).unwrap();
    assert!(tf.truncated.is_empty());
    let vol = grid.cell_volume();
    let nodes: Vec<Vec<f64>> = (0..grid.len()).map(|i| grid.node(i)).collect();
    for (pi, p) in nodes.iter().enumerate().step_by(7) {
        let direct: f64 = nodes
            .iter()
            .zip(f.values())
            .map(|(q, fv)| full_sum(&k, p, q) * fv * vol)
            .sum();
        let got = tf.signal.values()[pi];
        assert!(
            (got - direct).abs() <= 1e-12 * direct.abs().max(1.0),
            "{got} vs {direct}"
        );
    }
}

#[test]
fn apply_vanishes_away_from_nodes() {
    let lat = Lattice::new(1, vec![vec![-1.0, 0.0]], MIN_GAP).unwrap();
    let k = Kernel::new(GeneratorPhi::normalized(1).unwrap(), lat).unwrap();
    let grid = Grid::with_spacing(Cube::new(4.0, 2.0, 1).unwrap(), 1.0 / 24.0).unwrap();
    let f = GridSignal::from_fn(grid, |z| if z[0] > 0.0 { 1.0 } else { 0.0 }).unwrap();
    let tf = k.apply(&f).unwrap();
    assert_eq!(tf.signal.max_abs(), 0.0);
}

#[test]
fn eigenfunction_residual_shrinks_with_h() {
    let cube = c44();
    let k = canonical(&cube);
    let mut prev = f64::INFINITY;
    for h in [1.0 / 24.0, 1.0 / 48.0, 1.0 / 96.0] {
        let grid = Grid::with_spacing(cube, h).unwrap();
        let c = CoeffSeq::one_hot(k.lattice_arc().clone(), 12).unwrap();
        let f = k.synthesize(&c, &grid).unwrap();
        let tf = k.apply(&f).unwrap().signal;
        let r = rel_l2(&tf, &f);
        assert!(r < 10.0 * h, "residual {r} at h = {h}");
        assert!(r < prev);
        prev = r;
    }
}

#[test]
fn idempotency_and_reproduction_ladder() {
    let cube = c44();
    let k = canonical(&cube);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let noise: Vec<f64> = (0..4096).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c = random_coeffs(&k, &mut rng);
        let mut idem = Vec::new();
        let mut repro = Vec::new();
        for h in [1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0] {
            let grid = Grid::with_spacing(cube, h).unwrap();
            let f = GridSignal::from_fn(grid.clone(), |z| {
                let i = ((z[0] + 2.0) * 16.0) as usize * 64 + ((z[1] + 2.0) * 16.0) as usize;
                noise[i]
            })
            .unwrap();
            let tf = k.apply(&f).unwrap().signal;
            let ttf = k.apply(&tf).unwrap().signal;
            idem.push(rel_l2(&ttf, &tf));
            let g = k.synthesize(&c, &grid).unwrap();
            repro.push(rel_l2(&k.apply(&g).unwrap().signal, &g));
        }
        for w in idem.windows(2).chain(repro.windows(2)) {
            assert!(order(w[0], w[1]) >= 0.9, "{idem:?} {repro:?}");
        }
        assert!(repro[0] < 5.0 / 32.0);
    }
}

#[test]
fn synthesis_is_linear_and_exact() {
    let cube = c44();
    let k = canonical(&cube);
    let grid = Grid::with_spacing(cube, 1.0 / 24.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let c1 = random_coeffs(&k, &mut rng);
    let c2 = random_coeffs(&k, &mut rng);
    let f12 = k.synthesize(&c1.add(&c2).unwrap(), &grid).unwrap();
    let sum = k
        .synthesize(&c1, &grid)
        .unwrap()
        .add(&k.synthesize(&c2, &grid).unwrap())
        .unwrap();
    for (a, b) in f12.values().iter().zip(sum.values()) {
        assert!((a - b).abs() <= 1e-14);
    }
    assert!(k
        .synthesize(&CoeffSeq::zeros(k.lattice_arc().clone()), &grid)
        .unwrap()
        .is_zero());
    let one = k
        .synthesize(
            &CoeffSeq::one_hot(k.lattice_arc().clone(), 4).unwrap(),
            &grid,
        )
        .unwrap();
    let v = k.lattice().node(4).to_vec();
    for i in 0..grid.len() {
        let z = grid.node(i);
        assert_eq!(one.values()[i], k.phi().eval_shifted(&z, &v));
    }
    for i in (0..grid.len()).step_by(13) {
        let z = grid.node(i);
        assert_relative_eq!(
            f12.values()[i],
            k.eval_expansion(&c1.add(&c2).unwrap(), &z),
            epsilon = 1e-14
        );
    }
}

#[test]
fn analysis_roundtrip_is_second_order() {
    let cube = c44();
    let k = canonical(&cube);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let zero = GridSignal::zeros(Grid::with_spacing(cube, 1.0 / 24.0).unwrap());
    assert_eq!(k.analyze(&zero).unwrap().max_abs(), 0.0);
    for _ in 0..5 {
        let c = random_coeffs(&k, &mut rng);
        let errs: Vec<f64> = [1.0 / 48.0, 1.0 / 96.0, 1.0 / 192.0]
            .iter()
            .map(|&h| {
                let grid = Grid::with_spacing(cube, h).unwrap();
                let back = k.analyze(&k.synthesize(&c, &grid).unwrap()).unwrap();
                back.sub(&c).unwrap().max_abs()
            })
            .collect();
        assert!(errs[1] <= 5e-3);
        for w in errs.windows(2) {
            assert!(order(w[0], w[1]) >= 1.8, "{errs:?}");
        }
    }
}

/// Continuum `||K||_W` of one node from a 1-D reduction: with
/// `u = 1-3|y|`, `v = 1-3|t|` the slice sup is `A u_+` and the slice mass
/// `A v_+^2 / 3`, so `g(y,t) = A^2/3 u v max(u,v)`.
fn w_norm_reference(a: f64) -> f64 {
    let steps = 20000;
    let h = 2.0 * SUPPORT_RADIUS / steps as f64;
    let mut best = 0.0f64;
    for iy in 0..=200 {
        let u = 1.0 - 3.0 * (iy as f64 / 200.0) * SUPPORT_RADIUS;
        let s: f64 = (0..steps)
            .map(|it| {
                let t = -SUPPORT_RADIUS + (it as f64 + 0.5) * h;
                let v = 1.0 - 3.0 * t.abs();
                a * a / 3.0 * u * v * u.max(v)
            })
            .sum::<f64>()
            * h;
        best = best.max(s);
    }
    best
}

#[test]
fn w_norm_single_node_matches_reference() {
    let a = normalize_phi(1).unwrap();
    let reference = w_norm_reference(a);
    assert_relative_eq!(reference, a * a / 9.0, max_relative = 1e-8);
    // odd point count puts a cell center on the node
    let pts = 2049;
    let side = pts as f64 / 3072.0;
    let grid = Grid::new(Cube::new(side, side, 1).unwrap(), pts, pts).unwrap();
    let got = kernel_w_norm(&single(a), &grid).unwrap();
    assert_relative_eq!(got, reference, max_relative = 1e-6);
}

#[test]
fn w_norm_translation_invariant() {
    let cube = c44();
    let k = canonical(&cube);
    let h = 1.0 / 48.0;
    let grid = Grid::with_spacing(Cube::new(5.0, 5.0, 1).unwrap(), h).unwrap();
    let base = kernel_w_norm(&k, &grid).unwrap();
    let moved = kernel_w_norm(&k.translated(&[8.0 * h, -5.0 * h]).unwrap(), &grid).unwrap();
    assert!((base - moved).abs() <= 1e-12 * base);
    let empty = Kernel::new(*k.phi(), Lattice::empty(1).unwrap()).unwrap();
    assert_eq!(kernel_w_norm(&empty, &grid).unwrap(), 0.0);
}

#[test]
fn modulus_ladder_is_linear_in_eps() {
    let cube = c44();
    let k = canonical(&cube);
    let grid =
        Grid::with_spacing(Cube::new(14.0 / 3.0, 14.0 / 3.0, 1).unwrap(), 1.0 / 48.0).unwrap();
    let eps = [0.1, 0.05, 0.025, 0.0125];
    let w: Vec<f64> = eps
        .iter()
        .map(|&e| modulus_w_eps(&k, e, &grid, Stencil::Exact).unwrap())
        .collect();
    for pair in w.windows(2) {
        assert!(pair[1] < pair[0], "{w:?}");
    }
    let slopes: Vec<f64> = w.iter().zip(&eps).map(|(v, e)| v / e).collect();
    for pair in slopes.windows(2) {
        assert!((pair[0] / pair[1] - 1.0).abs() < 0.1, "{slopes:?}");
    }
    assert_eq!(modulus_w_eps(&k, 0.0, &grid, Stencil::Exact).unwrap(), 0.0);
}

#[test]
fn uniform_stencil_converges_to_exact_box_sup() {
    let k = single(1.0);
    let grid = Grid::with_spacing(Cube::new(1.0, 1.0, 1).unwrap(), 1.0 / 24.0).unwrap();
    let exact = modulus_w_eps(&k, 0.05, &grid, Stencil::Exact).unwrap();
    let u3 = modulus_w_eps(&k, 0.05, &grid, Stencil::Uniform(3)).unwrap();
    let u9 = modulus_w_eps(&k, 0.05, &grid, Stencil::Uniform(9)).unwrap();
    assert!(u3 <= u9 && u9 <= exact * (1.0 + 1e-12));
    assert!(u9 > 0.97 * exact, "{u3} {u9} {exact}");
}

#[test]
fn modulus_monotone_in_eps_on_fine_ladder() {
    let k = single(1.0);
    let grid = Grid::with_spacing(Cube::new(1.0, 1.0, 1).unwrap(), 1.0 / 36.0).unwrap();
    let mut prev = 0.0;
    for i in 1..=10 {
        let w = modulus_w_eps(&k, i as f64 * 0.01, &grid, Stencil::Exact).unwrap();
        assert!(w >= prev);
        prev = w;
    }
}

#[test]
fn decay_fit_stable_and_quadratic_in_amplitude() {
    let e = Exponents::uniform(2.0).unwrap();
    let (at, bt) = decay_thresholds(1, &e);
    let k = single(1.0);
    let coarse = decay_envelope_check(&k, at + 1.0, bt + 1.0, &e, 8).unwrap();
    let fine = decay_envelope_check(&k, at + 1.0, bt + 1.0, &e, 16).unwrap();
    assert!(
        (coarse.c / fine.c - 1.0).abs() < 0.05,
        "{} {}",
        coarse.c,
        fine.c
    );
    let k2 = single(2.0);
    let doubled = decay_envelope_check(&k2, at + 1.0, bt + 1.0, &e, 8).unwrap();
    assert_relative_eq!(doubled.c, 4.0 * coarse.c, max_relative = 1e-12);
}

#[test]
fn k_sup_of_single_normalized_node() {
    let a = normalize_phi(1).unwrap();
    let k = single(a);
    let e = Exponents::uniform(2.0).unwrap();
    let pts = 2049;
    let side = pts as f64 / 3072.0;
    let grid = Grid::new(Cube::new(side, side, 1).unwrap(), pts, pts).unwrap();
    // 1-D oracle: ||phi||_2^2 = A^2 int (2/9) v^3 dt with v = 1 - 3|t|
    let steps = 100000;
    let h = 2.0 * SUPPORT_RADIUS / steps as f64;
    let l2sq: f64 = (0..steps)
        .map(|i| {
            let v = 1.0 - 3.0 * (-SUPPORT_RADIUS + (i as f64 + 0.5) * h).abs();
            2.0 / 9.0 * v.powi(3)
        })
        .sum::<f64>()
        * h
        * a
        * a;
    let ks = compute_k_sup(&k, &e, &grid, None).unwrap();
    assert_relative_eq!(ks.value, a * l2sq.sqrt(), max_relative = 1e-6);
    assert_relative_eq!(ks.value, a, max_relative = 1e-6);
    assert!(ks.argmax.iter().all(|u| u.abs() <= grid.step(0)));
}

#[test]
fn k_sup_argmax_near_a_node() {
    let cube = c44();
    let k = canonical(&cube);
    let e = Exponents::new(2.0, 3.0).unwrap();
    let grid = Grid::with_spacing(cube, 1.0 / 48.0).unwrap();
    let ks = compute_k_sup(&k, &e, &grid, None).unwrap();
    let near = k.lattice().nodes().any(|v| {
        v.iter()
            .zip(&ks.argmax)
            .all(|(a, b)| (a - b).abs() <= grid.step(0))
    });
    assert!(near, "{:?}", ks.argmax);
}

#[test]
fn coefficient_sequences_share_lattices() {
    let k = canonical(&c44());
    let other = Arc::new(Lattice::new(1, vec![vec![0.0, 0.0]], MIN_GAP).unwrap());
    let c = CoeffSeq::zeros(k.lattice_arc().clone());
    let d = CoeffSeq::zeros(other);
    assert!(c.add(&d).is_err());
    let grid = Grid::with_spacing(c44(), 1.0 / 12.0).unwrap();
    assert!(k.synthesize(&d, &grid).is_err());
}
