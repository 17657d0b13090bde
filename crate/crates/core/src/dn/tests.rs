use super::*;
use crate::spectral::sobolev_norm;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn g1(n: usize) -> Grid {
    Grid::new(1, n).unwrap()
}

fn cfg(m: usize) -> DnConfig {
    DnConfig::default().with_m(m)
}

fn random_smooth(grid: Grid, rng: &mut ChaCha8Rng, kmax: i64, amp: f64) -> Field {
    let mut modes = Vec::new();
    for k0 in -kmax..=kmax {
        for k1 in if grid.dim() == 2 { -kmax..=kmax } else { 0..=0 } {
            modes.push(([k0 as f64, k1 as f64], rng.gen_range(-1.0..1.0), rng.gen_range(0.0..6.3)));
        }
    }
    let f = Field::from_fn(grid, |x| {
        modes.iter().map(|(k, a, p)| a * (k[0] * x[0] + k[1] * x[1] + p).cos()).sum::<f64>()
    });
    f.scale(amp / f.max_abs())
}

#[test]
fn flat_straightening_is_zh() {
    let g = g1(16);
    for mode in [MapMode::Linear, MapMode::Smoothing] {
        let map = build_straightening(&Field::zeros(g), 2.0, 8, mode, None).unwrap();
        for i in 0..=8 {
            let lv = map.level(map.z(i));
            assert!((&lv.rho - &Field::constant(g, map.z(i) * 2.0)).max_abs() < 1e-14);
            assert!((&lv.rho_z - &Field::constant(g, 2.0)).max_abs() < 1e-14);
        }
    }
}

#[test]
fn linear_map_boundary_rows() {
    let g = g1(32);
    let eta = Field::from_fn(g, |x| 0.2 * x[0].sin() + 0.1 * (3.0 * x[0]).cos());
    let map = build_straightening(&eta, 1.0, 8, MapMode::Linear, None).unwrap();
    assert!((&map.level(0.0).rho - &eta).max_abs() < 1e-14);
    assert!((&map.level(-1.0).rho - &Field::constant(g, -1.0)).max_abs() < 1e-14);
}

#[test]
fn smoothing_map_keeps_lower_bound() {
    let g = g1(64);
    let eta = Field::from_fn(g, |x| 0.4 * x[0].cos());
    let map = build_straightening(&eta, 1.0, 16, MapMode::Smoothing, None).unwrap();
    assert!((map.delta() * w1_inf(&eta) - 0.1).abs() < 1e-12);
    for l in 0..=32 {
        assert!(map.rho_z_at(map.fine_z(l)).iter().all(|v| *v >= 0.5));
    }
    assert!((&map.level(0.0).rho - &eta).max_abs() < 1e-12);
}

#[test]
fn lower_bound_violation_names_node() {
    let g = g1(16);
    let eta = Field::from_fn(g, |x| -0.7 * x[0].cos());
    match build_straightening(&eta, 1.0, 8, MapMode::Linear, None) {
        Err(Error::LowerBound { node, value, bound, .. }) => {
            assert_eq!(node, 0);
            assert!((value - 0.3).abs() < 1e-12 && bound == 0.5);
        }
        other => panic!("expected lower bound failure, got {other:?}"),
    }
    let deep = Field::from_fn(g, |x| -1.2 * x[0].cos());
    assert!(matches!(
        build_straightening(&deep, 1.0, 8, MapMode::Linear, None),
        Err(Error::InvalidParameter(_))
    ));
    assert!(build_straightening(&Field::zeros(g), 1.0, 4, MapMode::Linear, None).is_err());
}

#[test]
fn elliptic_coefficients_flat_and_bottom() {
    let g = g1(16);
    let map = build_straightening(&Field::zeros(g), 1.5, 8, MapMode::Linear, None).unwrap();
    let c = elliptic_coefficients(&map);
    for i in 0..=8 {
        assert!((&c.alpha[i] - &Field::constant(g, 2.25)).max_abs() < 1e-14);
        assert!(c.beta[i][0].max_abs() < 1e-14 && c.gamma[i].max_abs() < 1e-14);
    }
    let eta = Field::from_fn(g, |x| 0.3 * x[0].sin());
    let map = build_straightening(&eta, 1.0, 8, MapMode::Linear, None).unwrap();
    let c = elliptic_coefficients(&map);
    assert!(c.beta[0][0].max_abs() < 1e-14);
    let floor = 0.25 / (1.0 + 0.09);
    assert!(c.alpha.iter().all(|a| a.min_re() >= floor));
}

#[test]
fn flat_oracle_and_second_order() {
    let g = g1(64);
    let f = Field::from_fn(g, |x| (3.0 * x[0]).cos());
    let exact = f.scale(3.0 * 3f64.tanh());
    assert!((&dn_flat_exact(&f, 1.0) - &exact).max_abs() < 1e-13);
    assert!((3.0 * 3f64.tanh() - 2.9851).abs() < 1e-4);
    let e64 = (&dn_apply(&Field::zeros(g), &f, cfg(64)).unwrap() - &exact).rms() / exact.rms();
    let e128 = (&dn_apply(&Field::zeros(g), &f, cfg(128)).unwrap() - &exact).rms() / exact.rms();
    assert!(e64 < 1e-3, "{e64}");
    assert!((e64 / e128 - 4.0).abs() < 0.1, "{}", e64 / e128);
}

#[test]
fn flat_exact_limits() {
    let g = g1(32);
    let f = Field::from_fn(g, |x| (3.0 * x[0]).cos());
    assert!((&dn_flat_exact(&f, 50.0) - &f.scale(3.0)).max_abs() < 1e-12);
    assert!(dn_flat_exact(&Field::constant(g, 1.0), 1.0).max_abs() < 1e-15);
}

#[test]
fn discrete_flat_symbol_matches_solver() {
    let g = g1(32);
    for k in [1.0, 4.0, 9.0] {
        let f = Field::from_fn(g, |x| (k * x[0]).sin());
        let out = dn_apply(&Field::zeros(g), &f, cfg(16).with_h(0.7)).unwrap();
        let want = f.scale(dn_flat_discrete_symbol(k, 0.7, 16));
        assert!((&out - &want).max_abs() < 1e-9, "k={k}");
    }
    assert_eq!(dn_flat_discrete_symbol(0.0, 1.0, 16), 0.0);
}

#[test]
fn flat_correction_is_exact_on_flat_surface() {
    let g = Grid::new(2, 16).unwrap();
    let f = Field::from_fn(g, |x| (2.0 * x[0] - x[1]).cos() + 0.5 * (3.0 * x[1]).sin());
    let out = dn_apply(&Field::zeros(g), &f, cfg(8).with_flat_correction(true)).unwrap();
    assert!((&out - &dn_flat_exact(&f, 1.0)).max_abs() < 1e-10);
}

#[test]
fn flat_lift_is_separable() {
    let g = g1(32);
    let k = 2.0;
    let f = Field::from_fn(g, |x| (k * x[0]).cos());
    let s = DnSolver::new(&Field::zeros(g), cfg(64)).unwrap();
    let lift = s.solve_harmonic(&f).unwrap();
    for i in [0, 16, 48] {
        let z = s.map().z(i);
        let want = f.scale((k * (1.0 + z)).cosh() / k.cosh());
        assert!((&lift.level(i) - &want).max_abs() < 2e-3, "level {i}");
    }
}

#[test]
fn constants_are_in_the_kernel() {
    let g = g1(32);
    let eta = Field::from_fn(g, |x| 0.2 * x[0].cos());
    let s = DnSolver::new(&eta, cfg(16)).unwrap();
    let c = Field::constant(g, 1.7);
    let lift = s.solve_harmonic(&c).unwrap();
    let dev = lift.levels.iter().flatten().fold(0.0f64, |m, v| m.max((v - 1.7).abs()));
    assert!(dev < 1e-9, "{dev}");
    assert!(s.trace(&lift).max_abs() < 1e-10);
    let ef = s.energy_and_flux(&c).unwrap();
    assert!(ef.energy < 1e-10 && ef.flux.abs() < 1e-10);
}

#[test]
fn flat_flux_of_cosine() {
    let g = g1(32);
    for k in [1.0, 3.0] {
        let f = Field::from_fn(g, |x| (k * x[0]).cos());
        let ef = energy_and_flux(&Field::zeros(g), &f, cfg(8).with_flat_correction(true)).unwrap();
        assert!((ef.flux - flat_flux_cos(k, 1.0)).abs() < 1e-10);
        let ef = energy_and_flux(&Field::zeros(g), &f, cfg(64)).unwrap();
        assert!((ef.flux / flat_flux_cos(k, 1.0) - 1.0).abs() < 1e-3);
    }
}

#[test]
fn flux_matches_energy() {
    let g = g1(64);
    let eta = Field::from_fn(g, |x| 0.1 * x[0].cos());
    let f = Field::from_fn(g, |x| x[0].cos());
    let ef = energy_and_flux(&eta, &f, cfg(128)).unwrap();
    assert!(ef.mismatch <= 1e-6 * ef.flux, "{ef:?}");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g2 = Grid::new(2, 16).unwrap();
    let eta = random_smooth(g2, &mut rng, 2, 0.2);
    let f = random_smooth(g2, &mut rng, 3, 1.0);
    for mode in [MapMode::Linear, MapMode::Smoothing] {
        let ef = energy_and_flux(&eta, &f, DnConfig { mode, ..cfg(16) }).unwrap();
        assert!(ef.mismatch <= 1e-9 * ef.flux, "{mode:?} {ef:?}");
    }
}

#[test]
fn operator_is_symmetric_and_nonnegative() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (dim, n) in [(1, 64), (2, 16)] {
        let g = Grid::new(dim, n).unwrap();
        let eta = random_smooth(g, &mut rng, 3, 0.25);
        for mode in [MapMode::Linear, MapMode::Smoothing] {
            let s = DnSolver::new(&eta, DnConfig { mode, ..cfg(16) }).unwrap();
            for _ in 0..3 {
                let f = random_smooth(g, &mut rng, 5, 1.0);
                let h = random_smooth(g, &mut rng, 5, 1.0);
                let (gf, gh) = (s.apply(&f).unwrap(), s.apply(&h).unwrap());
                let asym = (f.dot(&gh) - h.dot(&gf)).abs();
                assert!(asym <= 1e-8 * f.rms() * h.rms(), "{asym}");
                assert!(f.dot(&gf) >= -1e-10);
            }
        }
    }
}

#[test]
fn maximum_principle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = g1(64);
    for _ in 0..4 {
        let eta = random_smooth(g, &mut rng, 3, 0.3);
        let f = random_smooth(g, &mut rng, 6, 1.0);
        let lift = DnSolver::new(&eta, cfg(32)).unwrap().solve_harmonic(&f).unwrap();
        assert!(lift.max_abs() <= f.max_abs() * (1.0 + 1e-8));
    }
}

#[test]
fn trace_forms_agree() {
    let g = g1(64);
    let eta = Field::from_fn(g, |x| 0.15 * x[0].cos() + 0.05 * (2.0 * x[0]).sin());
    let f = Field::from_fn(g, |x| x[0].sin() + 0.3 * (3.0 * x[0]).cos());
    let s = DnSolver::new(&eta, cfg(64)).unwrap();
    let lift = s.solve_harmonic(&f).unwrap();
    let one = s.trace_one_sided(&lift);
    let div = s.trace_divergence_form(&lift);
    assert!((&one - &div).max_abs() < 1e-8 * one.max_abs());
    let var = s.trace(&lift);
    assert!((&one.without_mean() - &var).max_abs() < 1e-2 * var.max_abs());
}

#[test]
fn self_convergence_is_second_order() {
    let g = g1(32);
    let eta = Field::from_fn(g, |x| 0.1 * x[0].cos());
    let f = Field::from_fn(g, |x| x[0].cos());
    let v: Vec<Field> = [16, 32, 64].iter().map(|&m| dn_apply(&eta, &f, cfg(m)).unwrap()).collect();
    let ratio = (&v[0] - &v[1]).rms() / (&v[1] - &v[2]).rms();
    assert!((ratio - 4.0).abs() < 0.2, "{ratio}");
}

#[test]
fn energy_gradient_is_exact_derivative() {
    let g = g1(32);
    let eta = Field::from_fn(g, |x| 0.1 * x[0].cos() - 0.04 * (2.0 * x[0]).sin());
    let psi = Field::from_fn(g, |x| x[0].cos() + 0.3 * (2.0 * x[0]).sin());
    let dir = Field::from_fn(g, |x| (2.0 * x[0]).cos() + 0.5 * x[0].sin());
    for mode in [MapMode::Linear, MapMode::Smoothing] {
        let c = DnConfig { mode, delta: Some(0.3), ..cfg(16) };
        let s = DnSolver::new(&eta, c).unwrap();
        let grad = s.energy_gradient(&s.solve_harmonic(&psi).unwrap());
        let half = |e: &Field| 0.5 * psi.dot(&dn_apply(e, &psi, c).unwrap());
        let eps = 1e-5;
        let fd = (half(&(&eta + &dir.scale(eps))) - half(&(&eta - &dir.scale(eps)))) / (2.0 * eps);
        let an = grad.dot(&dir);
        assert!((fd - an).abs() < 1e-8 * an.abs().max(1e-3), "{mode:?}: {fd} vs {an}");
    }
}

#[test]
fn energy_gradient_approaches_continuous_identity() {
    let g = g1(32);
    let eta = Field::from_fn(g, |x| 0.1 * x[0].cos());
    let psi = Field::from_fn(g, |x| x[0].cos() + 0.3 * (2.0 * x[0]).sin());
    let err = |m: usize| {
        let s = DnSolver::new(&eta, cfg(m)).unwrap();
        let lift = s.solve_harmonic(&psi).unwrap();
        let gpsi = s.trace(&lift);
        let (b, v) = surface_velocities(&eta, &psi, &gpsi);
        let cont = (&crate::spectral::norm_sqr_vec(&v) - &(&b * &b)).scale(0.5);
        let cont = &cont + &(&b * &dot_vec(&v, &gradient(&eta)));
        (&s.energy_gradient(&lift) - &cont).max_abs()
    };
    let (e1, e2) = (err(16), err(32));
    assert!(e2 < 1e-3 && (e1 / e2 - 4.0).abs() < 0.3, "{e1} {e2}");
}

#[test]
fn shape_derivative_examples() {
    let g = g1(32);
    let eta = Field::from_fn(g, |x| 0.1 * x[0].cos());
    let f = Field::from_fn(g, |x| x[0].sin());
    assert!(shape_derivative(&eta, &Field::zeros(g), &f, cfg(16)).unwrap().max_abs() < 1e-14);

    let c = cfg(8).with_flat_correction(true);
    let psi = Field::from_fn(g, |x| x[0].cos());
    let cosx = Field::from_fn(g, |x| x[0].cos());
    let got = shape_derivative(&Field::zeros(g), &psi, &cosx, c).unwrap();
    let bf = Field::from_fn(g, |x| 1f64.tanh() * x[0].cos().powi(2));
    let want = &(-&dn_flat_exact(&bf, 1.0)) + &Field::from_fn(g, |x| (2.0 * x[0]).cos());
    assert!((&got - &want).max_abs() < 1e-9);
}

#[test]
fn shape_derivative_matches_difference_quotients() {
    let g = g1(32);
    let c = DnConfig { tol: 1e-14, ..cfg(512) };
    let eta = Field::from_fn(g, |x| 0.1 * x[0].cos());
    let psi = Field::from_fn(g, |x| x[0].sin() + 0.2 * (2.0 * x[0]).cos());
    let f = Field::from_fn(g, |x| (2.0 * x[0]).cos());
    let sd = shape_derivative(&eta, &psi, &f, c).unwrap();
    let g0 = dn_apply(&eta, &psi, c).unwrap();
    let errs: Vec<f64> = [1e-2, 1e-3]
        .iter()
        .map(|&e| (&(&dn_apply(&(&eta + &f.scale(e)), &psi, c).unwrap() - &g0).scale(1.0 / e) - &sd).rms())
        .collect();
    let slope = (errs[0] / errs[1]).log10();
    assert!((slope - 1.0).abs() < 0.1, "{errs:?}");
}

#[test]
fn paralinearization_is_accurate_for_small_slopes() {
    let g = g1(128);
    let eta = Field::from_fn(g, |x| 0.05 * x[0].cos());
    let psi = Field::from_fn(g, |x| (8.0 * x[0]).cos());
    let p = dn_paralinearized(&eta, &psi, cfg(64)).unwrap();
    let rel = sobolev_norm(&p.residual, 2.0) / sobolev_norm(&p.exact, 2.0);
    assert!(rel <= 0.1, "{rel}");
    assert!((&(&p.approx + &p.residual) - &p.exact).max_abs() < 1e-12);
}

#[test]
fn failed_solve_reports_conditioning() {
    let g = g1(32);
    let eta = Field::from_fn(g, |x| 0.3 * x[0].cos());
    let f = Field::from_fn(g, |x| (5.0 * x[0]).sin());
    let c = DnConfig { max_iter: 1, tol: 1e-15, ..cfg(16) };
    match dn_apply(&eta, &f, c) {
        Err(Error::SolveFailed { iterations, condition, .. }) => {
            assert_eq!(iterations, 1);
            assert!(condition > 1.0);
        }
        other => panic!("expected failure, got {other:?}"),
    }
}

#[test]
fn lift_dump_layout() {
    let g = g1(8);
    let lift = DnSolver::new(&Field::zeros(g), cfg(8)).unwrap().solve_harmonic(&Field::from_fn(g, |x| x[0].cos())).unwrap();
    let mut buf = Vec::new();
    lift.write(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 1 + 9 * 8);
    assert!(text.starts_with("# strip 1 8 8"));
    assert_eq!(text.lines().nth(1).unwrap().split_whitespace().count(), 3);
}
