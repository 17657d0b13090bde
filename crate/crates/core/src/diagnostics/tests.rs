use super::*;
use crate::dn::DnConfig;
use crate::spectral::{dot_vec, Grid};
use crate::waterwaves::PhysicalParams;

fn g1(n: usize) -> Grid {
    Grid::new(1, n).unwrap()
}

fn model(g: f64, h: f64) -> WaveModel {
    WaveModel::new(PhysicalParams { g, h }, DnConfig::default().with_m(16).with_flat_correction(true)).unwrap()
}

fn state(eta: Field, psi: Field) -> SurfaceState {
    SurfaceState::new(eta, psi).unwrap()
}

fn smooth(g: Grid, amp: f64) -> SurfaceState {
    state(
        Field::from_fn(g, |x| amp * (x[0].cos() + 0.4 * (2.0 * x[0]).sin())),
        Field::from_fn(g, |x| amp * (x[0].sin() + 0.3 * (3.0 * x[0]).cos())),
    )
}

fn run(m: &WaveModel, s0: &SurfaceState, dt: f64, t_end: f64) -> Vec<SurfaceState> {
    let mut o = EvolveOptions::new(dt, t_end);
    o.keep_states = true;
    o.track_hamiltonian = false;
    m.evolve(s0, &o, &mut |_| {}).states
}

#[test]
fn config_validation() {
    let c = MonitorConfig::for_dim(1);
    assert!(c.validate(1).is_ok());
    let (mu, p) = gain_exponents(1);
    assert!(c.r > 2.0 && c.r < c.s - 0.5 + mu && p == 4.0);
    assert!(MonitorConfig::for_dim(2).validate(2).is_ok());
    assert_eq!(gain_exponents(2), (0.3, 2.0));
    for bad in [
        MonitorConfig { s: 2.0, ..c },
        MonitorConfig { r: 2.0, ..c },
        MonitorConfig { eps_star: 0.0, ..c },
        MonitorConfig { stride: 0, ..c },
    ] {
        assert!(matches!(bad.validate(1), Err(Error::InvalidParameter(_))), "{bad:?}");
    }
}

#[test]
fn ab_at_rest() {
    let (a, b) = monitor_ab(&model(1.0, 1.0), &SurfaceState::rest(g1(32)), 0.1).unwrap();
    assert_eq!((a, b), (0.0, 1.0));
}

#[test]
fn ab_of_single_band_surface() {
    let g = g1(64);
    let amp = 2f64.powi(-16);
    let eta = Field::from_fn(g, |x| amp * (16.0 * x[0]).cos());
    let (a, b) = monitor_ab(&model(1.0, 1.0), &state(eta, Field::zeros(g)), 0.1).unwrap();
    let a_expect = amp * 2f64.powf(4.0 * 2.1) + amp / 2f64.sqrt();
    let b_expect = amp * 2f64.powf(4.0 * 2.6) + 1.0;
    assert!((a / a_expect - 1.0).abs() < 1e-12, "{a} vs {a_expect}");
    assert!((b / b_expect - 1.0).abs() < 1e-12, "{b} vs {b_expect}");
}

#[test]
fn ab_ordering_on_generic_state() {
    let g = g1(64);
    let m = model(1.0, 1.0);
    for amp in [0.01, 0.05, 0.1] {
        let s = smooth(g, amp);
        let (a, b) = monitor_ab(&m, &s, 0.1).unwrap();
        let gpsi = m.dn_apply(&s.eta, &s.psi).unwrap();
        assert!(a <= b * (1.0 + sobolev_norm(&s.eta, 0.0) + energy(&s.psi, &gpsi)), "{a} {b}");
    }
}

#[test]
fn rest_trajectory_monitors() {
    let g = g1(32);
    let m = model(1.0, 1.5);
    let states = run(&m, &SurfaceState::rest(g), 1e-3, 0.01);
    let bm = blowup_monitors(&m, &states, 0.1).unwrap();
    assert_eq!(bm, BlowupMonitors { p_eps: 0.0, q_eps_integral: 0.0, p0_eps: 0.0, q0_eps_integral: 0.0, h_min: 1.5 });
    let audit = growth_bound_audit(&states, 3.0, 0.1, 1.0).unwrap();
    assert!(audit.worst_slack.is_infinite() && audit.satisfied());
}

#[test]
fn linear_run_monitors_scale_with_amplitude() {
    let g = g1(32);
    let m = model(1.0, 1.0);
    let mono = |amp: f64| {
        let s0 = state(Field::from_fn(g, |x| amp * (2.0 * x[0]).cos()), Field::zeros(g));
        blowup_monitors(&m, &run(&m, &s0, 2e-3, 0.5), 0.1).unwrap()
    };
    let (a, b) = (mono(1e-6), mono(2e-6));
    for (x, y) in [(a.p_eps, b.p_eps), (a.q_eps_integral, b.q_eps_integral), (a.p0_eps, b.p0_eps)] {
        assert!(x > 0.0 && (y / x - 2.0).abs() < 1e-4, "{x} {y}");
    }
    // the first sample is the initial single mode
    let p0 = 1e-6 * 2f64.powf(2.1);
    assert!(a.p_eps >= p0 * (1.0 - 1e-12) && a.p_eps < 1.5 * p0, "{}", a.p_eps);
    assert!(a.q_eps_integral < 0.5 * 1e-6 * (2f64.powf(2.6) + 2.0 * 2.5), "{}", a.q_eps_integral);
}

#[test]
fn holder_ordering_on_sampled_fields() {
    let g = g1(64);
    let m = model(1.0, 1.0);
    for s in run(&m, &smooth(g, 0.05), 1e-3, 0.05).iter().step_by(10) {
        for f in [&s.eta, &s.psi] {
            assert!(zyg(f, 2.1) <= zyg(f, 2.6));
            assert!(b1_vec(std::slice::from_ref(f), 0.0) <= b1_vec(std::slice::from_ref(f), 1.0));
        }
    }
}

#[test]
fn gradient_psi_from_velocities() {
    let g = g1(64);
    let m = model(1.0, 1.0);
    let mut worst: f64 = 0.0;
    for amp in [0.01, 0.03, 0.1] {
        let s = smooth(g, amp);
        let gpsi = m.dn_apply(&s.eta, &s.psi).unwrap();
        let (b, v) = surface_velocities(&s.eta, &s.psi, &gpsi);
        let ge = gradient(&s.eta);
        let rebuilt = &v[0] + &(&b * &ge[0]);
        assert!((&rebuilt - &gradient(&s.psi)[0]).max_abs() < 1e-12);
        let lhs = b1_vec(&gradient(&s.psi), 1.0);
        let rhs = b1_vec(&v, 1.0) + b1_vec(std::slice::from_ref(&b), 1.0) * b1_vec(&ge, 0.0);
        worst = worst.max(lhs / rhs);
        assert!(dot_vec(&v, &v).is_finite());
    }
    assert!(worst <= 2.0, "fitted C = {worst}");
}

#[test]
fn monitors_incremental_match_stored() {
    let g = g1(32);
    let m = model(1.0, 1.0);
    let mut cfg = MonitorConfig::for_dim(1);
    cfg.stride = 5;
    let mut o = EvolveOptions::new(2e-3, 0.1);
    o.keep_states = true;
    let (traj, live) = evolve_monitored(&m, &smooth(g, 0.05), &o, &cfg, &mut |_| {});
    assert!(traj.abort.is_none());
    let stored = DiagnosticsRecord::from_states(&m, &traj.states, &cfg).unwrap();
    assert_eq!(live.samples.len(), 11);
    for (a, b) in live.samples.iter().zip(&stored.samples) {
        for (x, y) in [(a.a, b.a), (a.b, b.b), (a.q_eps, b.q_eps), (a.sobolev, b.sobolev), (a.hamiltonian, b.hamiltonian)] {
            assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0));
        }
    }
    assert!((live.q_int - stored.q_int).abs() <= 1e-10);
    assert!((live.n_rt.last().unwrap() - stored.n_rt.last().unwrap()).abs() <= 1e-10);
}

#[test]
fn running_suprema_are_monotone() {
    let g = g1(32);
    let m = model(1.0, 1.0);
    let rec = DiagnosticsRecord::from_states(&m, &run(&m, &smooth(g, 0.08), 2e-3, 0.2), &MonitorConfig::for_dim(1)).unwrap();
    assert!(rec.m_st.windows(2).all(|w| w[1] >= w[0]));
    assert!(rec.n_rt.windows(2).all(|w| w[1] >= w[0]) && rec.n_rt[0] == 0.0);
    assert!(rec.q_int > 0.0 && rec.q0_int > 0.0 && rec.b_int > 0.0);
    for s in &rec.samples {
        assert!(s.a >= 0.0 && s.b >= 1.0 && s.p_eps >= 0.0 && s.q0_eps >= 0.0 && s.strichartz >= 0.0);
        assert!(s.p_eps <= rec.p_sup && s.h_sep >= rec.h_min);
    }
}

#[test]
fn diagnostics_csv_layout() {
    let g = g1(16);
    let m = model(1.0, 1.0);
    let rec = DiagnosticsRecord::from_states(&m, &[SurfaceState::rest(g)], &MonitorConfig::for_dim(1)).unwrap();
    let mut out = Vec::new();
    rec.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,H,A,B,M_s,N_r,P_eps,Q_eps,P0_eps,Q0_eps,h_sep");
    assert_eq!(lines.len(), 2);
    let b: f64 = lines[1].split(',').nth(3).unwrap().parse().unwrap();
    assert_eq!(b, 1.0);
}

#[test]
fn growth_audit_small_run_has_room() {
    let g = g1(32);
    let m = model(1.0, 1.0);
    let states = run(&m, &smooth(g, 1e-3), 2e-3, 0.5);
    let audit = growth_bound_audit(&states, 3.0, 0.1, 1.0).unwrap();
    assert!(audit.worst_slack > 10.0, "{}", audit.worst_slack);
    assert!(matches!(growth_bound_audit(&states, 2.5, 0.1, 1.0), Err(Error::InvalidParameter(_))));
}

#[test]
fn growth_audit_on_steep_run() {
    let g = g1(32);
    let m = model(1.0, 1.0);
    let s0 = state(Field::from_fn(g, |x| 0.2 * x[0].cos()), Field::from_fn(g, |x| 0.2 * x[0].sin()));
    let states = run(&m, &s0, 2e-3, 0.5);
    assert!(states.len() > 10);
    let audit = growth_bound_audit(&states, 3.0, 0.1, 1.0).unwrap();
    assert!(audit.satisfied(), "{}", audit.worst_slack);
}

#[test]
fn log_interp_single_band() {
    let g = g1(64);
    let u = Field::from_fn(g, |x| (16.0 * x[0]).cos());
    let li = log_interp_check(&u, 2.0).unwrap();
    assert!((li.lhs - 16.0).abs() < 1e-12);
    let h2 = 0.5 * (1.0 + 256.0f64).powi(2);
    assert!((li.rhs - 17.0 * (E + h2).ln()).abs() < 1e-9);
    assert!(li.ratio < 1.0);
    assert_eq!(log_interp_check(&Field::zeros(g), 2.0).unwrap().lhs, 0.0);
    assert!(log_interp_check(&u, 1.5).is_err());
}

#[test]
fn log_interp_constant_is_stable_in_n() {
    let c64 = log_interp_suite(g1(64), 20, 20, 1.0, 2.0, 11).unwrap();
    let c128 = log_interp_suite(g1(128), 20, 20, 1.0, 2.0, 11).unwrap();
    assert!(c64 > 0.0 && c64 < 1.0);
    assert!((c128 / c64 - 1.0).abs() < 0.2, "{c64} {c128}");
}

fn contraction_opts() -> ContractionOptions {
    ContractionOptions { dt: 2e-3, t_end: 0.2, stride: 5, s: 3.0, r: 2.3 }
}

#[test]
fn contraction_of_identical_states() {
    let g = g1(32);
    let s = smooth(g, 0.05);
    let rep = contraction_harness(&model(1.0, 1.0), &s, &s, contraction_opts()).unwrap();
    assert!(rep.p_s.iter().chain(&rep.p_h).all(|&v| v == 0.0));
    assert_eq!((rep.p_t, rep.ratio), (0.0, 0.0));
    assert!(rep.abort.is_none());
}

fn perturbed(s: &SurfaceState, delta: f64) -> SurfaceState {
    let g = s.eta.grid();
    state(&s.eta + &Field::from_fn(g, |x| delta * (3.0 * x[0]).cos()), s.psi.clone())
}

#[test]
fn contraction_ratio_is_lipschitz() {
    let g = g1(32);
    let m = model(1.0, 1.0);
    let s = smooth(g, 0.05);
    let r4 = contraction_harness(&m, &s, &perturbed(&s, 1e-4), contraction_opts()).unwrap().ratio;
    let r5 = contraction_harness(&m, &s, &perturbed(&s, 1e-5), contraction_opts()).unwrap().ratio;
    assert!(r4 > 0.0 && (r4 / r5).max(r5 / r4) < 2.0, "{r4} {r5}");
}

#[test]
fn contraction_initial_norm_of_high_mode() {
    let g = g1(32);
    let s = smooth(g, 0.05);
    let d = 1e-5;
    let other = state(&s.eta + &Field::from_fn(g, |x| d * (10.0 * x[0]).cos()), s.psi.clone());
    let rep = contraction_harness(&model(1.0, 1.0), &s, &other, contraction_opts()).unwrap();
    let expect = d / 2f64.sqrt() * 101f64.powf(1.0);
    assert!((rep.p_s[0] / expect - 1.0).abs() < 1e-9, "{} vs {expect}", rep.p_s[0]);
}

#[test]
fn contraction_is_translation_invariant() {
    let g = g1(32);
    let m = model(1.0, 1.0);
    let s = smooth(g, 0.05);
    let p = perturbed(&s, 1e-4);
    let shift = |u: &SurfaceState| state(u.eta.shift_nodes([5, 0]), u.psi.shift_nodes([5, 0]));
    let a = contraction_harness(&m, &s, &p, contraction_opts()).unwrap().ratio;
    let b = contraction_harness(&m, &shift(&s), &shift(&p), contraction_opts()).unwrap().ratio;
    assert!((a - b).abs() <= 1e-9 * a, "{a} {b}");
}

#[test]
fn contraction_checks_exponents() {
    let g = g1(16);
    let s = SurfaceState::rest(g);
    let mut o = contraction_opts();
    o.r = 2.7;
    assert!(matches!(contraction_harness(&model(1.0, 1.0), &s, &s, o), Err(Error::InvalidParameter(_))));
}

#[test]
fn contraction_csv_layout() {
    let rep = ContractionReport { times: vec![0.0], p_s: vec![1.0], p_h: vec![2.0], ..Default::default() };
    let mut out = Vec::new();
    rep.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().next(), Some("t,P_S,P_H"));
    assert_eq!(text.lines().count(), 2);
}
