//! Hölder and Sobolev monitors along trajectories: `𝔄`, `𝔅`, the blow-up
//! quantities `P_ε`, `Q_ε`, the double-exponential growth audit, the
//! logarithmic interpolation inequality and the two-solution contraction
//! harness.

use std::f64::consts::E;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lp::{besov_norm, besov_norm_vec, BesovSpec};
use crate::spectral::{gradient, sobolev_norm, Field, Grid};
use crate::waterwaves::{surface_velocities, Abort, EvolveOptions, SurfaceState, WaveModel};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActiveMonitors {
    /// `𝔄`, `𝔅` and the Hamiltonian.
    pub ab: bool,
    /// `M_{s,t}` and `N_{r,t}`.
    pub norms: bool,
    /// `P_ε`, `Q_ε`, `P⁰_ε`, `Q⁰_ε`.
    pub blowup: bool,
}

impl Default for ActiveMonitors {
    fn default() -> Self {
        ActiveMonitors { ab: true, norms: true, blowup: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonitorConfig {
    pub s: f64,
    pub r: f64,
    pub eps_star: f64,
    pub eps: f64,
    /// Steps between samples.
    pub stride: usize,
    pub active: ActiveMonitors,
}

impl MonitorConfig {
    /// `s = 3, r = 2.3` in one dimension and `s = 3.5, r = 2.4` in two, both
    /// inside `2 < r < s − d/2 + μ`.
    pub fn for_dim(dim: usize) -> MonitorConfig {
        let (s, r) = if dim == 1 { (3.0, 2.3) } else { (3.5, 2.4) };
        MonitorConfig { s, r, eps_star: 0.1, eps: 0.1, stride: 1, active: ActiveMonitors::default() }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let d = dim as f64;
        if !(self.s > 1.5 + d / 2.0) {
            return Err(Error::InvalidParameter(format!("s = {} must exceed {}", self.s, 1.5 + d / 2.0)));
        }
        if !(self.r > 2.0) {
            return Err(Error::InvalidParameter(format!("r = {} must exceed 2", self.r)));
        }
        if !(self.eps_star > 0.0) || !(self.eps > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "eps_star = {} and eps = {} must be positive",
                self.eps_star, self.eps
            )));
        }
        if self.stride == 0 {
            return Err(Error::InvalidParameter("stride must be at least 1".into()));
        }
        Ok(())
    }
}

/// Gain exponent and time integrability `(μ, p)` of the flow map:
/// `(3/20, 4)` for `d = 1`, `(3/10, 2)` otherwise.
pub fn gain_exponents(dim: usize) -> (f64, f64) {
    if dim == 1 { (0.15, 4.0) } else { (0.3, 2.0) }
}

fn zyg(u: &Field, s: f64) -> f64 {
    besov_norm(u, BesovSpec::zygmund(s))
}

fn zyg_vec(u: &[Field], s: f64) -> f64 {
    besov_norm_vec(u, BesovSpec::zygmund(s))
}

fn b1_vec(u: &[Field], s: f64) -> f64 {
    besov_norm_vec(u, BesovSpec::b1(s))
}

/// `√∫ψG(η)ψ`, the Dirichlet energy of the harmonic extension.
fn energy(psi: &Field, gpsi: &Field) -> f64 {
    psi.dot(gpsi).max(0.0).sqrt()
}

fn ab_with(eta: &Field, psi: &Field, gpsi: &Field, eps_star: f64) -> (f64, f64) {
    let gp = gradient(psi);
    let a = zyg(eta, 2.0 + eps_star) + sobolev_norm(eta, 0.0) + b1_vec(&gp, 0.0) + energy(psi, gpsi);
    let b = zyg(eta, 2.5 + eps_star) + b1_vec(&gp, 1.0) + 1.0;
    (a, b)
}

/// `(𝔄, 𝔅)` at one state.
pub fn monitor_ab(model: &WaveModel, state: &SurfaceState, eps_star: f64) -> Result<(f64, f64)> {
    let gpsi = model.dn_apply(&state.eta, &state.psi)?;
    Ok(ab_with(&state.eta, &state.psi, &gpsi, eps_star))
}

/// Monitors at one sampled state. Inactive groups are NaN.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub hamiltonian: f64,
    pub a: f64,
    pub b: f64,
    /// `‖η‖_{H^{s+1/2}} + ‖ψ‖_{H^s}`.
    pub sobolev: f64,
    /// `‖η‖_{C^{r+1/2}_*} + ‖∇ψ‖_{𝔹¹}`, the integrand of `N_{r,t}`.
    pub strichartz: f64,
    /// `‖η‖_{C^{2+ε}_*} + ‖∇ψ‖_{𝔹⁰}`.
    pub p_eps: f64,
    /// `‖η‖_{C^{5/2+ε}_*} + ‖∇ψ‖_{C¹_*}`.
    pub q_eps: f64,
    /// `‖η‖_{C^{2+ε}_*} + ‖(V, B)‖_{𝔹⁰}`.
    pub p0_eps: f64,
    /// `‖η‖_{C^{5/2+ε}_*} + ‖(V, B)‖_{C¹_*}`.
    pub q0_eps: f64,
    /// `min η + h`.
    pub h_sep: f64,
}

pub fn snapshot(model: &WaveModel, state: &SurfaceState, cfg: &MonitorConfig) -> Result<Snapshot> {
    let (eta, psi) = (&state.eta, &state.psi);
    let gpsi = model.dn_apply(eta, psi)?;
    let gp = gradient(psi);
    let act = cfg.active;
    let mut snap = Snapshot {
        t: state.t,
        hamiltonian: f64::NAN,
        a: f64::NAN,
        b: f64::NAN,
        sobolev: f64::NAN,
        strichartz: f64::NAN,
        p_eps: f64::NAN,
        q_eps: f64::NAN,
        p0_eps: f64::NAN,
        q0_eps: f64::NAN,
        h_sep: eta.min_re() + model.params.h,
    };
    if act.ab {
        snap.hamiltonian = model.hamiltonian(state)?;
        (snap.a, snap.b) = ab_with(eta, psi, &gpsi, cfg.eps_star);
    }
    if act.norms {
        snap.sobolev = sobolev_norm(eta, cfg.s + 0.5) + sobolev_norm(psi, cfg.s);
        snap.strichartz = zyg(eta, cfg.r + 0.5) + b1_vec(&gp, 1.0);
    }
    if act.blowup {
        let (b, mut vb) = surface_velocities(eta, psi, &gpsi);
        vb.push(b);
        let (e2, e52) = (zyg(eta, 2.0 + cfg.eps), zyg(eta, 2.5 + cfg.eps));
        snap.p_eps = e2 + b1_vec(&gp, 0.0);
        snap.q_eps = e52 + zyg_vec(&gp, 1.0);
        snap.p0_eps = e2 + b1_vec(&vb, 0.0);
        snap.q0_eps = e52 + zyg_vec(&vb, 1.0);
    }
    Ok(snap)
}

/// Per-sample monitors with running suprema and trapezoid time integrals.
#[derive(Clone, Debug, Default)]
pub struct DiagnosticsRecord {
    pub samples: Vec<Snapshot>,
    /// `M_{s,t}`, running supremum of [`Snapshot::sobolev`].
    pub m_st: Vec<f64>,
    /// `N_{r,t}`, running integral of [`Snapshot::strichartz`].
    pub n_rt: Vec<f64>,
    pub p_sup: f64,
    pub q_int: f64,
    pub p0_sup: f64,
    pub q0_int: f64,
    pub a_sup: f64,
    pub b_int: f64,
    pub h_min: f64,
}

fn nan_max(a: f64, b: f64) -> f64 {
    if b.is_nan() { a } else { a.max(b) }
}

fn trapezoid(dt: f64, a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() { 0.0 } else { 0.5 * dt * (a + b) }
}

impl DiagnosticsRecord {
    pub fn new() -> DiagnosticsRecord {
        DiagnosticsRecord { h_min: f64::INFINITY, ..Default::default() }
    }

    pub fn push(&mut self, s: Snapshot) {
        match self.samples.last().copied() {
            None => {
                self.m_st.push(nan_max(0.0, s.sobolev));
                self.n_rt.push(0.0);
            }
            Some(prev) => {
                let dt = s.t - prev.t;
                self.m_st.push(nan_max(*self.m_st.last().unwrap(), s.sobolev));
                self.n_rt.push(self.n_rt.last().unwrap() + trapezoid(dt, prev.strichartz, s.strichartz));
                self.q_int += trapezoid(dt, prev.q_eps, s.q_eps);
                self.q0_int += trapezoid(dt, prev.q0_eps, s.q0_eps);
                self.b_int += trapezoid(dt, prev.b, s.b);
            }
        }
        self.p_sup = nan_max(self.p_sup, s.p_eps);
        self.p0_sup = nan_max(self.p0_sup, s.p0_eps);
        self.a_sup = nan_max(self.a_sup, s.a);
        self.h_min = self.h_min.min(s.h_sep);
        self.samples.push(s);
    }

    /// Recomputes every monitor from stored snapshots.
    pub fn from_states(model: &WaveModel, states: &[SurfaceState], cfg: &MonitorConfig) -> Result<DiagnosticsRecord> {
        let mut rec = DiagnosticsRecord::new();
        for s in states {
            rec.push(snapshot(model, s, cfg)?);
        }
        Ok(rec)
    }

    pub fn blowup(&self) -> BlowupMonitors {
        BlowupMonitors {
            p_eps: self.p_sup,
            q_eps_integral: self.q_int,
            p0_eps: self.p0_sup,
            q0_eps_integral: self.q0_int,
            h_min: self.h_min,
        }
    }

    /// Columns `t,H,A,B,M_s,N_r,P_eps,Q_eps,P0_eps,Q0_eps,h_sep`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,H,A,B,M_s,N_r,P_eps,Q_eps,P0_eps,Q0_eps,h_sep")?;
        for (i, s) in self.samples.iter().enumerate() {
            let row = [
                s.t,
                s.hamiltonian,
                s.a,
                s.b,
                self.m_st[i],
                self.n_rt[i],
                s.p_eps,
                s.q_eps,
                s.p0_eps,
                s.q0_eps,
                s.h_sep,
            ];
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// `(P_ε, ∫Q_ε, P⁰_ε, ∫Q⁰_ε, h_min)` of a sampled trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlowupMonitors {
    pub p_eps: f64,
    pub q_eps_integral: f64,
    pub p0_eps: f64,
    pub q0_eps_integral: f64,
    pub h_min: f64,
}

pub fn blowup_monitors(model: &WaveModel, states: &[SurfaceState], eps: f64) -> Result<BlowupMonitors> {
    let mut cfg = MonitorConfig::for_dim(1);
    cfg.eps = eps;
    cfg.active = ActiveMonitors { ab: false, norms: false, blowup: true };
    Ok(DiagnosticsRecord::from_states(model, states, &cfg)?.blowup())
}

/// Runs `model.evolve` and samples the monitors on the fly every
/// `cfg.stride` steps. A failing monitor evaluation stops the sampling and
/// is reported as the abort of the trajectory unless the evolution itself
/// failed first.
pub fn evolve_monitored(
    model: &WaveModel,
    initial: &SurfaceState,
    opts: &EvolveOptions,
    cfg: &MonitorConfig,
    observer: &mut dyn FnMut(&SurfaceState),
) -> (crate::waterwaves::TrajectoryRecord, DiagnosticsRecord) {
    let mut rec = DiagnosticsRecord::new();
    let mut failed: Option<Abort> = None;
    let mut o = opts.clone();
    o.stride = cfg.stride;
    let mut traj = model.evolve(initial, &o, &mut |s| {
        if failed.is_none() {
            match snapshot(model, s, cfg) {
                Ok(snap) => rec.push(snap),
                Err(e) => {
                    let last_good_t = rec.samples.last().map_or(s.t, |x| x.t);
                    failed = Some(Abort { t: s.t, last_good_t, reason: format!("monitor: {e}") });
                }
            }
        }
        observer(s);
    });
    if traj.abort.is_none() {
        traj.abort = failed;
    }
    (traj, rec)
}

/// Pointwise audit of the double-exponential growth bound
/// `M²_{σ,t} ≤ F(P²)(M²_{σ,0} + 2e)·exp(exp(∫₀ᵗQ)) − 2e` with `F` a single
/// constant fixed by equality at `t = 0` and multiplied by `factor`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrowthAudit {
    pub sigma: f64,
    pub f_constant: f64,
    pub times: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    /// `min_{t>0} rhs/lhs`; infinite when the left side vanishes throughout.
    /// The initial sample is excluded since it fixes `F` with equality.
    pub worst_slack: f64,
}

impl GrowthAudit {
    pub const NOTE: &'static str =
        "consistency audit with a fitted scalar F; not a certified bound";

    pub fn satisfied(&self) -> bool {
        self.worst_slack >= 1.0
    }
}

pub fn growth_bound_audit(
    states: &[SurfaceState],
    sigma: f64,
    eps_star: f64,
    factor: f64,
) -> Result<GrowthAudit> {
    let Some(first) = states.first() else {
        return Err(Error::InvalidParameter("growth audit needs at least one state".into()));
    };
    let d = first.eta.grid().dim() as f64;
    if !(sigma > 2.0 + d / 2.0) {
        return Err(Error::InvalidParameter(format!("sigma = {sigma} must exceed {}", 2.0 + d / 2.0)));
    }
    let m2 = |s: &SurfaceState| (sobolev_norm(&s.eta, sigma + 0.5) + sobolev_norm(&s.psi, sigma)).powi(2);
    let q = |s: &SurfaceState| 1.0 + zyg_vec(&gradient(&s.psi), 1.0) + zyg(&s.eta, 2.0 + eps_star);
    let m0 = m2(first);
    let f_constant = factor / E;
    let (mut times, mut lhs, mut rhs) = (vec![], vec![], vec![]);
    let mut sup: f64 = 0.0;
    let mut q_int = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    let mut worst = f64::INFINITY;
    for s in states {
        let qs = q(s);
        if let Some((tp, qp)) = prev {
            q_int += 0.5 * (s.t - tp) * (qp + qs);
        }
        prev = Some((s.t, qs));
        sup = sup.max(m2(s));
        let bound = f_constant * (m0 + 2.0 * E) * q_int.exp().exp() - 2.0 * E;
        if sup > 0.0 && s.t > first.t {
            worst = worst.min(bound / sup);
        }
        times.push(s.t);
        lhs.push(sup);
        rhs.push(bound);
    }
    Ok(GrowthAudit { sigma, f_constant, times, lhs, rhs, worst_slack: worst })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogInterp {
    /// `‖u‖_{𝔹¹}`.
    pub lhs: f64,
    /// `(1 + ‖u‖_{C¹_*})·ln(e + ‖u‖²_{H^μ})`.
    pub rhs: f64,
    pub ratio: f64,
}

pub fn log_interp_check(u: &Field, mu: f64) -> Result<LogInterp> {
    let d = u.grid().dim() as f64;
    if !(mu > 1.0 + d / 2.0) {
        return Err(Error::InvalidParameter(format!("mu = {mu} must exceed {}", 1.0 + d / 2.0)));
    }
    let lhs = besov_norm(u, BesovSpec::b1(1.0));
    let rhs = (1.0 + zyg(u, 1.0)) * (E + sobolev_norm(u, mu).powi(2)).ln();
    Ok(LogInterp { lhs, rhs, ratio: lhs / rhs })
}

/// Largest ratio over `count` random fields with modes up to `kmax` and
/// amplitudes decaying like `k^{-decay}`; the fields do not depend on `N`
/// once `N > 2·kmax`.
pub fn log_interp_suite(grid: Grid, count: usize, kmax: usize, decay: f64, mu: f64, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let modes: Vec<(f64, f64, f64)> = (1..=kmax)
            .map(|k| {
                let k = k as f64;
                (k, rng.gen_range(-1.0..1.0) * k.powf(-decay), rng.gen_range(0.0..std::f64::consts::TAU))
            })
            .collect();
        let u = Field::from_fn(grid, |x| modes.iter().map(|(k, a, ph)| a * (k * x[0] + ph).cos()).sum());
        worst = worst.max(log_interp_check(&u, mu)?.ratio);
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContractionOptions {
    pub dt: f64,
    pub t_end: f64,
    pub stride: usize,
    pub s: f64,
    pub r: f64,
}

#[derive(Clone, Debug, Default)]
pub struct ContractionReport {
    pub times: Vec<f64>,
    /// `‖δη‖_{H^{s−1}} + ‖δψ‖_{H^{s−3/2}}`.
    pub p_s: Vec<f64>,
    /// `‖δη‖_{C^{r−1}_*} + ‖δψ‖_{C^{r−3/2}_*}`.
    pub p_h: Vec<f64>,
    /// `sup P_S + ‖P_H‖_{L^p_t}`.
    pub p_t: f64,
    pub ratio: f64,
    pub abort: Option<Abort>,
}

impl ContractionReport {
    /// Columns `t,P_S,P_H`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,P_S,P_H")?;
        for i in 0..self.times.len() {
            writeln!(w, "{:.12e},{:.12e},{:.12e}", self.times[i], self.p_s[i], self.p_h[i])?;
        }
        Ok(())
    }
}

/// Evolves both states side by side and measures their difference.
pub fn contraction_harness(
    model: &WaveModel,
    first: &SurfaceState,
    second: &SurfaceState,
    opts: ContractionOptions,
) -> Result<ContractionReport> {
    first.eta.grid().check_same(&second.eta.grid())?;
    let dim = first.eta.grid().dim();
    let (mu, p) = gain_exponents(dim);
    let d = dim as f64;
    if !(opts.r > 2.0 && opts.r < opts.s - d / 2.0 + mu) {
        return Err(Error::InvalidParameter(format!(
            "need 2 < r < s - d/2 + mu, got r = {}, s = {}, mu = {mu}",
            opts.r, opts.s
        )));
    }
    let mut eo = EvolveOptions::new(opts.dt, opts.t_end);
    eo.stride = opts.stride.max(1);
    eo.keep_states = true;
    eo.track_hamiltonian = false;
    let (ra, rb) = std::thread::scope(|sc| {
        let ha = sc.spawn(|| model.evolve(first, &eo, &mut |_| {}));
        let rb = model.evolve(second, &eo, &mut |_| {});
        (ha.join().expect("evolution thread panicked"), rb)
    });
    let mut rep = ContractionReport { abort: ra.abort.clone().or_else(|| rb.abort.clone()), ..Default::default() };
    for (a, b) in ra.states.iter().zip(&rb.states) {
        let de = &a.eta - &b.eta;
        let dp = &a.psi - &b.psi;
        rep.times.push(a.t);
        rep.p_s.push(sobolev_norm(&de, opts.s - 1.0) + sobolev_norm(&dp, opts.s - 1.5));
        rep.p_h.push(zyg(&de, opts.r - 1.0) + zyg(&dp, opts.r - 1.5));
    }
    let sup = rep.p_s.iter().copied().fold(0.0, f64::max);
    let mut lp = 0.0;
    for i in 1..rep.times.len() {
        lp += 0.5 * (rep.times[i] - rep.times[i - 1]) * (rep.p_h[i].powf(p) + rep.p_h[i - 1].powf(p));
    }
    rep.p_t = sup + lp.powf(1.0 / p);
    let p0 = rep.p_s.first().copied().unwrap_or(0.0);
    rep.ratio = if p0 > 0.0 { rep.p_t / p0 } else { 0.0 };
    Ok(rep)
}

#[cfg(test)]
mod tests;
