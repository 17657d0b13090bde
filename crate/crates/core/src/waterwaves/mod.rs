//! Gravity–capillary water waves in Zakharov/Craig–Sulem form:
//! `η_t = G(η)ψ`, `ψ_t = −gη − H(η) − ½|∇ψ|² + ½(∇η·∇ψ + G(η)ψ)²/(1+|∇η|²)`.

use crate::dn::{DnConfig, DnSolver};
use crate::error::{Error, Result};
use crate::spectral::{dealias, divergence, dot_vec, gradient, norm_sqr_vec, Field, C64};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalParams {
    pub g: f64,
    pub h: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        PhysicalParams { g: 1.0, h: 1.0 }
    }
}

#[derive(Clone, Debug)]
pub struct SurfaceState {
    pub t: f64,
    pub eta: Field,
    pub psi: Field,
}

impl SurfaceState {
    pub fn new(eta: Field, psi: Field) -> Result<SurfaceState> {
        eta.grid().check_same(&psi.grid())?;
        if !eta.is_real() || !psi.is_real() {
            return Err(Error::InvalidParameter("surface state must be real".into()));
        }
        Ok(SurfaceState { t: 0.0, eta, psi })
    }

    pub fn rest(grid: crate::Grid) -> SurfaceState {
        SurfaceState { t: 0.0, eta: Field::zeros(grid), psi: Field::zeros(grid) }
    }

    pub fn is_finite(&self) -> bool {
        self.eta.is_finite() && self.psi.is_finite()
    }
}

/// Which algebraically equivalent form of `ψ_t` is integrated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RhsForm {
    /// The Craig–Sulem form above.
    Zakharov,
    /// `η_t = B − V·∇η`, `ψ_t = −V·∇ψ − gη + ½|V|² + ½B² − H(η)`.
    Velocity,
    /// `ψ_t = −gη − H(η) − ½∂_η⟨ψ, G_h(η)ψ⟩` with the exact gradient of the
    /// discrete strip energy, so the semi-discrete flow conserves the
    /// discrete Hamiltonian.
    Variational,
}

/// `B = (∇η·∇ψ + Gψ)/(1+|∇η|²)`, `V = ∇ψ − B∇η`.
pub fn surface_velocities(eta: &Field, psi: &Field, gpsi: &Field) -> (Field, Vec<Field>) {
    let ge = gradient(eta);
    let gp = gradient(psi);
    let num = &dot_vec(&ge, &gp) + gpsi;
    let den = &Field::constant(eta.grid(), 1.0) + &norm_sqr_vec(&ge);
    let b = Field::from_real(eta.grid(), num.re().iter().zip(den.re()).map(|(n, d)| n / d).collect());
    let v = gp.iter().zip(&ge).map(|(p, e)| p - &(&b * e)).collect();
    (b, v)
}

/// `H(η) = −div(∇η/√(1+|∇η|²))`, dealiased.
pub fn mean_curvature(eta: &Field) -> Field {
    dealias(&curvature_raw(eta))
}

fn curvature_raw(eta: &Field) -> Field {
    let ge = gradient(eta);
    let s = norm_sqr_vec(&ge).map(|v| 1.0 / (1.0 + v).sqrt());
    let flux: Vec<Field> = ge.iter().map(|c| c * &s).collect();
    -&divergence(&flux)
}

#[derive(Clone, Debug)]
pub struct WaveModel {
    pub params: PhysicalParams,
    pub dn: DnConfig,
    pub form: RhsForm,
    /// CFL constant `c` in `dt ≤ c·Δx^{3/2}`.
    pub cfl: f64,
    /// 2/3-rule truncation of every right-hand side.
    pub dealias: bool,
}

impl WaveModel {
    pub fn new(params: PhysicalParams, dn: DnConfig) -> Result<WaveModel> {
        if !(params.h > 0.0) || !(params.g >= 0.0) {
            return Err(Error::InvalidParameter(format!("need h > 0 and g >= 0, got {params:?}")));
        }
        Ok(WaveModel { params, dn: DnConfig { h: params.h, ..dn }, form: RhsForm::Zakharov, cfl: 1.0, dealias: true })
    }

    /// Strip resolution tied to the grid, `M = N`.
    pub fn for_grid(params: PhysicalParams, grid: crate::Grid) -> Result<WaveModel> {
        WaveModel::new(params, DnConfig::default().with_m(grid.n()))
    }

    pub fn with_form(mut self, form: RhsForm) -> WaveModel {
        self.form = form;
        self
    }

    pub fn with_dealias(mut self, on: bool) -> WaveModel {
        self.dealias = on;
        self
    }

    fn finish(&self, f: &Field) -> Field {
        if self.dealias { dealias(f) } else { f.clone() }
    }

    pub fn solver(&self, eta: &Field) -> Result<DnSolver> {
        DnSolver::new(eta, self.dn)
    }

    fn check_state(&self, s: &SurfaceState) -> Result<()> {
        if !s.is_finite() {
            return Err(Error::Aborted { t: s.t, reason: "non-finite field".into() });
        }
        let gap = s.eta.min_re() + self.params.h;
        if gap <= 0.0 {
            return Err(Error::Aborted { t: s.t, reason: format!("surface reached the bottom (min eta + h = {gap:.3e})") });
        }
        Ok(())
    }

    pub fn dn_apply(&self, eta: &Field, f: &Field) -> Result<Field> {
        self.solver(eta)?.apply(f)
    }

    pub fn compute_bv(&self, s: &SurfaceState) -> Result<(Field, Vec<Field>)> {
        let gpsi = self.dn_apply(&s.eta, &s.psi)?;
        Ok(surface_velocities(&s.eta, &s.psi, &gpsi))
    }

    /// `(η_t, ψ_t)` in the model's configured form.
    pub fn rhs(&self, s: &SurfaceState) -> Result<(Field, Field)> {
        match self.form {
            RhsForm::Zakharov => self.rhs_zakharov(s),
            RhsForm::Velocity => self.rhs_alt(s),
            RhsForm::Variational => self.rhs_variational(s),
        }
    }

    pub fn rhs_zakharov(&self, s: &SurfaceState) -> Result<(Field, Field)> {
        self.check_state(s)?;
        let gpsi = self.dn_apply(&s.eta, &s.psi)?;
        Ok(self.zakharov_from(s, &gpsi))
    }

    fn zakharov_from(&self, s: &SurfaceState, gpsi: &Field) -> (Field, Field) {
        let ge = gradient(&s.eta);
        let gp = gradient(&s.psi);
        let w = &Field::constant(s.eta.grid(), 1.0) + &norm_sqr_vec(&ge);
        let num = &dot_vec(&ge, &gp) + gpsi;
        let quad = Field::from_real(
            s.eta.grid(),
            num.re().iter().zip(w.re()).map(|(n, d)| 0.5 * n * n / d).collect(),
        );
        let psi_t = &(&(&(-&s.eta.scale(self.params.g)) - &curvature_raw(&s.eta)) - &norm_sqr_vec(&gp).scale(0.5)) + &quad;
        (self.finish(gpsi), self.finish(&psi_t))
    }

    pub fn rhs_alt(&self, s: &SurfaceState) -> Result<(Field, Field)> {
        self.check_state(s)?;
        let gpsi = self.dn_apply(&s.eta, &s.psi)?;
        let (b, v) = surface_velocities(&s.eta, &s.psi, &gpsi);
        let ge = gradient(&s.eta);
        let gp = gradient(&s.psi);
        let eta_t = &b - &dot_vec(&v, &ge);
        let psi_t = &(&(&(&(-&dot_vec(&v, &gp)) - &s.eta.scale(self.params.g)) + &norm_sqr_vec(&v).scale(0.5))
            + &(&b * &b).scale(0.5))
            - &curvature_raw(&s.eta);
        Ok((self.finish(&eta_t), self.finish(&psi_t)))
    }

    pub fn rhs_variational(&self, s: &SurfaceState) -> Result<(Field, Field)> {
        self.check_state(s)?;
        let solver = self.solver(&s.eta)?;
        let lift = solver.solve_harmonic(&s.psi)?;
        let gpsi = solver.trace(&lift);
        let grad = solver.energy_gradient(&lift);
        let psi_t = &(&(-&s.eta.scale(self.params.g)) - &curvature_raw(&s.eta)) - &grad;
        Ok((self.finish(&gpsi), self.finish(&psi_t)))
    }

    /// `½∫ψG(η)ψ + (g/2)∫η² + ∫(√(1+|∇η|²) − 1)`.
    pub fn hamiltonian(&self, s: &SurfaceState) -> Result<f64> {
        let gpsi = self.dn_apply(&s.eta, &s.psi)?;
        Ok(self.hamiltonian_with(s, &gpsi))
    }

    fn hamiltonian_with(&self, s: &SurfaceState, gpsi: &Field) -> f64 {
        let kinetic = 0.5 * (&s.psi * gpsi).integral();
        let potential = 0.5 * self.params.g * (&s.eta * &s.eta).integral();
        let surface = norm_sqr_vec(&gradient(&s.eta)).map(|v| (1.0 + v).sqrt() - 1.0).integral();
        kinetic + potential + surface
    }

    pub fn cfl_limit(&self, grid: crate::Grid) -> f64 {
        self.cfl * grid.dx().powf(1.5)
    }

    pub fn step_rk4(&self, s: &SurfaceState, dt: f64) -> Result<SurfaceState> {
        let limit = self.cfl_limit(s.eta.grid());
        if !(dt > 0.0) || dt > limit {
            return Err(Error::Cfl { dt, limit });
        }
        let stage = |base: &SurfaceState, k: &(Field, Field), c: f64| SurfaceState {
            t: base.t + c * dt,
            eta: &base.eta + &k.0.scale(c * dt),
            psi: &base.psi + &k.1.scale(c * dt),
        };
        let k1 = self.rhs(s)?;
        let k2 = self.rhs(&stage(s, &k1, 0.5))?;
        let k3 = self.rhs(&stage(s, &k2, 0.5))?;
        let k4 = self.rhs(&stage(s, &k3, 1.0))?;
        let comb = |a: &Field, b: &Field, c: &Field, d: &Field| {
            &(&(a + &b.scale(2.0)) + &c.scale(2.0)) + d
        };
        let next = SurfaceState {
            t: s.t + dt,
            eta: &s.eta + &comb(&k1.0, &k2.0, &k3.0, &k4.0).scale(dt / 6.0),
            psi: &s.psi + &comb(&k1.1, &k2.1, &k3.1, &k4.1).scale(dt / 6.0),
        };
        self.check_state(&next)?;
        Ok(next)
    }

    /// Integrates to `opts.t_end`, sampling every `opts.stride` steps. A
    /// failing step ends the run and is reported in the record.
    pub fn evolve(
        &self,
        initial: &SurfaceState,
        opts: &EvolveOptions,
        observer: &mut dyn FnMut(&SurfaceState),
    ) -> TrajectoryRecord {
        let mut rec = TrajectoryRecord::default();
        let steps = ((opts.t_end - initial.t) / opts.dt).round().max(0.0) as usize;
        let mut s = initial.clone();
        let stride = opts.stride.max(1);
        let mut sample = |s: &SurfaceState, rec: &mut TrajectoryRecord| -> Result<()> {
            let h = if opts.track_hamiltonian { self.hamiltonian(s)? } else { f64::NAN };
            rec.samples.push(Sample {
                t: s.t,
                hamiltonian: h,
                mass: s.eta.integral(),
                eta_rms: s.eta.rms(),
                psi_rms: s.psi.rms(),
            });
            if opts.keep_states {
                rec.states.push(s.clone());
            }
            observer(s);
            Ok(())
        };
        if let Err(e) = sample(&s, &mut rec) {
            rec.abort = Some(Abort { t: s.t, last_good_t: s.t, reason: e.to_string() });
            return rec;
        }
        for n in 1..=steps {
            let result = self.step_rk4(&s, opts.dt).and_then(|next| {
                if n % stride == 0 || n == steps {
                    sample(&next, &mut rec)?;
                }
                Ok(next)
            });
            match result {
                Ok(next) => {
                    s = next;
                    rec.steps = n;
                }
                Err(e) => {
                    rec.abort = Some(Abort { t: s.t + opts.dt, last_good_t: s.t, reason: e.to_string() });
                    break;
                }
            }
        }
        rec.last = Some(s);
        rec
    }
}

#[derive(Clone, Debug)]
pub struct EvolveOptions {
    pub dt: f64,
    pub t_end: f64,
    pub stride: usize,
    pub keep_states: bool,
    /// Evaluate `H` at each sample (one extra strip solve per sample).
    pub track_hamiltonian: bool,
}

impl EvolveOptions {
    pub fn new(dt: f64, t_end: f64) -> EvolveOptions {
        EvolveOptions { dt, t_end, stride: 1, keep_states: false, track_hamiltonian: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub hamiltonian: f64,
    pub mass: f64,
    pub eta_rms: f64,
    pub psi_rms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Abort {
    pub t: f64,
    pub last_good_t: f64,
    pub reason: String,
}

#[derive(Clone, Debug, Default)]
pub struct TrajectoryRecord {
    pub samples: Vec<Sample>,
    pub states: Vec<SurfaceState>,
    pub steps: usize,
    pub abort: Option<Abort>,
    pub last: Option<SurfaceState>,
}

impl TrajectoryRecord {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// `max_t |H(t) − H(0)| / |H(0)|`; NaN when `H` was not tracked.
    pub fn relative_drift(&self) -> f64 {
        let h0 = match self.samples.first() {
            Some(s) => s.hamiltonian,
            None => return 0.0,
        };
        let d = self.samples.iter().map(|s| (s.hamiltonian - h0).abs()).fold(0.0, f64::max);
        if h0 == 0.0 { d } else { d / h0.abs() }
    }
}

/// `ω(k) = √((g+k²) k tanh(hk))`.
pub fn linear_frequency(k: f64, p: PhysicalParams) -> f64 {
    ((p.g + k * k) * k * (p.h * k).tanh()).sqrt()
}

/// Exact per-mode solution of `η̂_t = k tanh(hk) ψ̂`, `ψ̂_t = −(g+k²) η̂`.
pub fn linear_reference(k: f64, p: PhysicalParams, eta0: C64, psi0: C64, t: f64) -> Result<(C64, C64)> {
    if k == 0.0 {
        return Err(Error::InvalidParameter("linear reference needs k != 0".into()));
    }
    let k = k.abs();
    let w = linear_frequency(k, p);
    let (c, s) = ((w * t).cos(), (w * t).sin());
    let a = k * (p.h * k).tanh();
    let b = p.g + k * k;
    Ok((eta0 * c + psi0 * (a / w) * s, psi0 * c - eta0 * (b / w) * s))
}

/// Applies the linear flow to every mode of a state.
pub fn linear_evolve(s: &SurfaceState, p: PhysicalParams, t: f64) -> SurfaceState {
    let g = s.eta.grid();
    let (ec, pc) = (s.eta.coeffs(), s.psi.coeffs());
    let mut eo = vec![C64::default(); g.len()];
    let mut po = vec![C64::default(); g.len()];
    for i in 0..g.len() {
        let k = g.abs_freq(i);
        if k == 0.0 {
            eo[i] = ec[i];
            po[i] = pc[i] - ec[i] * p.g * t;
        } else {
            let (e, q) = linear_reference(k, p, ec[i], pc[i], t).expect("nonzero mode");
            eo[i] = e;
            po[i] = q;
        }
    }
    SurfaceState {
        t: s.t + t,
        eta: Field::from_coeffs(g, eo, true),
        psi: Field::from_coeffs(g, po, true),
    }
}

/// Angular frequency from sign changes of a sampled signal, using linear
/// interpolation of the crossing times. `None` with fewer than two crossings.
pub fn zero_crossing_frequency(times: &[f64], values: &[f64]) -> Option<f64> {
    let mut crossings = Vec::new();
    for i in 1..values.len().min(times.len()) {
        let (a, b) = (values[i - 1], values[i]);
        if (a < 0.0 && b >= 0.0) || (a > 0.0 && b <= 0.0) {
            if b == 0.0 && i + 1 < values.len() && values[i + 1].signum() == a.signum() {
                continue;
            }
            let f = a / (a - b);
            crossings.push(times[i - 1] + f * (times[i] - times[i - 1]));
        }
    }
    if crossings.len() < 2 {
        return None;
    }
    let span = crossings[crossings.len() - 1] - crossings[0];
    Some(std::f64::consts::PI * (crossings.len() - 1) as f64 / span)
}
