//! Good unknown, paralinearized residuals, the complex unknown
//! `Φ = T_pη + iT_qU` and its weighted energy `φ = T_℘Φ`.

use std::io::Write;
use std::ops::RangeInclusive;

use crate::error::{Error, Result};
use crate::lp::paraproduct;
use crate::paradiff::{build_symbol, order_probe, quantize, quantize_adjoint, OrderFit, Symbol, SymbolKind, SymbolParams};
use crate::spectral::{dot_vec, gradient, norm_sqr_vec, partial, sobolev_norm, Field, C64};
use crate::waterwaves::{surface_velocities, SurfaceState, WaveModel};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymmetrizerConfig {
    /// Sobolev index.
    pub s: f64,
    /// Drop `λ⁽⁰⁾`, `ℓ⁽¹⁾`, `p⁽⁻¹ᐟ²⁾`, `γ⁽¹ᐟ²⁾`.
    pub principal_only: bool,
}

impl SymmetrizerConfig {
    /// `s = 2` in one dimension, `2.6` in two.
    pub fn for_dim(dim: usize) -> SymmetrizerConfig {
        SymmetrizerConfig { s: if dim == 1 { 2.0 } else { 2.6 }, principal_only: false }
    }

    fn params(&self) -> SymbolParams {
        SymbolParams { s: self.s, principal_only: self.principal_only, ..SymbolParams::default() }
    }

    fn symbol(&self, kind: SymbolKind, eta: &Field) -> Result<Symbol> {
        build_symbol(kind, eta, &self.params())
    }
}

/// `‖η‖_{H^{s+1/2}} + ‖ψ‖_{H^s}`.
pub fn data_norm(eta: &Field, psi: &Field, s: f64) -> f64 {
    sobolev_norm(eta, s + 0.5) + sobolev_norm(psi, s)
}

#[derive(Clone, Debug)]
pub struct GoodUnknown {
    pub u: Field,
    pub b: Field,
}

/// `U = ψ − T̃_Bη`.
pub fn good_unknown(model: &WaveModel, state: &SurfaceState) -> Result<GoodUnknown> {
    let (b, _) = model.compute_bv(state)?;
    Ok(GoodUnknown { u: &state.psi - &paraproduct(&b, &state.eta), b })
}

/// Time derivatives at one state, with `∂_tB` from the shape-derivative chain rule.
#[derive(Clone, Debug)]
pub struct Derivatives {
    pub eta_t: Field,
    pub psi_t: Field,
    pub gpsi: Field,
    pub b: Field,
    pub v: Vec<Field>,
    pub b_t: Field,
}

pub fn time_derivatives(model: &WaveModel, state: &SurfaceState) -> Result<Derivatives> {
    let solver = model.solver(&state.eta)?;
    let gpsi = solver.apply(&state.psi)?;
    let (b, v) = surface_velocities(&state.eta, &state.psi, &gpsi);
    let (eta_t, psi_t) = model.rhs(state)?;
    let ge = gradient(&state.eta);
    let gp = gradient(&state.psi);
    let get = gradient(&eta_t);
    let gpt = gradient(&psi_t);
    let vflux: Vec<Field> = v.iter().map(|c| c * &eta_t).collect();
    let gpsi_t = &solver.apply(&(&psi_t - &(&b * &eta_t)))? - &crate::spectral::divergence(&vflux);
    let w = &Field::constant(state.eta.grid(), 1.0) + &norm_sqr_vec(&ge);
    let num = &(&(&dot_vec(&get, &gp) + &dot_vec(&ge, &gpt)) + &gpsi_t) - &(&b * &dot_vec(&ge, &get)).scale(2.0);
    let b_t = Field::from_real(state.eta.grid(), num.re().iter().zip(w.re()).map(|(n, d)| n / d).collect());
    Ok(Derivatives { eta_t, psi_t, gpsi, b, v, b_t })
}

fn transport(v: &[Field], u: &Field) -> Field {
    let mut out = Field::zeros(u.grid());
    for (j, vj) in v.iter().enumerate() {
        out = &out + &paraproduct(vj, &partial(u, j));
    }
    out
}

#[derive(Clone, Debug)]
pub struct Residuals {
    pub f1: Field,
    pub f2: Field,
    /// `‖f₁‖_{H^{s+1/2}}`.
    pub f1_norm: f64,
    /// `‖f₂‖_{H^s}`.
    pub f2_norm: f64,
    pub data_norm: f64,
}

impl Residuals {
    pub fn relative(&self) -> f64 {
        if self.data_norm == 0.0 { 0.0 } else { (self.f1_norm + self.f2_norm) / self.data_norm }
    }
}

/// `f₁ = ∂_tη + T_V·∇η − T_λU`, `f₂ = ∂_tU + T_V·∇U + T_ℓη`.
pub fn paralinearized_residuals(model: &WaveModel, state: &SurfaceState, cfg: SymmetrizerConfig) -> Result<Residuals> {
    let d = time_derivatives(model, state)?;
    let eta = &state.eta;
    let u = &state.psi - &paraproduct(&d.b, eta);
    let u_t = &(&d.psi_t - &paraproduct(&d.b, &d.eta_t)) - &paraproduct(&d.b_t, eta);
    let lambda = cfg.symbol(SymbolKind::Lambda, eta)?;
    let ell = cfg.symbol(SymbolKind::Ell, eta)?;
    let f1 = &(&d.eta_t + &transport(&d.v, eta)) - &quantize(&lambda, &u)?;
    let f2 = &(&u_t + &transport(&d.v, &u)) + &quantize(&ell, eta)?;
    Ok(Residuals {
        f1_norm: sobolev_norm(&f1, cfg.s + 0.5),
        f2_norm: sobolev_norm(&f2, cfg.s),
        data_norm: data_norm(eta, &state.psi, cfg.s),
        f1,
        f2,
    })
}

#[derive(Clone, Debug)]
pub struct ComplexUnknown {
    /// `Φ = T_pη + iT_qU`.
    pub phi: Field,
    pub s: f64,
}

impl ComplexUnknown {
    pub fn phi1(&self) -> Field {
        self.phi.real_part()
    }

    pub fn phi2(&self) -> Field {
        self.phi.imag_part()
    }
}

pub fn phi_from(eta: &Field, u: &Field, cfg: SymmetrizerConfig) -> Result<Field> {
    let p = cfg.symbol(SymbolKind::P, eta)?;
    let q = cfg.symbol(SymbolKind::Q, eta)?;
    let tp = quantize(&p, eta)?;
    let tq = quantize(&q, u)?;
    Ok(tp.complexify(&tq))
}

pub fn build_phi(model: &WaveModel, state: &SurfaceState, cfg: SymmetrizerConfig) -> Result<ComplexUnknown> {
    let gu = good_unknown(model, state)?;
    Ok(ComplexUnknown { phi: phi_from(&state.eta, &gu.u, cfg)?, s: cfg.s })
}

#[derive(Clone, Debug)]
pub struct SymmetrizedResidual {
    pub t: f64,
    pub f: Field,
    /// `‖F‖_{H^s}`.
    pub norm: f64,
    /// `‖Φ‖_{H^s}`.
    pub phi_norm: f64,
    pub data_norm: f64,
}

impl SymmetrizedResidual {
    pub fn relative_to_phi(&self) -> f64 {
        if self.phi_norm == 0.0 { 0.0 } else { self.norm / self.phi_norm }
    }

    pub fn relative_to_data(&self) -> f64 {
        if self.data_norm == 0.0 { 0.0 } else { self.norm / self.data_norm }
    }
}

/// `F = ∂_tΦ + T_V·∇Φ + iT_γΦ` at `cur`, with `∂_tΦ` by central differences
/// of the neighbouring snapshots.
pub fn symmetrized_residual(
    model: &WaveModel,
    prev: &SurfaceState,
    cur: &SurfaceState,
    next: &SurfaceState,
    cfg: SymmetrizerConfig,
) -> Result<SymmetrizedResidual> {
    let span = next.t - prev.t;
    if !(span > 0.0) {
        return Err(Error::InvalidParameter(format!("snapshots must be time ordered, got span {span}")));
    }
    let phi_prev = build_phi(model, prev, cfg)?.phi;
    let phi_next = build_phi(model, next, cfg)?.phi;
    let gpsi = model.dn_apply(&cur.eta, &cur.psi)?;
    let (b, v) = surface_velocities(&cur.eta, &cur.psi, &gpsi);
    let u = &cur.psi - &paraproduct(&b, &cur.eta);
    let phi = phi_from(&cur.eta, &u, cfg)?;
    let gamma = cfg.symbol(SymbolKind::Gamma, &cur.eta)?;
    let dphi = (&phi_next - &phi_prev).scale(1.0 / span);
    let f = &(&dphi + &transport(&v, &phi)) + &quantize(&gamma, &phi)?.scale_complex(C64::new(0.0, 1.0));
    Ok(SymmetrizedResidual {
        t: cur.t,
        norm: sobolev_norm(&f, cfg.s),
        phi_norm: sobolev_norm(&phi, cfg.s),
        data_norm: data_norm(&cur.eta, &cur.psi, cfg.s),
        f,
    })
}

/// `‖φ‖_{L²}` with `φ = T_℘Φ`, and the two sides of the norm equivalence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhiEnergy {
    pub phi_l2: f64,
    /// `‖η‖_{L²} + ‖ψ‖_{L²}`.
    pub low: f64,
    /// `‖η‖_{H^{s+1/2}} + ‖ψ‖_{H^s}`.
    pub data: f64,
}

impl PhiEnergy {
    /// `‖φ‖ / (data + low)`.
    pub fn ratio(&self) -> f64 {
        let d = self.data + self.low;
        if d == 0.0 { 0.0 } else { self.phi_l2 / d }
    }

    /// `data / (‖φ‖ + low)`, bounded above by the reverse inequality.
    pub fn reverse_ratio(&self) -> f64 {
        let d = self.phi_l2 + self.low;
        if d == 0.0 { 0.0 } else { self.data / d }
    }
}

pub fn weighted_phi(eta: &Field, phi: &Field, cfg: SymmetrizerConfig) -> Result<Field> {
    quantize(&cfg.symbol(SymbolKind::Weight, eta)?, phi)
}

pub fn energy_phi(model: &WaveModel, state: &SurfaceState, cfg: SymmetrizerConfig) -> Result<PhiEnergy> {
    let phi = build_phi(model, state, cfg)?.phi;
    let wphi = weighted_phi(&state.eta, &phi, cfg)?;
    Ok(PhiEnergy {
        phi_l2: sobolev_norm(&wphi, 0.0),
        low: sobolev_norm(&state.eta, 0.0) + sobolev_norm(&state.psi, 0.0),
        data: data_norm(&state.eta, &state.psi, cfg.s),
    })
}

/// Constant `C` in `d/dt‖φ‖² ≤ C·𝔅·(‖η‖+‖ψ‖+‖φ‖)‖φ‖` fitted along a sampled
/// trajectory, by centered differences of `‖φ‖²`.
pub fn energy_growth_constant(times: &[f64], phi_l2: &[f64], low: &[f64], b: &[f64]) -> f64 {
    let mut c: f64 = 0.0;
    for i in 1..times.len().saturating_sub(1) {
        let rate = (phi_l2[i + 1].powi(2) - phi_l2[i - 1].powi(2)) / (times[i + 1] - times[i - 1]);
        let scale = b[i] * (low[i] + phi_l2[i]) * phi_l2[i];
        if scale > 0.0 {
            c = c.max(rate.abs() / scale);
        }
    }
    c
}

/// Order fits of `T_γ − T_γ*`, `T_pT_λ − T_γT_q` and `T_qT_ℓ − T_γT_p`.
#[derive(Clone, Debug)]
pub struct CalculusChecks {
    pub symmetry: OrderFit,
    pub intertwine_lambda: OrderFit,
    pub intertwine_ell: OrderFit,
}

pub fn calculus_checks(
    eta: &Field,
    cfg: SymmetrizerConfig,
    bands: RangeInclusive<u32>,
    seed: u64,
) -> Result<CalculusChecks> {
    let g = eta.grid();
    let gamma = cfg.symbol(SymbolKind::Gamma, eta)?;
    let p = cfg.symbol(SymbolKind::P, eta)?;
    let q = cfg.symbol(SymbolKind::Q, eta)?;
    let lambda = cfg.symbol(SymbolKind::Lambda, eta)?;
    let ell = cfg.symbol(SymbolKind::Ell, eta)?;
    let symmetry = order_probe(g, |u| Ok(&quantize(&gamma, u)? - &quantize_adjoint(&gamma, u)?), bands.clone(), seed)?;
    let intertwine_lambda = order_probe(
        g,
        |u| Ok(&quantize(&p, &quantize(&lambda, u)?)? - &quantize(&gamma, &quantize(&q, u)?)?),
        bands.clone(),
        seed,
    )?;
    let intertwine_ell = order_probe(
        g,
        |u| Ok(&quantize(&q, &quantize(&ell, u)?)? - &quantize(&gamma, &quantize(&p, u)?)?),
        bands,
        seed,
    )?;
    Ok(CalculusChecks { symmetry, intertwine_lambda, intertwine_ell })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualRow {
    pub t: f64,
    pub f1: f64,
    pub f2: f64,
    pub big_f: f64,
    pub phi: f64,
}

/// Columns `t,||f1||,||f2||,||F||,||phi||`.
pub fn write_residual_series<W: Write>(rows: &[ResidualRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "t,||f1||,||f2||,||F||,||phi||")?;
    for r in rows {
        writeln!(w, "{:.10e},{:.10e},{:.10e},{:.10e},{:.10e}", r.t, r.f1, r.f2, r.big_f, r.phi)?;
    }
    Ok(())
}
