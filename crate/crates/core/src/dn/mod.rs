//! Dirichlet–Neumann operator on a straightened fluid strip.
//!
//! The strip `−1 < z < 0` carries uniform nodes `z_i = −1 + iΔz`. The
//! discrete potential minimizes the transformed Dirichlet energy
//!
//! `Q(v) = ⟨Σ_cells Δz(ζ₁a² − 2a∇ρ·m) + Σ_nodes w_iΔz ∂_zρ|∇v_i|²⟩`
//!
//! with `a = (v_{i+1}−v_i)/Δz`, `m` the cell-averaged gradient, trapezoid
//! weights `w_i` and `⟨·⟩` the grid mean, subject to `v_M = f`. `G(η)f` is the
//! conormal flux at the top row, so `⟨f G(η)f⟩ = Q` and the operator is
//! symmetric by construction.

use std::f64::consts::PI;
use std::io::Write;

use crate::error::{Error, Result};
use crate::fft;
use crate::lp::paraproduct;
use crate::paradiff::{build_symbol, quantize, SymbolKind, SymbolParams};
use crate::spectral::{dot_vec, gradient, partial, divergence, Field, Grid, Multiplier, C64};
use crate::waterwaves::surface_velocities;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapMode {
    /// `ρ = (1+z)η + zh`.
    Linear,
    /// Smoothing map `ρ = (1+z)e^{δz⟨D⟩}η − z(e^{−(1+z)δ⟨D⟩}η − h)`.
    Smoothing,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DnConfig {
    pub h: f64,
    /// Number of z-cells.
    pub m: usize,
    pub mode: MapMode,
    /// Smoothing rate for [`MapMode::Smoothing`]; `None` picks `min(0.1/‖η‖_{W^{1,∞}}, 1)`.
    pub delta: Option<f64>,
    /// Relative residual target of the strip solve.
    pub tol: f64,
    pub max_iter: usize,
    /// Adds the η-independent multiplier `|D|tanh(h|D|) − G_h(0)` so flat
    /// surfaces are resolved exactly at any `M`.
    pub flat_correction: bool,
}

impl Default for DnConfig {
    fn default() -> Self {
        DnConfig { h: 1.0, m: 64, mode: MapMode::Linear, delta: None, tol: 1e-12, max_iter: 500, flat_correction: false }
    }
}

impl DnConfig {
    pub fn with_m(self, m: usize) -> DnConfig {
        DnConfig { m, ..self }
    }

    pub fn with_h(self, h: f64) -> DnConfig {
        DnConfig { h, ..self }
    }

    pub fn with_flat_correction(self, on: bool) -> DnConfig {
        DnConfig { flat_correction: on, ..self }
    }
}

/// Geometry of one z-level of the map.
#[derive(Clone, Debug)]
pub struct MapLevel {
    pub z: f64,
    pub rho: Field,
    pub rho_z: Field,
    pub rho_zz: Field,
    pub grad_rho: Vec<Field>,
    pub grad_rho_z: Vec<Field>,
    pub lap_rho: Field,
}

#[derive(Clone, Debug)]
pub struct StraighteningMap {
    grid: Grid,
    m: usize,
    h: f64,
    mode: MapMode,
    delta: f64,
    eta_hat: Vec<C64>,
}

/// Multipliers `(L, ∂_zL, ∂_z²L)` with `ρ̂(z) = L(z)η̂ + zh·[k=0]`.
fn level_multipliers(mode: MapMode, delta: f64, z: f64, kabs: f64) -> (f64, f64, f64) {
    match mode {
        MapMode::Linear => (1.0 + z, 1.0, 0.0),
        MapMode::Smoothing => {
            let jk = (1.0 + kabs * kabs).sqrt();
            let dk = delta * jk;
            let ep = (dk * z).exp();
            let em = (-(1.0 + z) * dk).exp();
            let l = (1.0 + z) * ep - z * em;
            let lz = ep * (1.0 + (1.0 + z) * dk) - em * (1.0 - z * dk);
            let lzz = ep * (2.0 * dk + (1.0 + z) * dk * dk) + em * (2.0 * dk - z * dk * dk);
            (l, lz, lzz)
        }
    }
}

/// `max|η| + max|∇η|`.
fn w1_inf(eta: &Field) -> f64 {
    let g = gradient(eta);
    let slope = (0..eta.grid().len())
        .map(|i| g.iter().map(|c| c.value(i).re.powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    eta.max_abs() + slope
}

pub fn build_straightening(eta: &Field, h: f64, m: usize, mode: MapMode, delta: Option<f64>) -> Result<StraighteningMap> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("depth h = {h} must be positive")));
    }
    if m < 8 {
        return Err(Error::InvalidParameter(format!("strip resolution M = {m} must be at least 8")));
    }
    if !eta.is_real() || !eta.is_finite() {
        return Err(Error::InvalidParameter("surface elevation must be real and finite".into()));
    }
    if mode == MapMode::Linear && eta.min_re() + h <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "surface touches the bottom: min eta + h = {}",
            eta.min_re() + h
        )));
    }
    let delta = match delta {
        Some(d) if d > 0.0 => d,
        Some(d) => return Err(Error::InvalidParameter(format!("smoothing rate delta = {d} must be positive"))),
        None => {
            let n = w1_inf(eta);
            if n > 0.0 { (0.1 / n).min(1.0) } else { 1.0 }
        }
    };
    let map = StraighteningMap { grid: eta.grid(), m, h, mode, delta, eta_hat: eta.coeffs().to_vec() };
    let levels = if mode == MapMode::Linear { 0 } else { 2 * m };
    for l in 0..=levels {
        let rz = map.rho_z_at(map.fine_z(l));
        for (node, v) in rz.iter().enumerate() {
            if *v < h / 2.0 {
                return Err(Error::LowerBound { node, level: l, value: *v, bound: h / 2.0 });
            }
        }
    }
    Ok(map)
}

impl StraighteningMap {
    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn mode(&self) -> MapMode {
        self.mode
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn dz(&self) -> f64 {
        1.0 / self.m as f64
    }

    /// Node `z_i`.
    pub fn z(&self, i: usize) -> f64 {
        -1.0 + i as f64 * self.dz()
    }

    /// Level `l` of the half-step grid: nodes at even `l`, cell centers at odd `l`.
    pub fn fine_z(&self, l: usize) -> f64 {
        -1.0 + l as f64 * self.dz() / 2.0
    }

    fn multipliers(&self, z: f64) -> Vec<(f64, f64, f64)> {
        (0..self.grid.len())
            .map(|i| level_multipliers(self.mode, self.delta, z, self.grid.abs_freq(i)))
            .collect()
    }

    fn synth(&self, mult: impl Fn(usize) -> f64, constant: f64) -> Field {
        let mut c: Vec<C64> = self.eta_hat.iter().enumerate().map(|(i, v)| v * mult(i)).collect();
        c[0] += constant;
        Field::from_coeffs(self.grid, c, true)
    }

    fn rho_z_at(&self, z: f64) -> Vec<f64> {
        let m = self.multipliers(z);
        self.synth(|i| m[i].1, self.h).re()
    }

    pub fn level(&self, z: f64) -> MapLevel {
        let m = self.multipliers(z);
        let rho = self.synth(|i| m[i].0, z * self.h);
        let rho_z = self.synth(|i| m[i].1, self.h);
        let rho_zz = self.synth(|i| m[i].2, 0.0);
        let grad_rho = gradient(&rho);
        let grad_rho_z = gradient(&rho_z);
        let lap_rho = divergence(&grad_rho);
        MapLevel { z, rho, rho_z, rho_zz, grad_rho, grad_rho_z, lap_rho }
    }
}

/// `α, β, γ` of the transformed Laplace equation at the nodes.
#[derive(Clone, Debug)]
pub struct EllipticCoefficients {
    pub z: Vec<f64>,
    pub alpha: Vec<Field>,
    pub beta: Vec<Vec<Field>>,
    pub gamma: Vec<Field>,
}

pub fn elliptic_coefficients(map: &StraighteningMap) -> EllipticCoefficients {
    let mut out = EllipticCoefficients { z: vec![], alpha: vec![], beta: vec![], gamma: vec![] };
    let g = map.grid;
    for i in 0..=map.m {
        let lv = map.level(map.z(i));
        let mut alpha = vec![0.0; g.len()];
        let mut beta = vec![vec![0.0; g.len()]; g.dim()];
        let mut gamma = vec![0.0; g.len()];
        for x in 0..g.len() {
            let rz = lv.rho_z.value(x).re;
            let gr: Vec<f64> = lv.grad_rho.iter().map(|c| c.value(x).re).collect();
            let n2: f64 = gr.iter().map(|v| v * v).sum();
            let a = rz * rz / (1.0 + n2);
            alpha[x] = a;
            let mut bdot = 0.0;
            for j in 0..g.dim() {
                beta[j][x] = -2.0 * rz * gr[j] / (1.0 + n2);
                bdot += beta[j][x] * lv.grad_rho_z[j].value(x).re;
            }
            gamma[x] = (lv.rho_zz.value(x).re + a * lv.lap_rho.value(x).re + bdot) / rz;
        }
        out.z.push(lv.z);
        out.alpha.push(Field::from_real(g, alpha));
        out.beta.push(beta.into_iter().map(|b| Field::from_real(g, b)).collect());
        out.gamma.push(Field::from_real(g, gamma));
    }
    out
}

/// Discrete harmonic extension of `f` into the strip.
#[derive(Clone, Debug)]
pub struct HarmonicLift {
    pub grid: Grid,
    pub m: usize,
    /// `v(·, z_i)`, `i = 0..=M`; the last row is `f`.
    pub levels: Vec<Vec<f64>>,
    pub iterations: usize,
    pub residual: f64,
}

impl HarmonicLift {
    pub fn level(&self, i: usize) -> Field {
        Field::from_real(self.grid, self.levels[i].clone())
    }

    /// `∂_zv` at `z = 0` from the one-sided second-order stencil.
    pub fn dz_top(&self) -> Field {
        let m = self.m;
        let dz = 1.0 / m as f64;
        let (a, b, c) = (&self.levels[m], &self.levels[m - 1], &self.levels[m - 2]);
        Field::from_real(
            self.grid,
            (0..a.len()).map(|i| (3.0 * a[i] - 4.0 * b[i] + c[i]) / (2.0 * dz)).collect(),
        )
    }

    pub fn max_abs(&self) -> f64 {
        self.levels.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Columns `x [y] z value`.
    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let g = self.grid;
        writeln!(w, "# strip {} {} {}", g.dim(), g.n(), self.m)?;
        for (i, row) in self.levels.iter().enumerate() {
            let z = -1.0 + i as f64 / self.m as f64;
            for (node, v) in row.iter().enumerate() {
                let x = g.node(node);
                if g.dim() == 1 {
                    writeln!(w, "{:.17e} {:.17e} {:.17e}", x[0], z, v)?;
                } else {
                    writeln!(w, "{:.17e} {:.17e} {:.17e} {:.17e}", x[0], x[1], z, v)?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyFlux {
    /// `E = ‖∇_{x,y}φ‖_{L²}` from the strip quadrature.
    pub energy: f64,
    /// `∫ f G(η)f`.
    pub flux: f64,
    /// `|flux − E²|`.
    pub mismatch: f64,
}

type Levels = Vec<Vec<f64>>;

/// Assembled strip operator for one surface.
pub struct DnSolver {
    map: StraighteningMap,
    cfg: DnConfig,
    dz: f64,
    rz_node: Levels,
    rz_cell: Levels,
    zeta_cell: Levels,
    grad_cell: Vec<Levels>,
    /// Effective `k` per lattice index (Nyquist components zeroed).
    kvec: Vec<[f64; 2]>,
    mirror: Vec<usize>,
    /// Thomas factors per lattice index: `c'` and `1/denominator`, stride `M`.
    cprime: Vec<f64>,
    inv_den: Vec<f64>,
    lower: Vec<f64>,
    correction: Option<Vec<f64>>,
}

fn weight(i: usize, m: usize) -> f64 {
    if i == 0 || i == m { 0.5 } else { 1.0 }
}

impl DnSolver {
    pub fn new(eta: &Field, cfg: DnConfig) -> Result<DnSolver> {
        let map = build_straightening(eta, cfg.h, cfg.m, cfg.mode, cfg.delta)?;
        let g = map.grid;
        let m = cfg.m;
        let dz = map.dz();
        let linear = (map.mode == MapMode::Linear).then(|| {
            let rz: Vec<f64> = eta.re().iter().map(|e| e + cfg.h).collect();
            let ge: Levels = gradient(eta).iter().map(Field::re).collect();
            (rz, ge)
        });
        let rz_node: Levels = match &linear {
            Some((rz, _)) => vec![rz.clone(); m + 1],
            None => (0..=m).map(|i| map.rho_z_at(map.z(i))).collect(),
        };
        let mut rz_cell = Vec::with_capacity(m);
        let mut zeta_cell = Vec::with_capacity(m);
        let mut grad_cell = Vec::with_capacity(m);
        for c in 0..m {
            let (rz, gr): (Vec<f64>, Levels) = match &linear {
                Some((rz, ge)) => {
                    let s = 1.0 + map.fine_z(2 * c + 1);
                    (rz.clone(), ge.iter().map(|v| v.iter().map(|u| s * u).collect()).collect())
                }
                None => {
                    let lv = map.level(map.fine_z(2 * c + 1));
                    (lv.rho_z.re(), lv.grad_rho.iter().map(Field::re).collect())
                }
            };
            let zeta: Vec<f64> = (0..g.len())
                .map(|x| (1.0 + gr.iter().map(|v| v[x] * v[x]).sum::<f64>()) / rz[x])
                .collect();
            rz_cell.push(rz);
            zeta_cell.push(zeta);
            grad_cell.push(gr);
        }
        let half = (g.n() / 2) as i64;
        let kvec: Vec<[f64; 2]> = (0..g.len())
            .map(|i| {
                let k = g.freq(i);
                let e = |v: i64| if v == half { 0.0 } else { v as f64 };
                [e(k[0]), if g.dim() == 2 { e(k[1]) } else { 0.0 }]
            })
            .collect();
        let mirror = (0..g.len())
            .map(|i| {
                let k = g.freq(i);
                g.index([-k[0], -k[1]])
            })
            .collect();

        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let zbar: Vec<f64> = zeta_cell.iter().map(|v| mean(v)).collect();
        let rbar: Vec<f64> = rz_node.iter().map(|v| mean(v)).collect();
        let lower: Vec<f64> = (0..m).map(|i| if i == 0 { 0.0 } else { -zbar[i - 1] / dz }).collect();
        let mut cprime = vec![0.0; g.len() * m];
        let mut inv_den = vec![0.0; g.len() * m];
        for (kidx, k) in kvec.iter().enumerate() {
            let k2 = k[0] * k[0] + k[1] * k[1];
            let base = kidx * m;
            for i in 0..m {
                let mut diag = zbar[i] / dz + weight(i, m) * dz * rbar[i] * k2;
                if i > 0 {
                    diag += zbar[i - 1] / dz;
                }
                let upper = if i + 1 < m { -zbar[i] / dz } else { 0.0 };
                let den = if i == 0 { diag } else { diag - lower[i] * cprime[base + i - 1] };
                inv_den[base + i] = 1.0 / den;
                cprime[base + i] = upper / den;
            }
        }
        let correction = cfg.flat_correction.then(|| {
            kvec.iter()
                .map(|k| {
                    let r = k[0].hypot(k[1]);
                    r * (cfg.h * r).tanh() - dn_flat_discrete_symbol(r, cfg.h, m)
                })
                .collect()
        });
        Ok(DnSolver { map, cfg, dz, rz_node, rz_cell, zeta_cell, grad_cell, kvec, mirror, cprime, inv_den, lower, correction })
    }

    pub fn map(&self) -> &StraighteningMap {
        &self.map
    }

    pub fn config(&self) -> DnConfig {
        self.cfg
    }

    fn grid(&self) -> Grid {
        self.map.grid
    }

    /// Spectral gradients of real levels, two levels per complex transform.
    fn gradients(&self, levels: &[Vec<f64>]) -> Vec<Levels> {
        let g = self.grid();
        let (dim, n, len) = (g.dim(), g.n(), g.len());
        let mut out = Vec::with_capacity(levels.len());
        let mut buf = vec![C64::default(); len];
        let mut tmp = vec![C64::default(); len];
        for pair in levels.chunks(2) {
            for x in 0..len {
                buf[x] = C64::new(pair[0][x], pair.get(1).map_or(0.0, |b| b[x]));
            }
            fft::forward(dim, n, &mut buf);
            let mut ga = Vec::with_capacity(dim);
            let mut gb = Vec::with_capacity(dim);
            for j in 0..dim {
                for x in 0..len {
                    tmp[x] = buf[x] * C64::new(0.0, self.kvec[x][j]);
                }
                fft::inverse(dim, n, &mut tmp);
                ga.push(tmp.iter().map(|v| v.re).collect());
                gb.push(tmp.iter().map(|v| v.im).collect());
            }
            out.push(ga);
            if pair.len() == 2 {
                out.push(gb);
            }
        }
        out
    }

    /// Cell quantities `(a_c, m_c)` and node gradients for a full column.
    fn cells(&self, v: &[Vec<f64>]) -> (Levels, Vec<Levels>, Vec<Levels>) {
        let m = self.cfg.m;
        let len = self.grid().len();
        let dim = self.grid().dim();
        let grads = self.gradients(v);
        let mut a = Vec::with_capacity(m);
        let mut mid = Vec::with_capacity(m);
        for c in 0..m {
            a.push((0..len).map(|x| (v[c + 1][x] - v[c][x]) / self.dz).collect());
            mid.push((0..dim).map(|j| (0..len).map(|x| 0.5 * (grads[c][j][x] + grads[c + 1][j][x])).collect()).collect());
        }
        (a, mid, grads)
    }

    /// `½∂Q/∂v_i` for every row of a full column.
    fn apply_full(&self, v: &[Vec<f64>]) -> Levels {
        let g = self.grid();
        let (dim, n, len) = (g.dim(), g.n(), g.len());
        let m = self.cfg.m;
        let dz = self.dz;
        let grads = self.gradients(v);
        let a: Levels = (0..m).map(|c| v[c + 1].iter().zip(&v[c]).map(|(p, q)| (p - q) / dz).collect()).collect();
        let y = |i: usize, j: usize, x: usize| {
            let mut y = -weight(i, m) * dz * self.rz_node[i][x] * grads[i][j][x];
            if i > 0 {
                y += 0.5 * dz * a[i - 1][x] * self.grad_cell[i - 1][j][x];
            }
            if i < m {
                y += 0.5 * dz * a[i][x] * self.grad_cell[i][j][x];
            }
            y
        };
        let mut out = vec![vec![0.0; len]; m + 1];
        let mut acc = vec![C64::default(); len];
        let mut buf = vec![C64::default(); len];
        for p in (0..=m).step_by(2) {
            let has_b = p < m;
            acc.iter_mut().for_each(|v| *v = C64::default());
            for j in 0..dim {
                for x in 0..len {
                    buf[x] = C64::new(y(p, j, x), if has_b { y(p + 1, j, x) } else { 0.0 });
                }
                fft::forward(dim, n, &mut buf);
                for x in 0..len {
                    acc[x] += buf[x] * C64::new(0.0, self.kvec[x][j]);
                }
            }
            fft::inverse(dim, n, &mut acc);
            for x in 0..len {
                out[p][x] = acc[x].re;
                if has_b {
                    out[p + 1][x] = acc[x].im;
                }
            }
        }
        for c in 0..m {
            for x in 0..len {
                let mut f = self.zeta_cell[c][x] * a[c][x];
                for j in 0..dim {
                    f -= self.grad_cell[c][j][x] * 0.5 * (grads[c][j][x] + grads[c + 1][j][x]);
                }
                out[c][x] -= f;
                out[c + 1][x] += f;
            }
        }
        out
    }

    fn apply_interior(&self, p: &[Vec<f64>]) -> Levels {
        let mut full = p.to_vec();
        full.push(vec![0.0; self.grid().len()]);
        let mut out = self.apply_full(&full);
        out.pop();
        out
    }

    /// Flat-averaged per-mode tridiagonal solve.
    fn precondition(&self, r: &[Vec<f64>]) -> Levels {
        let g = self.grid();
        let (dim, n, len) = (g.dim(), g.n(), g.len());
        let m = self.cfg.m;
        let mut spec = vec![vec![C64::default(); len]; m];
        let mut buf = vec![C64::default(); len];
        for p in (0..m).step_by(2) {
            let has_b = p + 1 < m;
            for x in 0..len {
                buf[x] = C64::new(r[p][x], if has_b { r[p + 1][x] } else { 0.0 });
            }
            fft::forward(dim, n, &mut buf);
            for k in 0..len {
                let c = buf[self.mirror[k]].conj();
                spec[p][k] = (buf[k] + c) * 0.5;
                if has_b {
                    spec[p + 1][k] = (buf[k] - c) * C64::new(0.0, -0.5);
                }
            }
        }
        for k in 0..len {
            let base = k * m;
            let mut prev = C64::default();
            for i in 0..m {
                let s = if i == 0 { spec[i][k] } else { spec[i][k] - self.lower[i] * prev };
                prev = s * self.inv_den[base + i];
                spec[i][k] = prev;
            }
            for i in (0..m - 1).rev() {
                let next = spec[i + 1][k];
                spec[i][k] -= self.cprime[base + i] * next;
            }
        }
        let mut out = vec![vec![0.0; len]; m];
        for p in (0..m).step_by(2) {
            let has_b = p + 1 < m;
            for k in 0..len {
                buf[k] = spec[p][k] + if has_b { spec[p + 1][k] * C64::new(0.0, 1.0) } else { C64::default() };
            }
            fft::inverse(dim, n, &mut buf);
            for x in 0..len {
                out[p][x] = buf[x].re;
                if has_b {
                    out[p + 1][x] = buf[x].im;
                }
            }
        }
        out
    }

    fn condition_estimate(&self) -> f64 {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for v in &self.inv_den {
            let d = 1.0 / v.abs();
            lo = lo.min(d);
            hi = hi.max(d);
        }
        hi / lo
    }

    /// Solves for the discrete harmonic extension of `f`.
    pub fn solve_harmonic(&self, f: &Field) -> Result<HarmonicLift> {
        let g = self.grid();
        g.check_same(&f.grid())?;
        if !f.is_real() {
            return Err(Error::InvalidParameter("Dirichlet data must be real".into()));
        }
        let m = self.cfg.m;
        let len = g.len();
        let dot = |a: &Levels, b: &Levels| -> f64 {
            a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>()).sum()
        };
        let mut full = vec![vec![0.0; len]; m + 1];
        full[m] = f.re();
        let b: Levels = self.apply_full(&full)[..m].iter().map(|r| r.iter().map(|v| -v).collect()).collect();
        let bnorm = dot(&b, &b).sqrt();
        let mut x = vec![vec![0.0; len]; m];
        let mut iterations = 0;
        let mut rel = 0.0;
        if bnorm > 0.0 {
            let mut r = b;
            let mut z = self.precondition(&r);
            let mut p = z.clone();
            let mut rz = dot(&r, &z);
            loop {
                let ap = self.apply_interior(&p);
                let alpha = rz / dot(&p, &ap);
                for i in 0..m {
                    for k in 0..len {
                        x[i][k] += alpha * p[i][k];
                        r[i][k] -= alpha * ap[i][k];
                    }
                }
                iterations += 1;
                rel = dot(&r, &r).sqrt() / bnorm;
                if rel <= self.cfg.tol {
                    break;
                }
                if iterations >= self.cfg.max_iter || !rel.is_finite() {
                    return Err(Error::SolveFailed {
                        iterations,
                        residual: rel,
                        condition: self.condition_estimate(),
                    });
                }
                z = self.precondition(&r);
                let rz_new = dot(&r, &z);
                let beta = rz_new / rz;
                rz = rz_new;
                for i in 0..m {
                    for k in 0..len {
                        p[i][k] = z[i][k] + beta * p[i][k];
                    }
                }
            }
        }
        x.push(f.re());
        Ok(HarmonicLift { grid: g, m, levels: x, iterations, residual: rel })
    }

    /// Conormal flux at the top row, mean projected out.
    pub fn trace(&self, lift: &HarmonicLift) -> Field {
        let out = self.apply_full(&lift.levels);
        let g = Field::from_real(self.grid(), out[self.cfg.m].clone()).without_mean();
        match self.flat_term(&lift.levels[self.cfg.m]) {
            Some(c) => &g + &c,
            None => g,
        }
    }

    fn flat_term(&self, f: &[f64]) -> Option<Field> {
        let c = self.correction.as_ref()?;
        let f = Field::from_real(self.grid(), f.to_vec());
        Some(f.spectral_map(true, |i, v| v * c[i]))
    }

    pub fn apply(&self, f: &Field) -> Result<Field> {
        Ok(self.trace(&self.solve_harmonic(f)?))
    }

    fn top_geometry(&self) -> (Field, Vec<Field>) {
        let lv = self.map.level(0.0);
        (lv.rho_z, lv.grad_rho)
    }

    /// `ζ₁∂_zv − ∇ρ·∇f` at `z = 0` with the one-sided `∂_z` stencil.
    pub fn trace_one_sided(&self, lift: &HarmonicLift) -> Field {
        let (rz, grad) = self.top_geometry();
        let vz = lift.dz_top();
        let gf = gradient(&lift.level(lift.m));
        let zeta1 = (&Field::constant(self.grid(), 1.0) + &dot_vec(&grad, &grad)).zip_div(&rz);
        &(&zeta1 * &vz) - &dot_vec(&grad, &gf)
    }

    /// Trace of `Λ₁v − ∇ρ·Λ₂v` with `Λ₁ = ∂_z/∂_zρ`, `Λ₂ = ∇ − (∇ρ/∂_zρ)∂_z`.
    pub fn trace_divergence_form(&self, lift: &HarmonicLift) -> Field {
        let (rz, grad) = self.top_geometry();
        let vz = lift.dz_top();
        let gf = gradient(&lift.level(lift.m));
        let l1 = vz.zip_div(&rz);
        let l2: Vec<Field> = gf.iter().zip(&grad).map(|(gv, gr)| gv - &(gr * &l1)).collect();
        &l1 - &dot_vec(&grad, &l2)
    }

    /// Discrete energy `Q(v) = E²/(2π)^d`.
    fn quadratic_form(&self, lift: &HarmonicLift) -> f64 {
        let m = self.cfg.m;
        let len = self.grid().len();
        let dim = self.grid().dim();
        let (a, mid, grads) = self.cells(&lift.levels);
        let mut q = 0.0;
        for c in 0..m {
            for x in 0..len {
                let mut cross = 0.0;
                for j in 0..dim {
                    cross += self.grad_cell[c][j][x] * mid[c][j][x];
                }
                q += self.dz * (self.zeta_cell[c][x] * a[c][x] * a[c][x] - 2.0 * a[c][x] * cross);
            }
        }
        for i in 0..=m {
            for x in 0..len {
                let g2: f64 = (0..dim).map(|j| grads[i][j][x].powi(2)).sum();
                q += weight(i, m) * self.dz * self.rz_node[i][x] * g2;
            }
        }
        let flat = self.flat_term(&lift.levels[m]).map_or(0.0, |c| c.re().iter().zip(&lift.levels[m]).map(|(a, b)| a * b).sum());
        (q + flat) / len as f64
    }

    pub fn energy_and_flux(&self, f: &Field) -> Result<EnergyFlux> {
        let lift = self.solve_harmonic(f)?;
        let vol = self.grid().volume();
        let e2 = vol * self.quadratic_form(&lift);
        let flux = f.dot(&self.trace(&lift));
        Ok(EnergyFlux { energy: e2.max(0.0).sqrt(), flux, mismatch: (flux - e2).abs() })
    }

    /// `½ δQ/δη` at the minimizer, the exact surface gradient of
    /// `½⟨f, G_h(η) f⟩` for the discrete operator (δ held fixed in smoothing mode).
    pub fn energy_gradient(&self, lift: &HarmonicLift) -> Field {
        let g = self.grid();
        let (dim, n, len) = (g.dim(), g.n(), g.len());
        let m = self.cfg.m;
        let (a, mid, grads) = self.cells(&lift.levels);
        let mut acc = vec![C64::default(); len];
        let mut buf = vec![C64::default(); len];
        let add_scalar = |acc: &mut Vec<C64>, buf: &mut Vec<C64>, vals: &[f64], z: f64| {
            for x in 0..len {
                buf[x] = C64::from(vals[x]);
            }
            fft::forward(dim, n, buf);
            for k in 0..len {
                let (_, lz, _) = level_multipliers(self.map.mode, self.map.delta, z, g.abs_freq(k));
                acc[k] += buf[k] * lz;
            }
        };
        for i in 0..=m {
            let pn: Vec<f64> = (0..len)
                .map(|x| weight(i, m) * self.dz * (0..dim).map(|j| grads[i][j][x].powi(2)).sum::<f64>())
                .collect();
            add_scalar(&mut acc, &mut buf, &pn, self.map.z(i));
        }
        for c in 0..m {
            let z = self.map.fine_z(2 * c + 1);
            let pc: Vec<f64> = (0..len)
                .map(|x| -self.dz * self.zeta_cell[c][x] * a[c][x] * a[c][x] / self.rz_cell[c][x])
                .collect();
            add_scalar(&mut acc, &mut buf, &pc, z);
            let mut div = vec![C64::default(); len];
            for j in 0..dim {
                for x in 0..len {
                    let w = 2.0 * self.dz * a[c][x] * (self.grad_cell[c][j][x] * a[c][x] / self.rz_cell[c][x] - mid[c][j][x]);
                    buf[x] = C64::from(w);
                }
                fft::forward(dim, n, &mut buf);
                for k in 0..len {
                    div[k] += buf[k] * C64::new(0.0, self.kvec[k][j]);
                }
            }
            for k in 0..len {
                let (l, _, _) = level_multipliers(self.map.mode, self.map.delta, z, g.abs_freq(k));
                acc[k] -= div[k] * l;
            }
        }
        fft::inverse(dim, n, &mut acc);
        Field::from_real(g, acc.iter().map(|v| 0.5 * v.re).collect())
    }
}

trait ZipDiv {
    fn zip_div(&self, other: &Field) -> Field;
}

impl ZipDiv for Field {
    fn zip_div(&self, other: &Field) -> Field {
        Field::from_real(self.grid(), self.re().iter().zip(other.re()).map(|(a, b)| a / b).collect())
    }
}

/// `G(η)f` from the strip solve.
pub fn dn_apply(eta: &Field, f: &Field, cfg: DnConfig) -> Result<Field> {
    DnSolver::new(eta, cfg)?.apply(f)
}

/// Flat-bottom, flat-surface reference `|D|tanh(h|D|)`.
pub fn dn_flat_exact(f: &Field, h: f64) -> Field {
    let g = f.grid();
    f.spectral_map(f.is_real(), |i, c| {
        let k = g.abs_freq(i);
        c * k * (h * k).tanh()
    })
}

/// Flat-surface eigenvalue of the discrete strip operator at wavenumber `k`.
pub fn dn_flat_discrete_symbol(k: f64, h: f64, m: usize) -> f64 {
    if k == 0.0 {
        return 0.0;
    }
    let dz = 1.0 / m as f64;
    let theta = h * k * dz;
    let mu = (1.0 + theta * theta / 2.0).acosh();
    mu.sinh() * (mu * m as f64).tanh() / (h * dz)
}

pub fn energy_and_flux(eta: &Field, f: &Field, cfg: DnConfig) -> Result<EnergyFlux> {
    DnSolver::new(eta, cfg)?.energy_and_flux(f)
}

/// `−G(η)(Bf) − div(Vf)`, the derivative of `η ↦ G(η)ψ` in direction `f`.
pub fn shape_derivative(eta: &Field, psi: &Field, f: &Field, cfg: DnConfig) -> Result<Field> {
    let solver = DnSolver::new(eta, cfg)?;
    let gpsi = solver.apply(psi)?;
    let (b, v) = surface_velocities(eta, psi, &gpsi);
    let gbf = solver.apply(&(&b * f))?;
    let vf: Vec<Field> = v.iter().map(|c| c * f).collect();
    Ok(&(-&gbf) - &divergence(&vf))
}

#[derive(Clone, Debug)]
pub struct Paralinearization {
    pub exact: Field,
    pub approx: Field,
    pub residual: Field,
}

/// `T_λ(ψ − T̃_Bη) + T̃_V·∇η` against the strip value of `G(η)ψ`.
pub fn dn_paralinearized(eta: &Field, psi: &Field, cfg: DnConfig) -> Result<Paralinearization> {
    let exact = dn_apply(eta, psi, cfg)?;
    let (b, v) = surface_velocities(eta, psi, &exact);
    let lambda = build_symbol(SymbolKind::Lambda, eta, &SymbolParams::default())?;
    let good = psi - &paraproduct(&b, eta);
    let mut approx = quantize(&lambda, &good)?;
    for (j, vj) in v.iter().enumerate() {
        approx = &approx + &paraproduct(vj, &partial(eta, j));
    }
    let residual = &exact - &approx;
    Ok(Paralinearization { exact, approx, residual })
}

/// `|D|tanh(h|D|)` as a multiplier, for flat references.
pub fn flat_multiplier(grid: Grid, h: f64) -> Multiplier {
    Multiplier::radial(grid, 1.0, 0.0, move |k| k * (h * k).tanh()).expect("finite flat DN symbol")
}

/// `π k tanh(kh)`, the flat flux of `cos(kx)` over one period.
pub fn flat_flux_cos(k: f64, h: f64) -> f64 {
    PI * k * (k * h).tanh()
}

#[cfg(test)]
mod tests;
