//! Paradifferential calculus on the periodic lattice.
//!
//! A [`Symbol`] is stored as a row evaluator: for a fixed frequency `ξ` it
//! returns the values `a(x_j, ξ)` on every grid node. Quantization smooths
//! each row in `x` band by band and sums the resulting plane waves.

mod catalog;

pub use catalog::{build_symbol, SymbolKind, SymbolParams};

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::ops::RangeInclusive;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fft;
use crate::lp::{build_cutoff, smooth_step, BesovSpec};
use crate::spectral::{Field, Grid, C64};

pub type Wave = [f64; 2];
type RowFn = Arc<dyn Fn(Wave) -> Vec<C64> + Send + Sync>;
type DxiFn = Arc<dyn Fn(Wave, usize) -> Vec<C64> + Send + Sync>;

/// Band offset of the `x`-smoothing: band `k` of `u` sees `S_{k−offset}a`.
pub const SMOOTHING_OFFSET: i32 = 2;

/// Low-frequency cutoff `ψ`: 0 for `|η| ≤ 1/5`, 1 for `|η| ≥ 1/4`.
pub fn low_cut(r: f64) -> f64 {
    smooth_step((r - 0.2) / 0.05)
}

#[derive(Clone)]
pub struct Symbol {
    grid: Grid,
    order: f64,
    regularity: f64,
    real: bool,
    x_independent: bool,
    row: RowFn,
    dxi: Option<DxiFn>,
    principal: Option<Box<Symbol>>,
    name: String,
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Symbol")
            .field("name", &self.name)
            .field("order", &self.order)
            .field("regularity", &self.regularity)
            .field("real", &self.real)
            .field("x_independent", &self.x_independent)
            .field("analytic_dxi", &self.dxi.is_some())
            .finish()
    }
}

impl Symbol {
    /// General symbol from a row evaluator. The reality flag is off until
    /// set with [`Symbol::with_real_structure`].
    pub fn from_rows(
        grid: Grid,
        order: f64,
        row: impl Fn(Wave) -> Vec<C64> + Send + Sync + 'static,
    ) -> Symbol {
        Symbol {
            grid,
            order,
            regularity: f64::INFINITY,
            real: false,
            x_independent: false,
            row: Arc::new(row),
            dxi: None,
            principal: None,
            name: String::from("symbol"),
        }
    }

    /// `x`-independent symbol `a(ξ)`.
    pub fn fourier(
        grid: Grid,
        order: f64,
        f: impl Fn(Wave) -> C64 + Send + Sync + 'static,
    ) -> Symbol {
        let len = grid.len();
        let mut s = Symbol::from_rows(grid, order, move |xi| vec![f(xi); len]);
        s.x_independent = true;
        s.name = String::from("fourier");
        s
    }

    /// `|ξ|^m`, with its analytic `ξ`-gradient.
    pub fn abs_pow(grid: Grid, m: f64) -> Symbol {
        let len = grid.len();
        Symbol::fourier(grid, m, move |xi| C64::from(norm(xi).powf(m)))
            .with_dxi(move |xi, j| {
                let r = norm(xi);
                let d = if r == 0.0 { 0.0 } else { m * r.powf(m - 2.0) * xi[j] };
                vec![C64::from(d); len]
            })
            .with_real_structure(true)
            .named(&format!("|xi|^{m}"))
    }

    /// Multiplication by a function of `x` (order 0, `ξ`-independent).
    pub fn coefficient(a: &Field) -> Symbol {
        let grid = a.grid();
        let len = grid.len();
        let values: Arc<Vec<C64>> = Arc::new(a.values().to_vec());
        let real = a.is_real();
        Symbol::from_rows(grid, 0.0, move |_| values.as_ref().clone())
            .with_dxi(move |_, _| vec![C64::default(); len])
            .with_real_structure(real)
            .named("coefficient")
    }

    /// Transport symbol `iV·ξ`.
    pub fn transport(v: &[Field]) -> Symbol {
        let grid = v[0].grid();
        let comps: Arc<Vec<Vec<C64>>> = Arc::new(v.iter().map(|c| c.values().to_vec()).collect());
        let c2 = comps.clone();
        let real = v.iter().all(Field::is_real);
        Symbol::from_rows(grid, 1.0, move |xi| {
            let mut out = vec![C64::default(); comps[0].len()];
            for (j, c) in comps.iter().enumerate() {
                for (o, v) in out.iter_mut().zip(c) {
                    *o += C64::new(0.0, xi[j]) * v;
                }
            }
            out
        })
        .with_dxi(move |_, j| c2[j].iter().map(|v| C64::new(0.0, 1.0) * v).collect())
        .with_real_structure(real)
        .named("transport")
    }

    pub fn with_dxi(mut self, d: impl Fn(Wave, usize) -> Vec<C64> + Send + Sync + 'static) -> Symbol {
        self.dxi = Some(Arc::new(d));
        self
    }

    pub fn with_real_structure(mut self, real: bool) -> Symbol {
        self.real = real;
        self
    }

    pub fn with_regularity(mut self, rho: f64) -> Symbol {
        self.regularity = rho;
        self
    }

    pub fn with_principal(mut self, p: Symbol) -> Symbol {
        self.principal = Some(Box::new(p));
        self
    }

    pub fn named(mut self, name: &str) -> Symbol {
        self.name = name.to_string();
        self
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn regularity(&self) -> f64 {
        self.regularity
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Whether `a(x,−ξ) = conj a(x,ξ)` holds, so that `T_a` preserves real fields.
    pub fn has_real_structure(&self) -> bool {
        self.real
    }

    pub fn is_x_independent(&self) -> bool {
        self.x_independent
    }

    pub fn has_analytic_dxi(&self) -> bool {
        self.dxi.is_some()
    }

    /// Principal part if one was attached, otherwise the symbol itself.
    pub fn principal(&self) -> &Symbol {
        self.principal.as_deref().unwrap_or(self)
    }

    /// Values `a(x_j, ξ)` over all nodes.
    pub fn row(&self, xi: Wave) -> Vec<C64> {
        (self.row)(xi)
    }

    pub fn value(&self, node: usize, k: [i64; 2]) -> C64 {
        self.row([k[0] as f64, k[1] as f64])[node]
    }

    /// `∂_{ξ_j}a` row: analytic when available, else a centered difference
    /// with unit spacing.
    pub fn dxi_row(&self, xi: Wave, j: usize) -> Vec<C64> {
        if let Some(d) = &self.dxi {
            return d(xi, j);
        }
        let mut p = xi;
        let mut m = xi;
        p[j] += 1.0;
        m[j] -= 1.0;
        let a = self.row(p);
        let b = self.row(m);
        a.iter().zip(&b).map(|(x, y)| (x - y) * 0.5).collect()
    }

    /// `∂_ξ^α a` row. Orders above one are centered differences of the
    /// first derivative.
    pub fn deriv_row(&self, xi: Wave, alpha: [u32; 2]) -> Vec<C64> {
        let total = alpha[0] + alpha[1];
        if total == 0 {
            return self.row(xi);
        }
        if total == 1 {
            return self.dxi_row(xi, if alpha[0] == 1 { 0 } else { 1 });
        }
        let l = if alpha[0] >= 1 && (alpha[0] > 1 || alpha[1] >= 1) { 0 } else { 1 };
        let mut rest = alpha;
        rest[l] -= 1;
        let mut p = xi;
        let mut m = xi;
        p[l] += 1.0;
        m[l] -= 1.0;
        let a = self.deriv_row(p, rest);
        let b = self.deriv_row(m, rest);
        a.iter().zip(&b).map(|(x, y)| (x - y) * 0.5).collect()
    }

    pub fn scale(&self, c: C64) -> Symbol {
        let a = self.clone();
        let b = self.clone();
        let mut s = Symbol::from_rows(self.grid, self.order, move |xi| {
            a.row(xi).into_iter().map(|v| v * c).collect()
        });
        if self.dxi.is_some() {
            s = s.with_dxi(move |xi, j| b.dxi_row(xi, j).into_iter().map(|v| v * c).collect());
        }
        s.x_independent = self.x_independent;
        s.real = self.real && c.im == 0.0;
        s.regularity = self.regularity;
        s.named(&format!("{}*c", self.name))
    }

    pub fn sum(&self, other: &Symbol) -> Symbol {
        let (a, b) = (self.clone(), other.clone());
        let (da, db) = (self.clone(), other.clone());
        let mut s = Symbol::from_rows(self.grid, self.order.max(other.order), move |xi| {
            let mut r = a.row(xi);
            for (x, y) in r.iter_mut().zip(b.row(xi)) {
                *x += y;
            }
            r
        });
        if self.dxi.is_some() && other.dxi.is_some() {
            s = s.with_dxi(move |xi, j| {
                let mut r = da.dxi_row(xi, j);
                for (x, y) in r.iter_mut().zip(db.dxi_row(xi, j)) {
                    *x += y;
                }
                r
            });
        }
        s.x_independent = self.x_independent && other.x_independent;
        s.real = self.real && other.real;
        s.regularity = self.regularity.min(other.regularity);
        s.name = format!("{}+{}", self.name, other.name);
        s
    }

    pub fn sub(&self, other: &Symbol) -> Symbol {
        self.sum(&other.scale(C64::from(-1.0)))
    }

    pub fn product(&self, other: &Symbol) -> Symbol {
        let (a, b) = (self.clone(), other.clone());
        let (da, db) = (self.clone(), other.clone());
        let mut s = Symbol::from_rows(self.grid, self.order + other.order, move |xi| {
            let mut r = a.row(xi);
            for (x, y) in r.iter_mut().zip(b.row(xi)) {
                *x *= y;
            }
            r
        });
        if self.dxi.is_some() && other.dxi.is_some() {
            s = s.with_dxi(move |xi, j| {
                let (ra, rb) = (da.row(xi), db.row(xi));
                let (pa, pb) = (da.dxi_row(xi, j), db.dxi_row(xi, j));
                (0..ra.len()).map(|i| pa[i] * rb[i] + ra[i] * pb[i]).collect()
            });
        }
        s.x_independent = self.x_independent && other.x_independent;
        s.real = self.real && other.real;
        s.regularity = self.regularity.min(other.regularity);
        s.name = format!("({})({})", self.name, other.name);
        s
    }

    /// `a^e` on the principal branch, order `e·m`.
    pub fn powf(&self, e: f64) -> Symbol {
        let a = self.clone();
        let da = self.clone();
        let mut s = Symbol::from_rows(self.grid, self.order * e, move |xi| {
            a.row(xi).into_iter().map(|v| pow_c(v, e)).collect()
        });
        if self.dxi.is_some() {
            s = s.with_dxi(move |xi, j| {
                let r = da.row(xi);
                let d = da.dxi_row(xi, j);
                r.iter()
                    .zip(&d)
                    .map(|(v, dv)| if *v == C64::default() { C64::default() } else { pow_c(*v, e - 1.0) * dv * e })
                    .collect()
            });
        }
        s.x_independent = self.x_independent;
        s.real = self.real;
        s.regularity = self.regularity;
        s.name = format!("({})^{e}", self.name);
        s
    }

    pub fn recip(&self) -> Symbol {
        self.powf(-1.0)
    }

    /// Writes `x_0 [x_1] k_0 [k_1] re im`, one line per node and lattice frequency.
    pub fn dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let g = self.grid;
        writeln!(w, "# symbol {} order {} grid {} {}", self.name, self.order, g.dim(), g.n())?;
        for kidx in 0..g.len() {
            let k = g.freq(kidx);
            let row = self.row(g.wave(kidx));
            for (node, v) in row.iter().enumerate() {
                let x = g.node(node);
                if g.dim() == 1 {
                    writeln!(w, "{:.17e} {} {:.17e} {:.17e}", x[0], k[0], v.re, v.im)?;
                } else {
                    writeln!(w, "{:.17e} {:.17e} {} {} {:.17e} {:.17e}", x[0], x[1], k[0], k[1], v.re, v.im)?;
                }
            }
        }
        Ok(())
    }
}

fn norm(xi: Wave) -> f64 {
    (xi[0] * xi[0] + xi[1] * xi[1]).sqrt()
}

fn pow_c(v: C64, e: f64) -> C64 {
    if v.im == 0.0 && v.re >= 0.0 {
        C64::from(v.re.powf(e))
    } else {
        v.powf(e)
    }
}

/// Spectral `∂_{x_j}` of a complex row, Nyquist mode dropped.
pub(crate) fn dx_row(grid: Grid, row: &[C64], axis: usize) -> Vec<C64> {
    let mut c = row.to_vec();
    fft::forward(grid.dim(), grid.n(), &mut c);
    let half = (grid.n() / 2) as i64;
    for (i, v) in c.iter_mut().enumerate() {
        let k = grid.freq(i)[axis];
        *v = if k == half { C64::default() } else { *v * C64::new(0.0, k as f64) };
    }
    fft::inverse(grid.dim(), grid.n(), &mut c);
    c
}

fn phase_table(n: usize) -> Vec<C64> {
    (0..n).map(|m| C64::from_polar(1.0, 2.0 * PI * m as f64 / n as f64)).collect()
}

/// `T_a u` with the standard smoothing offset.
pub fn quantize(a: &Symbol, u: &Field) -> Result<Field> {
    quantize_with_offset(a, u, SMOOTHING_OFFSET)
}

/// Band-weighted x-smoothing of symbol rows shared by [`quantize_with_offset`]
/// and [`quantize_adjoint`].
struct Smoother {
    grid: Grid,
    depth: u32,
    theta: Vec<f64>,
    smoothers: Vec<Vec<f64>>,
    cut: crate::lp::DyadicCutoff,
}

impl Smoother {
    fn new(grid: Grid, offset: i32) -> Smoother {
        let cut = build_cutoff();
        let depth = grid.dyadic_depth();
        let theta: Vec<f64> = (0..grid.len()).map(|i| grid.abs_freq(i)).collect();
        let smoothers = (0..=depth)
            .map(|k| theta.iter().map(|&t| cut.kappa_k(k as i32 - offset, t)).collect())
            .collect();
        Smoother { grid, depth, theta, smoothers, cut }
    }

    /// `ψ(ξ)·(Σ_k φ_k(ξ) S_{k−offset}a)(·, ξ)` on the nodes, `None` when `ψ(ξ) = 0`.
    fn row(&self, a: &Symbol, idx: usize) -> Result<Option<Vec<C64>>> {
        let g = self.grid;
        let r = self.theta[idx];
        let psi = low_cut(r);
        if psi == 0.0 {
            return Ok(None);
        }
        let mut row = a.row(g.wave(idx));
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: a.name.clone(), k: g.freq(idx) });
        }
        if !a.x_independent {
            fft::forward(g.dim(), g.n(), &mut row);
            let mut weight = vec![0.0; g.len()];
            for band in 0..=self.depth {
                let p = self.cut.phi(band, r);
                if p == 0.0 {
                    continue;
                }
                for (w, s) in weight.iter_mut().zip(&self.smoothers[band as usize]) {
                    *w += p * s;
                }
            }
            for (v, w) in row.iter_mut().zip(&weight) {
                *v *= *w * psi;
            }
            fft::inverse(g.dim(), g.n(), &mut row);
        } else {
            let total: f64 = (0..=self.depth).map(|b| self.cut.phi(b, r)).sum();
            row.iter_mut().for_each(|v| *v *= total * psi);
        }
        Ok(Some(row))
    }
}

/// `T_a u = Σ_k (S_{k−offset} a)(x, D) ψ(D) Δ_k u`, where `S` acts on `x`.
pub fn quantize_with_offset(a: &Symbol, u: &Field, offset: i32) -> Result<Field> {
    let g = u.grid();
    g.check_same(&a.grid)?;
    let n = g.n();
    let len = g.len();
    let sm = Smoother::new(g, offset);
    let roots = phase_table(n);
    let real_out = a.real && u.is_real();
    let coeffs = u.coeffs();

    let mut acc = vec![C64::default(); len];
    for (idx, &c) in coeffs.iter().enumerate() {
        if c == C64::default() {
            continue;
        }
        let k = g.freq(idx);
        let mirror = g.index([-k[0], -k[1]]);
        let mult = if real_out {
            if mirror < idx {
                continue;
            }
            if mirror == idx { 1.0 } else { 2.0 }
        } else {
            1.0
        };
        let Some(row) = sm.row(a, idx)? else { continue };
        let amp = c * mult;
        let k0 = k[0].rem_euclid(n as i64) as usize;
        let k1 = k[1].rem_euclid(n as i64) as usize;
        for (node, (o, v)) in acc.iter_mut().zip(&row).enumerate() {
            let [i0, i1] = g.axis_indices(node);
            let ph = roots[(k0 * i0 + k1 * i1) % n];
            *o += amp * v * ph;
        }
    }
    Ok(if real_out {
        Field::from_real(g, acc.iter().map(|v| v.re).collect())
    } else {
        Field::from_complex(g, acc)
    })
}

/// The exact `L²` adjoint of `u ↦ T_a u`:
/// `(T_a^* v)^(ξ) = ⟨conj(a_S(·,ξ)) e^{−iξx} v⟩`.
pub fn quantize_adjoint(a: &Symbol, v: &Field) -> Result<Field> {
    let g = v.grid();
    g.check_same(&a.grid)?;
    let n = g.n();
    let len = g.len();
    let sm = Smoother::new(g, SMOOTHING_OFFSET);
    let roots = phase_table(n);
    let vals = v.values();
    let mut coeffs = vec![C64::default(); len];
    for (idx, c) in coeffs.iter_mut().enumerate() {
        let Some(row) = sm.row(a, idx)? else { continue };
        let k = g.freq(idx);
        let k0 = k[0].rem_euclid(n as i64) as usize;
        let k1 = k[1].rem_euclid(n as i64) as usize;
        let mut s = C64::default();
        for (node, (r, x)) in row.iter().zip(vals).enumerate() {
            let [i0, i1] = g.axis_indices(node);
            s += r.conj() * roots[(k0 * i0 + k1 * i1) % n].conj() * x;
        }
        *c = s / len as f64;
    }
    let out = Field::from_coeffs(g, coeffs, false);
    Ok(if a.real && v.is_real() { out.real_part() } else { out })
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho <= 2.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("expansion order rho = {rho} outside (0, 2]")))
    }
}

/// `a♯b = Σ_{|α|<ρ} (−i)^{|α|}/α! ∂_ξ^α a ∂_x^α b`, for `ρ ∈ (0, 2]`.
pub fn sharp_compose(a: &Symbol, b: &Symbol, rho: f64) -> Result<Symbol> {
    check_rho(rho)?;
    let base = a.product(b);
    if rho <= 1.0 || b.x_independent {
        return Ok(base.named(&format!("{}#{}", a.name, b.name)));
    }
    let (ac, bc) = (a.clone(), b.clone());
    let grid = a.grid;
    let dim = grid.dim();
    let mut s = Symbol::from_rows(grid, a.order + b.order, move |xi| {
        let mut out = base.row(xi);
        let rb = bc.row(xi);
        for j in 0..dim {
            let da = ac.dxi_row(xi, j);
            let db = dx_row(grid, &rb, j);
            for (o, (p, q)) in out.iter_mut().zip(da.iter().zip(&db)) {
                *o -= C64::new(0.0, 1.0) * p * q;
            }
        }
        out
    });
    s.real = a.real && b.real;
    s.regularity = a.regularity.min(b.regularity) - 1.0;
    Ok(s.named(&format!("{}#{}", a.name, b.name)))
}

/// `a* = Σ_{|α|<ρ} 1/(i^{|α|}α!) ∂_ξ^α ∂_x^α conj(a)`, for `ρ ∈ (0, 2]`.
pub fn adjoint_symbol(a: &Symbol, rho: f64) -> Result<Symbol> {
    check_rho(rho)?;
    let ac = a.clone();
    let grid = a.grid;
    let dim = grid.dim();
    let with_correction = rho > 1.0 && !a.x_independent;
    let mut s = Symbol::from_rows(grid, a.order, move |xi| {
        let mut out: Vec<C64> = ac.row(xi).iter().map(|v| v.conj()).collect();
        if with_correction {
            for j in 0..dim {
                let d: Vec<C64> = ac.dxi_row(xi, j).iter().map(|v| v.conj()).collect();
                let dd = dx_row(grid, &d, j);
                for (o, v) in out.iter_mut().zip(&dd) {
                    *o -= C64::new(0.0, 1.0) * v;
                }
            }
        }
        out
    });
    if !with_correction && a.dxi.is_some() {
        let dc = a.clone();
        s = s.with_dxi(move |xi, j| dc.dxi_row(xi, j).iter().map(|v| v.conj()).collect());
    }
    s.real = a.real;
    s.x_independent = a.x_independent;
    s.regularity = a.regularity;
    Ok(s.named(&format!("{}*", a.name)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeminormReport {
    pub m: f64,
    pub rho: f64,
    pub value: f64,
    /// Largest `|α|` included.
    pub derivatives: u32,
    pub argmax_k: [i64; 2],
    pub argmax_alpha: [u32; 2],
}

/// Discrete `M^m_ρ(a)`: sup over lattice `ξ ≠ 0` and `|α| ≤ ⌈d/2 + 1 + ρ⌉`
/// of `(1+|ξ|)^{|α|−m} ‖∂_ξ^α a(·, ξ)‖_{C^ρ_*}`.
pub fn seminorm(a: &Symbol, m: f64, rho: f64) -> SeminormReport {
    let g = a.grid;
    let max_deriv = (g.dim() as f64 / 2.0 + 1.0 + rho - 1e-12).ceil().max(0.0) as u32;
    let mut alphas = Vec::new();
    for a0 in 0..=max_deriv {
        if g.dim() == 1 {
            alphas.push([a0, 0]);
        } else {
            for a1 in 0..=(max_deriv - a0) {
                alphas.push([a0, a1]);
            }
        }
    }
    let spec = BesovSpec::zygmund(rho);
    let mut best = SeminormReport {
        m,
        rho,
        value: 0.0,
        derivatives: max_deriv,
        argmax_k: [0, 0],
        argmax_alpha: [0, 0],
    };
    for idx in 0..g.len() {
        let k = g.freq(idx);
        if k == [0, 0] {
            continue;
        }
        let xi = g.wave(idx);
        let weight_base = 1.0 + norm(xi);
        for &alpha in &alphas {
            let row = a.deriv_row(xi, alpha);
            let f = Field::from_complex(g, row);
            let order = (alpha[0] + alpha[1]) as f64;
            let v = weight_base.powf(order - m) * crate::lp::besov_norm(&f, spec);
            if v > best.value {
                best.value = v;
                best.argmax_k = k;
                best.argmax_alpha = alpha;
            }
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrderFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square deviation of the samples from the fitted line.
    pub residual: f64,
    /// `(j, log₂‖A u_j‖)` per usable band.
    pub samples: Vec<(u32, f64)>,
}

/// Lattice indices whose frequency lies where `φ_j ≡ 1`, excluding Nyquist.
pub fn band_core(grid: Grid, j: u32) -> Vec<usize> {
    let cut = build_cutoff();
    (0..grid.len())
        .filter(|&i| {
            let r = grid.abs_freq(i);
            r > 0.0 && !grid.is_nyquist(i) && cut.phi(j, r) == 1.0
        })
        .collect()
}

/// Random real field with spectrum on the core of band `j`, unit `L²` mean norm.
pub fn band_field(grid: Grid, j: u32, rng: &mut impl Rng) -> Option<Field> {
    let core = band_core(grid, j);
    if core.is_empty() {
        return None;
    }
    let mut c = vec![C64::default(); grid.len()];
    for &i in &core {
        c[i] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    }
    let mut sym = vec![C64::default(); grid.len()];
    for &i in &core {
        let k = grid.freq(i);
        let m = grid.index([-k[0], -k[1]]);
        sym[i] = (c[i] + c[m].conj()) * 0.5;
    }
    let f = Field::from_coeffs(grid, sym, true);
    let r = f.rms();
    (r > 0.0).then(|| f.scale(1.0 / r))
}

/// Fits the slope of `log₂‖A u_j‖_{L²}` against `j` over `bands`, each band
/// taking the largest response over a few random unit fields.
pub fn order_probe(
    grid: Grid,
    op: impl Fn(&Field) -> Result<Field>,
    bands: RangeInclusive<u32>,
    seed: u64,
) -> Result<OrderFit> {
    const TRIALS: usize = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::new();
    for j in bands {
        let mut best: f64 = 0.0;
        let mut usable = false;
        for _ in 0..TRIALS {
            let Some(u) = band_field(grid, j, &mut rng) else { break };
            usable = true;
            best = best.max(op(&u)?.rms());
        }
        if usable && best > 0.0 && best.is_finite() {
            samples.push((j, best.log2()));
        }
    }
    fit_line(samples)
}

/// Order fit of `T_aT_b − T_{a♯b}` with `♯` truncated at `ρ`.
pub fn composition_defect(a: &Symbol, b: &Symbol, rho: f64, bands: RangeInclusive<u32>, seed: u64) -> Result<OrderFit> {
    let c = sharp_compose(a, b, rho)?;
    order_probe(a.grid(), |u| Ok(&quantize(a, &quantize(b, u)?)? - &quantize(&c, u)?), bands, seed)
}

/// `|ξ|^{1/2}(1 + ¼ sin x)`, the standard test symbol for the composition law.
pub fn composition_test_symbol(grid: Grid) -> Symbol {
    let w = Field::from_fn(grid, |x| 1.0 + 0.25 * x[0].sin());
    Symbol::abs_pow(grid, 0.5).product(&Symbol::coefficient(&w)).named("sqrt_abs_xi_times_1_plus_sin_over_4")
}

pub(crate) fn fit_line(samples: Vec<(u32, f64)>) -> Result<OrderFit> {
    if samples.len() < 3 {
        return Err(Error::DegenerateFit(format!("{} usable bands, need 3", samples.len())));
    }
    let n = samples.len() as f64;
    let mx = samples.iter().map(|s| s.0 as f64).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let sxx: f64 = samples.iter().map(|s| (s.0 as f64 - mx).powi(2)).sum();
    let sxy: f64 = samples.iter().map(|s| (s.0 as f64 - mx) * (s.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (samples
        .iter()
        .map(|s| (s.1 - intercept - slope * s.0 as f64).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(OrderFit { slope, intercept, residual, samples })
}

#[derive(Clone, Debug)]
pub struct ParametrixOutcome {
    pub u: Field,
    /// `‖T_a u_n − v‖_{L²}` after each iteration.
    pub residuals: Vec<f64>,
}

/// Smallest `|a⁽ᵐ⁾(x,ξ)|/|ξ|^m` over nodes and lattice `ξ ≠ 0`.
pub fn ellipticity(a: &Symbol) -> f64 {
    let p = a.principal();
    let g = a.grid;
    let mut min = f64::INFINITY;
    for idx in 0..g.len() {
        let r = g.abs_freq(idx);
        if r == 0.0 {
            continue;
        }
        let scale = r.powf(-p.order);
        for v in p.row(g.wave(idx)) {
            min = min.min(v.norm() * scale);
        }
    }
    min
}

/// Neumann-series solution of `T_a u = v` with `b = 1/a⁽ᵐ⁾`:
/// `u_{n+1} = u_n + T_b(v − T_a u_n)`.
pub fn parametrix_invert(a: &Symbol, v: &Field, iterations: usize) -> Result<ParametrixOutcome> {
    const ELLIPTIC_FLOOR: f64 = 1e-8;
    let c = ellipticity(a);
    if !(c > ELLIPTIC_FLOOR) {
        return Err(Error::NotElliptic { min_ratio: c });
    }
    let b = a.principal().recip();
    let mut u = Field::zeros(v.grid());
    if !v.is_real() {
        u = u.complexify(&Field::zeros(v.grid()));
    }
    let mut residuals = Vec::with_capacity(iterations);
    let mut growth = 0;
    for it in 0..iterations {
        let r = v - &quantize(a, &u)?;
        u = &u + &quantize(&b, &r)?;
        let res = (&quantize(a, &u)? - v).rms();
        if let Some(&prev) = residuals.last() {
            growth = if res > prev { growth + 1 } else { 0 };
        }
        residuals.push(res);
        if growth >= 3 || !res.is_finite() {
            return Err(Error::Divergence { iteration: it + 1, residual: res });
        }
    }
    Ok(ParametrixOutcome { u, residuals })
}
