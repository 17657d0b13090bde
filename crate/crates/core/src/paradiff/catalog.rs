//! Named symbols built from the surface elevation.

use std::sync::Arc;

use super::{dx_row, Symbol, Wave};
use crate::error::{Error, Result};
use crate::spectral::{gradient, Field, Grid, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SymbolKind {
    /// `λ⁽¹⁾`
    Lambda1,
    /// `λ⁽⁰⁾`
    Lambda0,
    /// `λ = λ⁽¹⁾ + λ⁽⁰⁾`
    Lambda,
    /// `ℓ⁽²⁾`
    Ell2,
    /// `ℓ⁽¹⁾`
    Ell1,
    /// `ℓ = ℓ⁽²⁾ + ℓ⁽¹⁾`
    Ell,
    Q,
    /// `p⁽¹ᐟ²⁾`
    PHalf,
    /// `p⁽⁻¹ᐟ²⁾`
    PMinusHalf,
    P,
    /// `γ⁽³ᐟ²⁾ = √(ℓ⁽²⁾λ⁽¹⁾)`
    Gamma32,
    /// `γ⁽¹ᐟ²⁾`, the whole order-1/2 part of `γ`
    Gamma12,
    Gamma,
    /// `℘ = (γ⁽³ᐟ²⁾)^{2s/3}`
    Weight,
    /// `a⁽¹⁾`
    FactorMinus,
    /// `A⁽¹⁾`
    FactorPlus,
    /// `iV·ξ`
    Transport,
}

impl SymbolKind {
    pub const ALL: [SymbolKind; 17] = [
        SymbolKind::Lambda1,
        SymbolKind::Lambda0,
        SymbolKind::Lambda,
        SymbolKind::Ell2,
        SymbolKind::Ell1,
        SymbolKind::Ell,
        SymbolKind::Q,
        SymbolKind::PHalf,
        SymbolKind::PMinusHalf,
        SymbolKind::P,
        SymbolKind::Gamma32,
        SymbolKind::Gamma12,
        SymbolKind::Gamma,
        SymbolKind::Weight,
        SymbolKind::FactorMinus,
        SymbolKind::FactorPlus,
        SymbolKind::Transport,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SymbolKind::Lambda1 => "lambda1",
            SymbolKind::Lambda0 => "lambda0",
            SymbolKind::Lambda => "lambda",
            SymbolKind::Ell2 => "ell2",
            SymbolKind::Ell1 => "ell1",
            SymbolKind::Ell => "ell",
            SymbolKind::Q => "q",
            SymbolKind::PHalf => "p_half",
            SymbolKind::PMinusHalf => "p_minus_half",
            SymbolKind::P => "p",
            SymbolKind::Gamma32 => "gamma32",
            SymbolKind::Gamma12 => "gamma12",
            SymbolKind::Gamma => "gamma",
            SymbolKind::Weight => "weight",
            SymbolKind::FactorMinus => "a1",
            SymbolKind::FactorPlus => "A1",
            SymbolKind::Transport => "transport",
        }
    }

    pub fn parse(s: &str) -> Option<SymbolKind> {
        SymbolKind::ALL.into_iter().find(|k| k.label() == s)
    }
}

#[derive(Clone, Debug, Default)]
pub struct SymbolParams {
    /// Sobolev index in `℘`.
    pub s: f64,
    /// Drop subprincipal parts of `λ`, `ℓ`, `p`, `γ`.
    pub principal_only: bool,
    /// Strip coefficient `α` at the surface, for `a⁽¹⁾`, `A⁽¹⁾`.
    pub alpha: Option<Field>,
    /// Strip coefficient `β` at the surface.
    pub beta: Option<Vec<Field>>,
    /// Velocity `V` for the transport symbol.
    pub velocity: Option<Vec<Field>>,
}

type R = Vec<f64>;
type Cr = Vec<C64>;

/// Slope `∇η` and `w = 1 + |∇η|²` at every node.
struct Surface {
    grid: Grid,
    slope: Vec<[f64; 2]>,
    w: Vec<f64>,
}

impl Surface {
    fn new(eta: &Field) -> Surface {
        let grid = eta.grid();
        let grad = gradient(eta);
        let slope: Vec<[f64; 2]> = (0..grid.len())
            .map(|i| {
                let mut s = [0.0; 2];
                for (j, g) in grad.iter().enumerate() {
                    s[j] = g.value(i).re;
                }
                s
            })
            .collect();
        let w = slope.iter().map(|s| 1.0 + s[0] * s[0] + s[1] * s[1]).collect();
        Surface { grid, slope, w }
    }

    fn dim(&self) -> usize {
        self.grid.dim()
    }

    fn gxi(&self, i: usize, xi: Wave) -> f64 {
        self.slope[i][0] * xi[0] + self.slope[i][1] * xi[1]
    }

    fn dx(&self, row: &[C64], j: usize) -> Cr {
        dx_row(self.grid, row, j)
    }

    fn lam1(&self, xi: Wave) -> R {
        let r2 = xi[0] * xi[0] + xi[1] * xi[1];
        (0..self.w.len())
            .map(|i| (self.w[i] * r2 - self.gxi(i, xi).powi(2)).max(0.0).sqrt())
            .collect()
    }

    fn lam1_d(&self, xi: Wave, j: usize) -> R {
        let l = self.lam1(xi);
        (0..self.w.len())
            .map(|i| {
                if l[i] == 0.0 {
                    0.0
                } else {
                    (self.w[i] * xi[j] - self.gxi(i, xi) * self.slope[i][j]) / l[i]
                }
            })
            .collect()
    }

    fn alpha1(&self, xi: Wave) -> Cr {
        let l = self.lam1(xi);
        (0..self.w.len())
            .map(|i| C64::new(l[i], self.gxi(i, xi)) / self.w[i])
            .collect()
    }

    fn lam0(&self, xi: Wave) -> Cr {
        let l = self.lam1(xi);
        let a = self.alpha1(xi);
        let mut brace = vec![C64::default(); l.len()];
        for j in 0..self.dim() {
            let ag: Cr = a.iter().zip(&self.slope).map(|(v, s)| v * s[j]).collect();
            let d = self.dx(&ag, j);
            let da = self.dx(&a, j);
            let lj = self.lam1_d(xi, j);
            for i in 0..l.len() {
                brace[i] += d[i] + C64::new(0.0, lj[i]) * da[i];
            }
        }
        (0..l.len())
            .map(|i| if l[i] == 0.0 { C64::default() } else { brace[i] * (self.w[i] / (2.0 * l[i])) })
            .collect()
    }

    fn q(&self) -> R {
        self.w.iter().map(|w| w.powf(-0.5)).collect()
    }

    fn ell2(&self, xi: Wave) -> R {
        let r2 = xi[0] * xi[0] + xi[1] * xi[1];
        (0..self.w.len())
            .map(|i| self.w[i].powf(-0.5) * (r2 - self.gxi(i, xi).powi(2) / self.w[i]))
            .collect()
    }

    fn ell2_d(&self, xi: Wave, j: usize) -> R {
        (0..self.w.len())
            .map(|i| self.w[i].powf(-0.5) * (2.0 * xi[j] - 2.0 * self.gxi(i, xi) * self.slope[i][j] / self.w[i]))
            .collect()
    }

    fn ell1(&self, xi: Wave) -> Cr {
        let mut out = vec![C64::default(); self.w.len()];
        for j in 0..self.dim() {
            let d = self.dx(&cx(&self.ell2_d(xi, j)), j);
            for (o, v) in out.iter_mut().zip(&d) {
                *o += C64::new(0.0, -0.5) * v;
            }
        }
        out
    }

    fn p_half(&self, xi: Wave) -> R {
        let l = self.lam1(xi);
        (0..l.len()).map(|i| self.w[i].powf(-1.25) * l[i].sqrt()).collect()
    }

    fn p_half_d(&self, xi: Wave, j: usize) -> R {
        let l = self.lam1(xi);
        let lj = self.lam1_d(xi, j);
        (0..l.len())
            .map(|i| if l[i] == 0.0 { 0.0 } else { self.w[i].powf(-1.25) * lj[i] / (2.0 * l[i].sqrt()) })
            .collect()
    }

    fn g32(&self, xi: Wave) -> R {
        let l = self.lam1(xi);
        let e = self.ell2(xi);
        (0..l.len()).map(|i| (e[i] * l[i]).max(0.0).sqrt()).collect()
    }

    fn g32_d(&self, xi: Wave, j: usize) -> R {
        let l = self.lam1(xi);
        let lj = self.lam1_d(xi, j);
        let e = self.ell2(xi);
        let ej = self.ell2_d(xi, j);
        let g = self.g32(xi);
        (0..l.len())
            .map(|i| if g[i] == 0.0 { 0.0 } else { (ej[i] * l[i] + e[i] * lj[i]) / (2.0 * g[i]) })
            .collect()
    }

    fn g12(&self, xi: Wave) -> Cr {
        let l = self.lam1(xi);
        let e = self.ell2(xi);
        let l0 = self.lam0(xi);
        let mut out: Cr = (0..l.len())
            .map(|i| C64::from(if l[i] == 0.0 { 0.0 } else { (e[i] / l[i]).max(0.0).sqrt() * l0[i].re / 2.0 }))
            .collect();
        for j in 0..self.dim() {
            let d = self.dx(&cx(&self.g32_d(xi, j)), j);
            for (o, v) in out.iter_mut().zip(&d) {
                *o += C64::new(0.0, -0.5) * v;
            }
        }
        out
    }

    fn gamma(&self, xi: Wave, principal_only: bool) -> Cr {
        let g = self.g32(xi);
        if principal_only {
            return cx(&g);
        }
        self.g12(xi).iter().zip(&g).map(|(h, a)| h + a).collect()
    }

    fn p_minus(&self, xi: Wave) -> Cr {
        let g = self.g32(xi);
        let h = self.g12(xi);
        let q = self.q();
        let l1 = self.ell1(xi);
        let ph = self.p_half(xi);
        let mut out: Cr = (0..g.len()).map(|i| q[i] * l1[i] - h[i] * ph[i]).collect();
        let ph_c = cx(&ph);
        for j in 0..self.dim() {
            let gj = self.g32_d(xi, j);
            let dp = self.dx(&ph_c, j);
            for i in 0..g.len() {
                out[i] += C64::new(0.0, gj[i]) * dp[i];
            }
        }
        for i in 0..g.len() {
            out[i] = if g[i] == 0.0 { C64::default() } else { out[i] / g[i] };
        }
        out
    }
}

fn cx(r: &[f64]) -> Cr {
    r.iter().map(|&v| C64::from(v)).collect()
}

fn real_symbol(
    surf: &Arc<Surface>,
    order: f64,
    f: impl Fn(&Surface, Wave) -> R + Send + Sync + 'static,
    d: impl Fn(&Surface, Wave, usize) -> R + Send + Sync + 'static,
) -> Symbol {
    let (a, b) = (surf.clone(), surf.clone());
    Symbol::from_rows(surf.grid, order, move |xi| cx(&f(&a, xi)))
        .with_dxi(move |xi, j| cx(&d(&b, xi, j)))
        .with_real_structure(true)
}

fn complex_symbol(
    surf: &Arc<Surface>,
    order: f64,
    f: impl Fn(&Surface, Wave) -> Cr + Send + Sync + 'static,
) -> Symbol {
    let a = surf.clone();
    Symbol::from_rows(surf.grid, order, move |xi| f(&a, xi)).with_real_structure(true)
}

fn coefficient_rows(f: &Field) -> Vec<f64> {
    f.values().iter().map(|v| v.re).collect()
}

fn factor(eta: &Field, params: &SymbolParams, sign: f64) -> Result<Symbol> {
    let grid = eta.grid();
    let alpha = params
        .alpha
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("factorization symbols need alpha".into()))?;
    let beta = params
        .beta
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("factorization symbols need beta".into()))?;
    let al = Arc::new(coefficient_rows(alpha));
    let be: Arc<Vec<Vec<f64>>> = Arc::new(beta.iter().map(coefficient_rows).collect());
    for kidx in 0..grid.len() {
        let xi = grid.wave(kidx);
        let r2 = xi[0] * xi[0] + xi[1] * xi[1];
        for i in 0..grid.len() {
            let bx: f64 = be.iter().enumerate().map(|(j, b)| b[i] * xi[j]).sum();
            let disc = 4.0 * al[i] * r2 - bx * bx;
            if disc < 0.0 {
                return Err(Error::Discriminant { node: i, k: grid.freq(kidx), value: disc });
            }
        }
    }
    let (al2, be2) = (al.clone(), be.clone());
    let row = move |xi: Wave| -> Cr {
        let r2 = xi[0] * xi[0] + xi[1] * xi[1];
        (0..al.len())
            .map(|i| {
                let bx: f64 = be.iter().enumerate().map(|(j, b)| b[i] * xi[j]).sum();
                let root = (4.0 * al[i] * r2 - bx * bx).max(0.0).sqrt();
                C64::new(sign * root, -bx) * 0.5
            })
            .collect()
    };
    let dxi = move |xi: Wave, j: usize| -> Cr {
        let r2 = xi[0] * xi[0] + xi[1] * xi[1];
        (0..al2.len())
            .map(|i| {
                let bx: f64 = be2.iter().enumerate().map(|(l, b)| b[i] * xi[l]).sum();
                let root = (4.0 * al2[i] * r2 - bx * bx).max(0.0).sqrt();
                let dr = if root == 0.0 { 0.0 } else { (4.0 * al2[i] * xi[j] - bx * be2[j][i]) / root };
                C64::new(sign * dr, -be2[j][i]) * 0.5
            })
            .collect()
    };
    Ok(Symbol::from_rows(grid, 1.0, row).with_dxi(dxi).with_real_structure(true))
}

/// Builds the named symbol for surface `η`. All `x`-derivatives are spectral.
pub fn build_symbol(kind: SymbolKind, eta: &Field, params: &SymbolParams) -> Result<Symbol> {
    if !eta.is_real() {
        return Err(Error::InvalidParameter("surface elevation must be real".into()));
    }
    let surf = Arc::new(Surface::new(eta));
    let po = params.principal_only;
    let lam1 = || real_symbol(&surf, 1.0, |s, xi| s.lam1(xi), |s, xi, j| s.lam1_d(xi, j)).with_regularity(1.5);
    let ell2 = || real_symbol(&surf, 2.0, |s, xi| s.ell2(xi), |s, xi, j| s.ell2_d(xi, j)).with_regularity(1.5);
    let p_half = || {
        real_symbol(&surf, 0.5, |s, xi| s.p_half(xi), |s, xi, j| s.p_half_d(xi, j)).with_regularity(1.5)
    };
    let g32 = || real_symbol(&surf, 1.5, |s, xi| s.g32(xi), |s, xi, j| s.g32_d(xi, j)).with_regularity(1.5);
    let sym = match kind {
        SymbolKind::Lambda1 => lam1(),
        SymbolKind::Lambda0 => complex_symbol(&surf, 0.0, |s, xi| s.lam0(xi)).with_regularity(0.5),
        SymbolKind::Lambda => {
            if po {
                lam1()
            } else {
                complex_symbol(&surf, 1.0, |s, xi| {
                    let mut r = s.lam0(xi);
                    for (v, l) in r.iter_mut().zip(s.lam1(xi)) {
                        *v += l;
                    }
                    r
                })
                .with_regularity(0.5)
                .with_principal(lam1())
            }
        }
        SymbolKind::Ell2 => ell2(),
        SymbolKind::Ell1 => complex_symbol(&surf, 1.0, |s, xi| s.ell1(xi)).with_regularity(0.5),
        SymbolKind::Ell => {
            if po {
                ell2()
            } else {
                complex_symbol(&surf, 2.0, |s, xi| {
                    let mut r = s.ell1(xi);
                    for (v, l) in r.iter_mut().zip(s.ell2(xi)) {
                        *v += l;
                    }
                    r
                })
                .with_regularity(0.5)
                .with_principal(ell2())
            }
        }
        SymbolKind::Q => {
            let len = surf.grid.len();
            real_symbol(&surf, 0.0, |s, _| s.q(), move |_, _, _| vec![0.0; len]).with_regularity(1.5)
        }
        SymbolKind::PHalf => p_half(),
        SymbolKind::PMinusHalf => complex_symbol(&surf, -0.5, |s, xi| s.p_minus(xi)).with_regularity(0.5),
        SymbolKind::P => {
            if po {
                p_half()
            } else {
                complex_symbol(&surf, 0.5, |s, xi| {
                    let mut r = s.p_minus(xi);
                    for (v, l) in r.iter_mut().zip(s.p_half(xi)) {
                        *v += l;
                    }
                    r
                })
                .with_regularity(0.5)
                .with_principal(p_half())
            }
        }
        SymbolKind::Gamma32 => g32(),
        SymbolKind::Gamma12 => {
            complex_symbol(&surf, 0.5, |s, xi| s.g12(xi)).with_regularity(0.5)
        }
        SymbolKind::Gamma => {
            if po {
                g32()
            } else {
                complex_symbol(&surf, 1.5, |s, xi| s.gamma(xi, false))
                    .with_regularity(0.5)
                    .with_principal(g32())
            }
        }
        SymbolKind::Weight => {
            if !(params.s > 0.0) {
                return Err(Error::InvalidParameter(format!("weight needs s > 0, got {}", params.s)));
            }
            let e = 2.0 * params.s / 3.0;
            g32().powf(e)
        }
        SymbolKind::FactorMinus => factor(eta, params, -1.0)?,
        SymbolKind::FactorPlus => factor(eta, params, 1.0)?,
        SymbolKind::Transport => {
            let v = params
                .velocity
                .as_ref()
                .ok_or_else(|| Error::InvalidParameter("transport symbol needs a velocity".into()))?;
            if v.len() != eta.grid().dim() {
                return Err(Error::InvalidParameter("velocity has the wrong number of components".into()));
            }
            Symbol::transport(v)
        }
    };
    Ok(sym.named(kind.label()))
}
