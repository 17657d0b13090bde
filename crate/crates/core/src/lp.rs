//! Littlewood–Paley blocks, Besov/Zygmund norms, paraproducts.

use std::io::Write;

use crate::error::{Error, Result};
use crate::spectral::{dealias, Field, C64};

/// Radial cutoff `κ`: 1 on `|θ| ≤ lo`, 0 on `|θ| ≥ hi`, smooth in between.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DyadicCutoff {
    lo: f64,
    hi: f64,
}

impl Default for DyadicCutoff {
    fn default() -> Self {
        DyadicCutoff { lo: 1.1, hi: 1.9 }
    }
}

pub(crate) fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / t).exp();
        let b = (-1.0 / (1.0 - t)).exp();
        a / (a + b)
    }
}

/// Standard cutoff with plateau thresholds 1.1 and 1.9.
pub fn build_cutoff() -> DyadicCutoff {
    DyadicCutoff::default()
}

impl DyadicCutoff {
    pub fn kappa(&self, theta: f64) -> f64 {
        1.0 - smooth_step((theta.abs() - self.lo) / (self.hi - self.lo))
    }

    /// `κ_k(θ) = κ(2^{-k}θ)`, any integer `k`.
    pub fn kappa_k(&self, k: i32, theta: f64) -> f64 {
        self.kappa(theta * 2f64.powi(-k))
    }

    /// Band function: `φ₀ = κ₀`, `φ_j = κ_j − κ_{j−1}`.
    pub fn phi(&self, j: u32, theta: f64) -> f64 {
        if j == 0 {
            self.kappa_k(0, theta)
        } else {
            self.kappa_k(j as i32, theta) - self.kappa_k(j as i32 - 1, theta)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exponent {
    One,
    Two,
    Infinity,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BesovSpec {
    pub s: f64,
    pub p: Exponent,
    pub q: Exponent,
}

impl BesovSpec {
    pub fn new(s: f64, p: Exponent, q: Exponent) -> Result<BesovSpec> {
        use Exponent::*;
        match (p, q) {
            (Two, Two) | (Infinity, Infinity) | (Infinity, One) => Ok(BesovSpec { s, p, q }),
            _ => Err(Error::InvalidParameter(format!("unsupported Besov exponents ({p:?}, {q:?})"))),
        }
    }

    /// Zygmund space `C^s_* = B^s_{∞,∞}`.
    pub fn zygmund(s: f64) -> BesovSpec {
        BesovSpec { s, p: Exponent::Infinity, q: Exponent::Infinity }
    }

    /// `𝔹^s = B^s_{∞,1}`.
    pub fn b1(s: f64) -> BesovSpec {
        BesovSpec { s, p: Exponent::Infinity, q: Exponent::One }
    }

    pub fn l2(s: f64) -> BesovSpec {
        BesovSpec { s, p: Exponent::Two, q: Exponent::Two }
    }
}

/// `Δ_j u = φ_j(|D|)u`.
pub fn dyadic_block(j: u32, u: &Field) -> Field {
    let c = build_cutoff();
    let g = u.grid();
    u.spectral_map(u.is_real(), |i, v| v * c.phi(j, g.abs_freq(i)))
}

/// `S_k u = κ_k(|D|)u`; for `k < 0` only the mean survives on the lattice.
pub fn low_pass(k: i32, u: &Field) -> Field {
    let c = build_cutoff();
    let g = u.grid();
    u.spectral_map(u.is_real(), |i, v| v * c.kappa_k(k, g.abs_freq(i)))
}

/// Blocks `Δ_0 … Δ_J` with `J = ⌈log₂ N⌉`; they sum to `u`.
pub fn blocks(u: &Field) -> Vec<Field> {
    (0..=u.grid().dyadic_depth()).map(|j| dyadic_block(j, u)).collect()
}

fn block_norm(p: Exponent, comps: &[Field]) -> f64 {
    let len = comps[0].values().len();
    let mag2 = |i: usize| comps.iter().map(|c| c.value(i).norm_sqr()).sum::<f64>();
    match p {
        Exponent::Infinity => (0..len).map(mag2).fold(0.0, f64::max).sqrt(),
        _ => ((0..len).map(mag2).sum::<f64>() / len as f64).sqrt(),
    }
}

fn combine(q: Exponent, terms: impl Iterator<Item = f64>) -> f64 {
    match q {
        Exponent::Infinity => terms.fold(0.0, f64::max),
        Exponent::One => terms.sum(),
        Exponent::Two => terms.map(|t| t * t).sum::<f64>().sqrt(),
    }
}

/// `ℓ^q_j(2^{js}‖Δ_j u‖_{L^p})`.
pub fn besov_norm(u: &Field, spec: BesovSpec) -> f64 {
    besov_norm_vec(std::slice::from_ref(u), spec)
}

/// Besov norm of a vector field; block norms use the pointwise Euclidean length.
pub fn besov_norm_vec(comps: &[Field], spec: BesovSpec) -> f64 {
    let depth = comps[0].grid().dyadic_depth();
    combine(
        spec.q,
        (0..=depth).map(|j| {
            let blocks: Vec<Field> = comps.iter().map(|c| dyadic_block(j, c)).collect();
            2f64.powf(j as f64 * spec.s) * block_norm(spec.p, &blocks)
        }),
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormRow {
    pub j: u32,
    pub block_sup: f64,
    pub weighted: f64,
}

/// Per-band table `(j, ‖Δ_j u‖_{L^p}, 2^{js}‖Δ_j u‖_{L^p})`.
pub fn norm_table(u: &Field, spec: BesovSpec) -> Vec<NormRow> {
    (0..=u.grid().dyadic_depth())
        .map(|j| {
            let b = block_norm(spec.p, &[dyadic_block(j, u)]);
            NormRow { j, block_sup: b, weighted: 2f64.powf(j as f64 * spec.s) * b }
        })
        .collect()
}

pub fn write_norm_table<W: Write>(rows: &[NormRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "j,block_sup,weighted")?;
    for r in rows {
        writeln!(w, "{},{:.17e},{:.17e}", r.j, r.block_sup, r.weighted)?;
    }
    Ok(())
}

fn paraproduct_impl(a: &Field, u: &Field, cut_low: bool) -> Field {
    assert_eq!(a.grid(), u.grid(), "paraproduct operands on different grids");
    let g = u.grid();
    let u = if cut_low { u.without_mean() } else { u.clone() };
    let mut acc = vec![C64::default(); g.len()];
    for k in 0..=g.dyadic_depth() {
        let du = dyadic_block(k, &u);
        if du.max_abs() == 0.0 {
            continue;
        }
        let sa = low_pass(k as i32 - 3, a);
        for (o, (x, y)) in acc.iter_mut().zip(sa.values().iter().zip(du.values())) {
            *o += x * y;
        }
    }
    let out = if a.is_real() && u.is_real() {
        Field::from_real(g, acc.iter().map(|v| v.re).collect())
    } else {
        Field::from_complex(g, acc)
    };
    dealias(&out)
}

/// `T̃_a u = Σ_k S_{k−3}a · Δ_k u`, dealiased.
pub fn paraproduct(a: &Field, u: &Field) -> Field {
    paraproduct_impl(a, u, false)
}

/// Paraproduct with the low-frequency cutoff `ψ(D)` applied to `u` first
/// (on the integer lattice `ψ(D)` removes the mean).
pub fn paraproduct_cut(a: &Field, u: &Field) -> Field {
    paraproduct_impl(a, u, true)
}

/// `R(a,u) = au − T̃_a u − T̃_u a`, with the product dealiased.
pub fn bony_remainder(a: &Field, u: &Field) -> Field {
    let prod = dealias(&(a * u));
    &(&prod - &paraproduct(a, u)) - &paraproduct(u, a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;
    use approx::assert_relative_eq;

    fn cosk(g: Grid, k: f64) -> Field {
        Field::from_fn(g, |x| (k * x[0]).cos())
    }

    #[test]
    fn cutoff_examples() {
        let c = build_cutoff();
        assert_eq!(c.kappa(1.0), 1.0);
        assert_eq!(c.kappa(2.0), 0.0);
        assert_eq!(c.phi(4, 16.0), 1.0);
        for j in 1..8u32 {
            let t = 2f64.powi(j as i32);
            assert_eq!(c.phi(j, t), 1.0);
            for k in 0..10u32 {
                if k != j {
                    assert_eq!(c.phi(k, t), 0.0);
                }
            }
        }
    }

    #[test]
    fn cutoff_monotone_and_telescoping() {
        let c = build_cutoff();
        let mut prev = 1.0;
        for i in 0..=400 {
            let t = i as f64 * 0.01;
            let k = c.kappa(t);
            assert!((0.0..=1.0).contains(&k));
            assert!(k <= prev + 1e-15);
            prev = k;
        }
        for i in 0..200 {
            let t = i as f64 * 0.37;
            for jj in 0..8u32 {
                let sum: f64 = (0..=jj).map(|j| c.phi(j, t)).sum();
                assert_relative_eq!(sum, c.kappa_k(jj as i32, t), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn block_examples() {
        let g = Grid::new(1, 64).unwrap();
        let u = cosk(g, 16.0);
        assert!((&dyadic_block(4, &u) - &u).max_abs() < 1e-13);
        assert!(dyadic_block(3, &u).max_abs() < 1e-13);
        let v = Field::from_fn(g, |x| x[0].sin() + (5.0 * x[0]).cos());
        assert!(low_pass(-1, &v).max_abs() < 1e-14);
        let w = &v + &Field::constant(g, 0.5);
        assert!((&low_pass(-2, &w) - &Field::constant(g, 0.5)).max_abs() < 1e-14);
    }

    #[test]
    fn besov_examples() {
        let g = Grid::new(1, 64).unwrap();
        let u = cosk(g, 16.0);
        assert_relative_eq!(besov_norm(&u, BesovSpec::zygmund(0.5)), 4.0, epsilon = 1e-12);
        assert_relative_eq!(besov_norm(&u, BesovSpec::b1(1.0)), 16.0, epsilon = 1e-12);
        assert_eq!(besov_norm(&Field::zeros(g), BesovSpec::l2(1.0)), 0.0);
        assert!(BesovSpec::new(1.0, Exponent::Two, Exponent::One).is_err());
        let rows = norm_table(&u, BesovSpec::zygmund(1.0));
        assert_eq!(rows.len(), 7);
        assert_relative_eq!(rows[4].weighted, 16.0, epsilon = 1e-12);
        let mut buf = Vec::new();
        write_norm_table(&rows, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("j,block_sup,weighted\n0,"));
    }

    #[test]
    fn paraproduct_examples() {
        let g = Grid::new(1, 64).unwrap();
        let one = Field::constant(g, 1.0);
        let c8 = cosk(g, 8.0);
        assert!((&paraproduct(&one, &c8) - &c8).max_abs() < 1e-13);
        let c1 = cosk(g, 1.0);
        let c16 = cosk(g, 16.0);
        assert!((&paraproduct(&c1, &c16) - &(&c1 * &c16)).max_abs() < 1e-13);
        assert!(paraproduct(&c1, &c1).max_abs() < 1e-14);
    }

    #[test]
    fn bony_examples() {
        let g = Grid::new(1, 64).unwrap();
        let c1 = cosk(g, 1.0);
        assert!((&bony_remainder(&c1, &c1) - &(&c1 * &c1)).max_abs() < 1e-13);
        let z = Field::zeros(g);
        assert!(bony_remainder(&z, &c1).max_abs() == 0.0);
        let one = Field::constant(g, 1.0);
        assert!(bony_remainder(&one, &cosk(g, 8.0)).max_abs() < 1e-13);
    }

    #[test]
    fn cut_variant_drops_mean_only() {
        let g = Grid::new(1, 64).unwrap();
        let a = Field::from_fn(g, |x| 1.0 + 0.2 * x[0].cos());
        let u = Field::from_fn(g, |x| 3.0 + (12.0 * x[0]).sin());
        let diff = &paraproduct(&a, &u) - &paraproduct_cut(&a, &u);
        let expect = low_pass(-3, &a).scale(3.0);
        assert!((&diff - &expect).max_abs() < 1e-13);
    }
}
