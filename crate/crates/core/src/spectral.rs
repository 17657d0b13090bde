//! Periodic grids, fields with cached Fourier coefficients, multipliers.
//!
//! Period is 2π on every axis, so wavenumbers are integers. Coefficients are
//! average-normalized: `û_k = N^{-d} Σ_j u(x_j) e^{-ik·x_j}`.

use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;

pub type C64 = Complex64;

pub const PERIOD: f64 = 2.0 * PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Grid {
    dim: usize,
    n: usize,
}

impl Grid {
    pub fn new(dim: usize, n: usize) -> Result<Grid> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in {{1,2}}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("N = {n} must be a power of two >= 8")));
        }
        Ok(Grid { dim, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of nodes, `N^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        PERIOD / self.n as f64
    }

    /// Measure of the torus, `(2π)^d`.
    pub fn volume(&self) -> f64 {
        PERIOD.powi(self.dim as i32)
    }

    /// `⌈log₂ N⌉`, the last dyadic band that can carry lattice frequencies.
    pub fn dyadic_depth(&self) -> u32 {
        self.n.trailing_zeros()
    }

    /// Integer wavenumber of axis index `i`, in `{-N/2+1, …, N/2}`.
    pub fn wavenumber(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i <= n / 2 {
            i
        } else {
            i - n
        }
    }

    pub fn axis_indices(&self, idx: usize) -> [usize; 2] {
        if self.dim == 1 {
            [idx, 0]
        } else {
            [idx / self.n, idx % self.n]
        }
    }

    pub fn freq(&self, idx: usize) -> [i64; 2] {
        let [i0, i1] = self.axis_indices(idx);
        if self.dim == 1 {
            [self.wavenumber(i0), 0]
        } else {
            [self.wavenumber(i0), self.wavenumber(i1)]
        }
    }

    pub fn wave(&self, idx: usize) -> [f64; 2] {
        let k = self.freq(idx);
        [k[0] as f64, k[1] as f64]
    }

    pub fn abs_freq(&self, idx: usize) -> f64 {
        let k = self.wave(idx);
        (k[0] * k[0] + k[1] * k[1]).sqrt()
    }

    /// True when some component sits on the unpaired frequency `N/2`.
    pub fn is_nyquist(&self, idx: usize) -> bool {
        let half = (self.n / 2) as i64;
        let k = self.freq(idx);
        k[0] == half || (self.dim == 2 && k[1] == half)
    }

    /// Storage index of a wavenumber, wrapping modulo `N`.
    pub fn index(&self, k: [i64; 2]) -> usize {
        let n = self.n as i64;
        let i0 = k[0].rem_euclid(n) as usize;
        if self.dim == 1 {
            i0
        } else {
            i0 * self.n + k[1].rem_euclid(n) as usize
        }
    }

    pub fn node(&self, idx: usize) -> [f64; 2] {
        let [i0, i1] = self.axis_indices(idx);
        let h = self.dx();
        if self.dim == 1 {
            [i0 as f64 * h, 0.0]
        } else {
            [i0 as f64 * h, i1 as f64 * h]
        }
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}

/// A grid function together with its lazily computed Fourier coefficients.
#[derive(Clone, Debug)]
pub struct Field {
    grid: Grid,
    values: Vec<C64>,
    coeffs: OnceLock<Vec<C64>>,
    real: bool,
}

impl Field {
    pub fn zeros(grid: Grid) -> Field {
        Field::from_real(grid, vec![0.0; grid.len()])
    }

    pub fn constant(grid: Grid, c: f64) -> Field {
        Field::from_real(grid, vec![c; grid.len()])
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Field {
        let values = (0..grid.len()).map(|i| f(grid.node(i))).collect();
        Field::from_real(grid, values)
    }

    pub fn from_complex_fn(grid: Grid, f: impl Fn([f64; 2]) -> C64) -> Field {
        let values = (0..grid.len()).map(|i| f(grid.node(i))).collect();
        Field::from_complex(grid, values)
    }

    pub fn from_real(grid: Grid, values: Vec<f64>) -> Field {
        assert_eq!(values.len(), grid.len(), "value count does not match grid");
        Field {
            grid,
            values: values.into_iter().map(|v| C64::new(v, 0.0)).collect(),
            coeffs: OnceLock::new(),
            real: true,
        }
    }

    pub fn from_complex(grid: Grid, values: Vec<C64>) -> Field {
        assert_eq!(values.len(), grid.len(), "value count does not match grid");
        Field {
            grid,
            values,
            coeffs: OnceLock::new(),
            real: false,
        }
    }

    /// Synthesizes a field from coefficients. With `real` set, the imaginary
    /// part of the synthesized values is discarded.
    pub fn from_coeffs(grid: Grid, coeffs: Vec<C64>, real: bool) -> Field {
        assert_eq!(coeffs.len(), grid.len(), "coefficient count does not match grid");
        let mut values = coeffs.clone();
        fft::inverse(grid.dim, grid.n, &mut values);
        if real {
            for v in values.iter_mut() {
                v.im = 0.0;
            }
        }
        let cell = OnceLock::new();
        if !real {
            let _ = cell.set(coeffs);
        }
        Field {
            grid,
            values,
            coeffs: cell,
            real,
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn re(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn value(&self, idx: usize) -> C64 {
        self.values[idx]
    }

    pub fn coeffs(&self) -> &[C64] {
        self.coeffs.get_or_init(|| {
            let mut c = self.values.clone();
            fft::forward(self.grid.dim, self.grid.n, &mut c);
            c
        })
    }

    pub fn coeff(&self, k: [i64; 2]) -> C64 {
        self.coeffs()[self.grid.index(k)]
    }

    fn zip(&self, other: &Field, f: impl Fn(C64, C64) -> C64) -> Field {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| f(*a, *b))
            .collect();
        Field::with_values(self.grid, values, self.real && other.real)
    }

    fn with_values(grid: Grid, values: Vec<C64>, real: bool) -> Field {
        Field {
            grid,
            values,
            coeffs: OnceLock::new(),
            real,
        }
    }

    pub fn scale(&self, c: f64) -> Field {
        Field::with_values(self.grid, self.values.iter().map(|v| v * c).collect(), self.real)
    }

    pub fn scale_complex(&self, c: C64) -> Field {
        Field::with_values(self.grid, self.values.iter().map(|v| v * c).collect(), false)
    }

    /// Pointwise map of a real field.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        let values = self.values.iter().map(|v| C64::new(f(v.re), 0.0)).collect();
        Field::with_values(self.grid, values, true)
    }

    pub fn map_complex(&self, f: impl Fn(C64) -> C64) -> Field {
        Field::with_values(self.grid, self.values.iter().map(|v| f(*v)).collect(), false)
    }

    pub fn real_part(&self) -> Field {
        self.map(|v| v)
    }

    pub fn imag_part(&self) -> Field {
        let values = self.values.iter().map(|v| C64::new(v.im, 0.0)).collect();
        Field::with_values(self.grid, values, true)
    }

    pub fn conj(&self) -> Field {
        Field::with_values(self.grid, self.values.iter().map(|v| v.conj()).collect(), self.real)
    }

    /// `self + i·other` for real `self`, `other`.
    pub fn complexify(&self, imag: &Field) -> Field {
        let mut f = self.zip(imag, |a, b| C64::new(a.re, b.re));
        f.real = false;
        f
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn min_re(&self) -> f64 {
        self.values.iter().map(|v| v.re).fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> C64 {
        self.values.iter().sum::<C64>() / self.values.len() as f64
    }

    /// Root-mean-square over the grid (equals the `s = 0` Sobolev norm).
    pub fn rms(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.values.len() as f64).sqrt()
    }

    /// `∫ Re(u) dx` over the torus.
    pub fn integral(&self) -> f64 {
        self.mean().re * self.grid.volume()
    }

    /// `∫ Re(u·v) dx` over the torus.
    pub fn dot(&self, other: &Field) -> f64 {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a * b).re)
            .sum();
        s / self.values.len() as f64 * self.grid.volume()
    }

    pub fn without_mean(&self) -> Field {
        let m = self.mean();
        let m = if self.real { C64::new(m.re, 0.0) } else { m };
        Field::with_values(self.grid, self.values.iter().map(|v| v - m).collect(), self.real)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Applies `f(idx, û_idx)` to every coefficient and synthesizes the result.
    pub fn spectral_map(&self, real_out: bool, f: impl Fn(usize, C64) -> C64) -> Field {
        let coeffs = self.coeffs().iter().enumerate().map(|(i, c)| f(i, *c)).collect();
        Field::from_coeffs(self.grid, coeffs, real_out)
    }

    /// Shifts by `(s0, s1)` grid nodes: `out(x_j) = u(x_{j+s})`.
    pub fn shift_nodes(&self, s: [usize; 2]) -> Field {
        let g = self.grid;
        let n = g.n;
        let values = (0..g.len())
            .map(|idx| {
                let [i0, i1] = g.axis_indices(idx);
                let src = if g.dim == 1 {
                    (i0 + s[0]) % n
                } else {
                    ((i0 + s[0]) % n) * n + (i1 + s[1]) % n
                };
                self.values[src]
            })
            .collect();
        Field::with_values(g, values, self.real)
    }
}

impl Add for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        self.zip(rhs, |a, b| a + b)
    }
}

impl Sub for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        self.zip(rhs, |a, b| a - b)
    }
}

impl Mul for &Field {
    type Output = Field;
    fn mul(self, rhs: &Field) -> Field {
        self.zip(rhs, |a, b| a * b)
    }
}

impl Mul<f64> for &Field {
    type Output = Field;
    fn mul(self, rhs: f64) -> Field {
        self.scale(rhs)
    }
}

impl Neg for &Field {
    type Output = Field;
    fn neg(self) -> Field {
        self.scale(-1.0)
    }
}

impl Add for Field {
    type Output = Field;
    fn add(self, rhs: Field) -> Field {
        &self + &rhs
    }
}

impl Sub for Field {
    type Output = Field;
    fn sub(self, rhs: Field) -> Field {
        &self - &rhs
    }
}

/// A Fourier multiplier `m(ξ)` sampled on the frequency lattice.
#[derive(Clone, Debug)]
pub struct Multiplier {
    grid: Grid,
    values: Vec<C64>,
    order: f64,
    hermitian: bool,
}

impl Multiplier {
    /// Samples `f` at every nonzero lattice frequency; `at_zero` is used at ξ = 0.
    pub fn new(grid: Grid, order: f64, at_zero: C64, f: impl Fn([f64; 2]) -> C64) -> Result<Multiplier> {
        let mut values = Vec::with_capacity(grid.len());
        for idx in 0..grid.len() {
            let v = if idx == 0 { at_zero } else { f(grid.wave(idx)) };
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::NonFinite {
                    what: "multiplier".into(),
                    k: grid.freq(idx),
                });
            }
            values.push(v);
        }
        let hermitian = (0..grid.len()).all(|idx| {
            if grid.is_nyquist(idx) {
                return true;
            }
            let k = grid.freq(idx);
            let mirror = values[grid.index([-k[0], -k[1]])];
            (mirror - values[idx].conj()).norm() <= 1e-14 * (1.0 + values[idx].norm())
        });
        Ok(Multiplier {
            grid,
            values,
            order,
            hermitian,
        })
    }

    /// Real radial multiplier `m(|ξ|)`.
    pub fn radial(grid: Grid, order: f64, at_zero: f64, f: impl Fn(f64) -> f64) -> Result<Multiplier> {
        Multiplier::new(grid, order, C64::new(at_zero, 0.0), |k| {
            C64::new(f((k[0] * k[0] + k[1] * k[1]).sqrt()), 0.0)
        })
    }

    /// `|D|^s` with the value `at_zero` at the origin.
    pub fn abs_pow(grid: Grid, s: f64, at_zero: f64) -> Result<Multiplier> {
        Multiplier::radial(grid, s, at_zero, |r| r.powf(s))
    }

    /// `⟨D⟩ = (1+|D|²)^{1/2}`.
    pub fn japanese(grid: Grid) -> Multiplier {
        Multiplier::radial(grid, 1.0, 1.0, |r| (1.0 + r * r).sqrt()).expect("finite")
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn apply(&self, u: &Field) -> Result<Field> {
        self.grid.check_same(&u.grid())?;
        let real = u.is_real() && self.hermitian;
        Ok(u.spectral_map(real, |i, c| c * self.values[i]))
    }

    /// Pointwise product `m₁·m₂`.
    pub fn compose(&self, other: &Multiplier) -> Result<Multiplier> {
        self.grid.check_same(&other.grid)?;
        Ok(Multiplier {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
            order: self.order + other.order,
            hermitian: self.hermitian && other.hermitian,
        })
    }
}

pub fn apply_multiplier(m: &Multiplier, u: &Field) -> Result<Field> {
    m.apply(u)
}

/// `(Σ_k (1+|k|²)^s |û_k|²)^{1/2}`.
pub fn sobolev_norm(u: &Field, s: f64) -> f64 {
    let g = u.grid();
    u.coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let k2 = g.abs_freq(i).powi(2);
            (1.0 + k2).powf(s) * c.norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}

/// 2/3-rule truncation: zeroes modes with some `|k_i| > N/3`.
pub fn dealias(u: &Field) -> Field {
    let g = u.grid();
    let cut = g.n() as f64 / 3.0;
    u.spectral_map(u.is_real(), |i, c| {
        let k = g.freq(i);
        if (k[0].abs() as f64) > cut || (k[1].abs() as f64) > cut {
            C64::default()
        } else {
            c
        }
    })
}

/// Spectral partial derivative along `axis`. The unpaired `N/2` mode is
/// dropped so real fields stay real.
pub fn partial(u: &Field, axis: usize) -> Field {
    let g = u.grid();
    let half = (g.n() / 2) as i64;
    u.spectral_map(u.is_real(), |i, c| {
        let k = g.freq(i)[axis];
        if k == half {
            C64::default()
        } else {
            c * C64::new(0.0, k as f64)
        }
    })
}

pub fn gradient(u: &Field) -> Vec<Field> {
    (0..u.grid().dim()).map(|a| partial(u, a)).collect()
}

pub fn divergence(v: &[Field]) -> Field {
    let mut out = partial(&v[0], 0);
    for (axis, comp) in v.iter().enumerate().skip(1) {
        out = &out + &partial(comp, axis);
    }
    out
}

pub fn laplacian(u: &Field) -> Field {
    let g = u.grid();
    u.spectral_map(u.is_real(), |i, c| -c * g.abs_freq(i).powi(2))
}

/// Pointwise Euclidean dot product of two vector fields.
pub fn dot_vec(a: &[Field], b: &[Field]) -> Field {
    let mut out = &a[0] * &b[0];
    for (x, y) in a.iter().zip(b).skip(1) {
        out = &out + &(x * y);
    }
    out
}

pub fn norm_sqr_vec(a: &[Field]) -> Field {
    dot_vec(a, a)
}

/// Writes `# grid d N L` followed by one line per node.
pub fn write_field<W: Write>(u: &Field, mut w: W) -> std::io::Result<()> {
    let g = u.grid();
    writeln!(w, "# grid {} {} {}", g.dim(), g.n(), PERIOD)?;
    for (idx, v) in u.values().iter().enumerate() {
        let x = g.node(idx);
        if g.dim() == 1 {
            write!(w, "{:.17e}", x[0])?;
        } else {
            write!(w, "{:.17e} {:.17e}", x[0], x[1])?;
        }
        if u.is_real() {
            writeln!(w, " {:.17e}", v.re)?;
        } else {
            writeln!(w, " {:.17e} {:.17e}", v.re, v.im)?;
        }
    }
    Ok(())
}

/// Writes `# grid d N L` followed by `k [l] re im` per lattice frequency.
pub fn write_spectrum<W: Write>(u: &Field, mut w: W) -> std::io::Result<()> {
    let g = u.grid();
    writeln!(w, "# grid {} {} {}", g.dim(), g.n(), PERIOD)?;
    for (idx, c) in u.coeffs().iter().enumerate() {
        let k = g.freq(idx);
        if g.dim() == 1 {
            writeln!(w, "{} {:.17e} {:.17e}", k[0], c.re, c.im)?;
        } else {
            writeln!(w, "{} {} {:.17e} {:.17e}", k[0], k[1], c.re, c.im)?;
        }
    }
    Ok(())
}

fn parse_header(line: &str) -> Result<Grid> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != 5 || parts[0] != "#" || parts[1] != "grid" {
        return Err(Error::Parse(format!("bad header: {line:?}")));
    }
    let d: usize = parts[2].parse().map_err(|e| Error::Parse(format!("{e}")))?;
    let n: usize = parts[3].parse().map_err(|e| Error::Parse(format!("{e}")))?;
    let l: f64 = parts[4].parse().map_err(|e| Error::Parse(format!("{e}")))?;
    if (l - PERIOD).abs() > 1e-12 {
        return Err(Error::Parse(format!("period {l} is not 2π")));
    }
    Grid::new(d, n)
}

/// Reads the node format written by [`write_field`].
pub fn read_field<R: BufRead>(r: R) -> Result<Field> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty input".into()))?
        .map_err(|e| Error::Parse(e.to_string()))?;
    let grid = parse_header(&header)?;
    let mut values = Vec::with_capacity(grid.len());
    let mut complex = None;
    for line in lines {
        let line = line.map_err(|e| Error::Parse(e.to_string()))?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("{e}: {t:?}"))))
            .collect::<Result<_>>()?;
        let is_complex = match cols.len() - grid.dim() {
            1 => false,
            2 => true,
            _ => return Err(Error::Parse(format!("bad column count in {line:?}"))),
        };
        if *complex.get_or_insert(is_complex) != is_complex {
            return Err(Error::Parse("mixed real and complex rows".into()));
        }
        let d = grid.dim();
        values.push(C64::new(cols[d], if is_complex { cols[d + 1] } else { 0.0 }));
    }
    if values.len() != grid.len() {
        return Err(Error::Parse(format!("expected {} rows, found {}", grid.len(), values.len())));
    }
    Ok(if complex == Some(true) {
        Field::from_complex(grid, values)
    } else {
        Field::from_real(grid, values.into_iter().map(|v| v.re).collect())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn g1(n: usize) -> Grid {
        Grid::new(1, n).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(1, 6).is_err());
        assert!(Grid::new(1, 4).is_err());
        assert!(Grid::new(3, 8).is_err());
        let g = Grid::new(2, 8).unwrap();
        assert_eq!(g.len(), 64);
        assert_eq!(g.wavenumber(4), 4);
        assert_eq!(g.wavenumber(5), -3);
        assert_eq!(g.index([-3, 4]), 5 * 8 + 4);
    }

    #[test]
    fn multiplier_examples() {
        let g = g1(32);
        let u = Field::from_fn(g, |x| (3.0 * x[0]).cos());
        let m = Multiplier::abs_pow(g, 1.0, 0.0).unwrap();
        let out = m.apply(&u).unwrap();
        assert!(out.is_real());
        for (a, b) in out.values().iter().zip(u.values()) {
            assert_relative_eq!(a.re, 3.0 * b.re, epsilon = 1e-13);
        }
        let one = Field::constant(g, 1.0);
        let j = Multiplier::japanese(g).apply(&one).unwrap();
        assert_relative_eq!(j.value(5).re, 1.0, epsilon = 1e-14);
        let (delta, z) = (0.3, 0.0);
        let ident = Multiplier::radial(g, 0.0, 1.0, |r| (delta * z * (1.0 + r * r).sqrt()).exp()).unwrap();
        let same = ident.apply(&u).unwrap();
        assert_relative_eq!((&same - &u).max_abs(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn multiplier_rejects_non_finite() {
        let g = g1(16);
        let err = Multiplier::abs_pow(g, -1.0, f64::NAN).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
        assert!(Multiplier::abs_pow(g, -1.0, 0.0).is_ok());
    }

    #[test]
    fn sobolev_examples() {
        let g = g1(32);
        let u = Field::from_fn(g, |x| (3.0 * x[0]).cos());
        assert_relative_eq!(sobolev_norm(&u, 0.0), 0.5f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(sobolev_norm(&u, 1.0), 5.0f64.sqrt(), epsilon = 1e-13);
        assert_eq!(sobolev_norm(&Field::zeros(g), 1.5), 0.0);
    }

    #[test]
    fn dealias_examples() {
        let g = g1(64);
        let hi = Field::from_fn(g, |x| (30.0 * x[0]).cos());
        let m = dealias(&hi).max_abs(); assert!(m < 1e-12, "{m}");
        let lo = Field::from_fn(g, |x| (3.0 * x[0]).cos());
        assert!((&dealias(&lo) - &lo).max_abs() < 1e-14);
        let c = Field::constant(g, 2.5);
        assert!((&dealias(&c) - &c).max_abs() < 1e-14);
    }

    #[test]
    fn gradient_examples() {
        let g = g1(32);
        let u = Field::from_fn(g, |x| (3.0 * x[0]).cos());
        let du = &gradient(&u)[0];
        let expect = Field::from_fn(g, |x| -3.0 * (3.0 * x[0]).sin());
        assert!((du - &expect).max_abs() < 1e-12);
        assert!(gradient(&Field::constant(g, 4.0))[0].max_abs() < 1e-14);

        let g2 = Grid::new(2, 16).unwrap();
        let w = Field::from_fn(g2, |x| x[0].sin() * x[1].cos());
        let dw = gradient(&w);
        let ex = Field::from_fn(g2, |x| x[0].cos() * x[1].cos());
        let ey = Field::from_fn(g2, |x| -x[0].sin() * x[1].sin());
        assert!((&dw[0] - &ex).max_abs() < 1e-12);
        assert!((&dw[1] - &ey).max_abs() < 1e-12);
    }

    #[test]
    fn text_round_trip() {
        let g = Grid::new(2, 8).unwrap();
        let u = Field::from_fn(g, |x| (x[0] + 2.0 * x[1]).sin());
        let mut buf = Vec::new();
        write_field(&u, &mut buf).unwrap();
        let back = read_field(buf.as_slice()).unwrap();
        assert_eq!(back.grid(), g);
        assert!((&back - &u).max_abs() == 0.0);
        let c = u.complexify(&u.scale(2.0));
        let mut buf = Vec::new();
        write_field(&c, &mut buf).unwrap();
        let back = read_field(buf.as_slice()).unwrap();
        assert!(!back.is_real());
        assert!((&back - &c).max_abs() == 0.0);
        assert!(read_field("# grid 1 6 6.283185307179586\n".as_bytes()).is_err());
    }

    #[test]
    fn spectrum_dump_lists_every_mode() {
        let g = g1(8);
        let u = Field::from_fn(g, |x| x[0].cos());
        let mut buf = Vec::new();
        write_spectrum(&u, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 9);
        assert!(text.lines().any(|l| l.starts_with("-1 5.0")));
    }
}
