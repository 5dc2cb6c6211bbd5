//! Periodic square grids and the 2-D FFT machinery shared by `modes`,
//! `rotwave` and `simulate`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::kernel::KernelSymbol;

/// Complex samples on `[-L, L)²` at `x_j = -L + j·h`, `h = 2L/n`, row-major
/// with `y` as the row index.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    n: usize,
    half_width: f64,
    pub data: Vec<Complex64>,
}

impl Field2D {
    pub fn zeros(n: usize, half_width: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::Size(format!("grid size must be a power of two ≥ 8, got {n}")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::Param(format!("half-width must be positive, got {half_width}")));
        }
        Ok(Self {
            n,
            half_width,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        })
    }

    pub fn from_fn(n: usize, half_width: f64, f: impl Fn(f64, f64) -> Complex64 + Sync) -> Result<Self> {
        let mut out = Self::zeros(n, half_width)?;
        let h = out.spacing();
        out.data.par_chunks_mut(n).enumerate().for_each(|(iy, row)| {
            let y = -half_width + iy as f64 * h;
            for (ix, v) in row.iter_mut().enumerate() {
                *v = f(-half_width + ix as f64 * h, y);
            }
        });
        Ok(out)
    }

    pub fn from_real(n: usize, half_width: f64, values: &[f64]) -> Result<Self> {
        let mut out = Self::zeros(n, half_width)?;
        if values.len() != n * n {
            return Err(Error::Shape {
                expected: n * n,
                got: values.len(),
            });
        }
        for (d, &v) in out.data.iter_mut().zip(values) {
            *d = Complex64::new(v, 0.0);
        }
        Ok(out)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn coord(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.spacing()
    }

    pub fn get(&self, ix: usize, iy: usize) -> Complex64 {
        self.data[iy * self.n + ix]
    }

    pub fn same_shape(&self, other: &Field2D) -> bool {
        self.n == other.n && self.half_width == other.half_width
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64 + Sync) -> Self {
        Self {
            n: self.n,
            half_width: self.half_width,
            data: self.data.par_iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.re).collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_imag(&self) -> f64 {
        self.data.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    /// Grid quadrature of `|f|²`.
    pub fn l2_norm_sq(&self) -> f64 {
        let h = self.spacing();
        h * h * self.data.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    /// Angular wavenumber of FFT bin `j` (Nyquist bin mapped to `-n/2`).
    pub fn wavenumber(&self, j: usize) -> f64 {
        wavenumber(self.n, self.half_width, j)
    }
}

/// A two-component state `U = (u, v)` at time `t`; both components share one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub t: f64,
    pub u: Field2D,
    pub v: Field2D,
}

impl FieldState {
    pub fn new(t: f64, u: Field2D, v: Field2D) -> Result<Self> {
        if !u.same_shape(&v) {
            return Err(Error::Shape {
                expected: u.n(),
                got: v.n(),
            });
        }
        Ok(Self { t, u, v })
    }

    pub fn n(&self) -> usize {
        self.u.n()
    }

    pub fn half_width(&self) -> f64 {
        self.u.half_width()
    }

    pub fn is_finite(&self) -> bool {
        self.u.data.iter().chain(&self.v.data).all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Multiplies both components pointwise by a real weight.
    pub fn weighted(&self, w: &[f64]) -> Self {
        let mul = |f: &Field2D| Field2D {
            n: f.n,
            half_width: f.half_width,
            data: f.data.iter().zip(w).map(|(z, w)| z * *w).collect(),
        };
        Self {
            t: self.t,
            u: mul(&self.u),
            v: mul(&self.v),
        }
    }
}

/// Smooth radial cut-off: 1 for `r ≤ r_in`, 0 for `r ≥ r_out`, `C^∞` between.
pub fn radial_window(n: usize, half_width: f64, r_in: f64, r_out: f64) -> Vec<f64> {
    let h = 2.0 * half_width / n as f64;
    let bump = |s: f64| if s <= 0.0 { 0.0 } else { (-1.0 / s).exp() };
    let mut out = vec![0.0; n * n];
    out.par_chunks_mut(n).enumerate().for_each(|(iy, row)| {
        let y = -half_width + iy as f64 * h;
        for (ix, v) in row.iter_mut().enumerate() {
            let x = -half_width + ix as f64 * h;
            let s = ((x * x + y * y).sqrt() - r_in) / (r_out - r_in);
            *v = if s <= 0.0 {
                1.0
            } else if s >= 1.0 {
                0.0
            } else {
                bump(1.0 - s) / (bump(1.0 - s) + bump(s))
            };
        }
    });
    out
}

pub(crate) fn wavenumber(n: usize, half_width: f64, j: usize) -> f64 {
    let m = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
    PI / half_width * m
}

/// Unnormalized forward / normalized inverse 2-D FFT of a fixed size.
#[derive(Clone)]
pub struct Fft2 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("n", &self.n).finish()
    }
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn rows(&self, fft: &Arc<dyn Fft<f64>>, data: &mut [Complex64]) {
        // One call per block of rows amortizes the scratch allocation.
        let rows = (self.n / rayon::current_num_threads().max(1)).max(1);
        data.par_chunks_mut(self.n * rows).for_each(|block| fft.process(block));
    }

    /// In-place square transpose, blocked for cache locality.
    fn transpose(&self, data: &mut [Complex64]) {
        const B: usize = 16;
        let n = self.n;
        for bi in (0..n).step_by(B) {
            for bj in (bi..n).step_by(B) {
                for i in bi..(bi + B).min(n) {
                    let j0 = if bi == bj { i + 1 } else { bj };
                    for j in j0..(bj + B).min(n) {
                        data.swap(i * n + j, j * n + i);
                    }
                }
            }
        }
    }

    fn both(&self, fft: &Arc<dyn Fft<f64>>, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.n * self.n);
        self.rows(fft, data);
        self.transpose(data);
        self.rows(fft, data);
        self.transpose(data);
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.both(&self.fwd, data);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.both(&self.inv, data);
        let s = 1.0 / (self.n * self.n) as f64;
        data.par_iter_mut().for_each(|z| *z *= s);
    }
}

/// Spectral partial derivative `∂x^a ∂y^b` of a periodic field. Nyquist bins
/// are dropped for odd orders so real fields stay real.
pub fn spectral_derivative(fft: &Fft2, field: &Field2D, a: u32, b: u32) -> Field2D {
    let mut spec = field.data.clone();
    fft.forward(&mut spec);
    apply_derivative(field.n, field.half_width, &mut spec, a, b);
    fft.inverse(&mut spec);
    Field2D {
        n: field.n,
        half_width: field.half_width,
        data: spec,
    }
}

pub(crate) fn apply_derivative(n: usize, half_width: f64, spec: &mut [Complex64], a: u32, b: u32) {
    let factor = |j: usize, order: u32| -> Complex64 {
        if order == 0 {
            return Complex64::new(1.0, 0.0);
        }
        if j == n / 2 && order % 2 == 1 {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::new(0.0, wavenumber(n, half_width, j)).powu(order)
    };
    let fx: Vec<Complex64> = (0..n).map(|j| factor(j, a)).collect();
    let fy: Vec<Complex64> = (0..n).map(|j| factor(j, b)).collect();
    spec.par_chunks_mut(n).enumerate().for_each(|(iy, row)| {
        for (ix, z) in row.iter_mut().enumerate() {
            *z *= fx[ix] * fy[iy];
        }
    });
}

/// `K̂(|k|)` on the FFT grid, row-major like the spectra.
pub fn symbol_grid(sym: &KernelSymbol, n: usize, half_width: f64) -> Result<Vec<f64>> {
    let k: Vec<f64> = (0..n).map(|j| wavenumber(n, half_width, j)).collect();
    let mut out = Vec::with_capacity(n * n);
    for ky in &k {
        for kx in &k {
            out.push(sym.eval((kx * kx + ky * ky).sqrt())?);
        }
    }
    Ok(out)
}

/// `K ∗ f` for a radial symbol, by FFT.
pub fn convolve(fft: &Fft2, field: &Field2D, multiplier: &[f64]) -> Field2D {
    let mut spec = field.data.clone();
    fft.forward(&mut spec);
    spec.par_iter_mut().zip(multiplier).for_each(|(z, m)| *z *= *m);
    fft.inverse(&mut spec);
    Field2D {
        n: field.n,
        half_width: field.half_width,
        data: spec,
    }
}

/// `∂θf = x ∂y f − y ∂x f` with spectral derivatives.
pub fn angular_derivative(fft: &Fft2, field: &Field2D) -> Field2D {
    let fx = spectral_derivative(fft, field, 1, 0);
    let fy = spectral_derivative(fft, field, 0, 1);
    let (n, l, h) = (field.n, field.half_width, field.spacing());
    let mut data = vec![Complex64::new(0.0, 0.0); n * n];
    data.par_chunks_mut(n).enumerate().for_each(|(iy, row)| {
        let y = -l + iy as f64 * h;
        for (ix, z) in row.iter_mut().enumerate() {
            let x = -l + ix as f64 * h;
            let k = iy * n + ix;
            *z = fy.data[k] * x - fx.data[k] * y;
        }
    });
    Field2D { n, half_width: l, data }
}

/// Trigonometric interpolant of a grid field, exact for band-limited data.
#[derive(Debug, Clone)]
pub struct SpectralInterpolator {
    n: usize,
    half_width: f64,
    coeffs: Vec<Complex64>,
}

impl SpectralInterpolator {
    pub fn new(fft: &Fft2, field: &Field2D) -> Self {
        let mut coeffs = field.data.clone();
        fft.forward(&mut coeffs);
        let s = 1.0 / (field.n * field.n) as f64;
        coeffs.iter_mut().for_each(|z| *z *= s);
        Self {
            n: field.n,
            half_width: field.half_width,
            coeffs,
        }
    }

    fn basis(&self, x: f64) -> Vec<Complex64> {
        let n = self.n;
        let t = x + self.half_width;
        (0..n)
            .map(|j| {
                let k = wavenumber(n, self.half_width, j);
                if j == n / 2 {
                    Complex64::new((k * t).cos(), 0.0)
                } else {
                    Complex64::from_polar(1.0, k * t)
                }
            })
            .collect()
    }

    pub fn eval(&self, x: f64, y: f64) -> Complex64 {
        let n = self.n;
        let ex = self.basis(x);
        let ey = self.basis(y);
        self.coeffs
            .chunks(n)
            .zip(&ey)
            .map(|(row, &e)| e * row.iter().zip(&ex).map(|(c, b)| c * b).sum::<Complex64>())
            .sum()
    }
}
