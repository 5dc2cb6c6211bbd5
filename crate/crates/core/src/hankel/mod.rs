//! Discrete Hankel transforms on Bessel-zero collocation grids.
//!
//! For a mode `g(r) e^{inθ}` the 2-D Fourier transform (convention
//! `(1/2π)∫ f e^{-iξ·x} dx`) is `ğ(ρ) e^{inθ_ξ}` with
//! `ğ(ρ) = (-i)^n ∫ g(r) J_n(ρr) r dr`; convolution with a radial kernel is
//! multiplication of `ğ` by the symbol. Everything here depends on `|n|` only.

pub mod bessel;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::KernelSymbol;
pub use bessel::{bessel_j, bessel_j_prime, bessel_zeros};

/// Relative boundary magnitude above which a transform is flagged as truncated.
pub const TRUNCATION_THRESHOLD: f64 = 1e-8;

/// Precomputed transform pair for one angular order on `[0, rmax]`.
#[derive(Debug, Clone)]
pub struct HankelPlan {
    order: u32,
    rmax: f64,
    nodes: Vec<f64>,
    freqs: Vec<f64>,
    /// `2 / (V² J_{p+1}(j_k)²)` — forward quadrature weights, `V = j_{N+1}/rmax`.
    fwd_weights: Vec<f64>,
    /// `2 / (rmax² J_{p+1}(j_m)²)` — Fourier–Bessel series coefficients.
    inv_weights: Vec<f64>,
    /// `J_p(j_m j_k / j_{N+1})`, symmetric.
    transform: Vec<f64>,
}

/// Complex samples on a plan's radial nodes (or its frequency nodes after a
/// forward transform).
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    pub values: Vec<Complex64>,
}

impl RadialProfile {
    pub fn new(values: Vec<Complex64>) -> Self {
        Self { values }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            values: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    /// Samples `g` at the plan's radial nodes.
    pub fn from_fn(plan: &HankelPlan, g: impl Fn(f64) -> Complex64) -> Self {
        Self::new(plan.nodes.iter().map(|&r| g(r)).collect())
    }

    /// Samples `g` at the plan's frequency nodes.
    pub fn from_spectrum_fn(plan: &HankelPlan, g: impl Fn(f64) -> Complex64) -> Self {
        Self::new(plan.freqs.iter().map(|&rho| g(rho)).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, a: Complex64) -> Self {
        Self::new(self.values.iter().map(|&z| a * z).collect())
    }
}

/// Set when the input does not decay to the truncation threshold at the end of
/// the grid; the transform is still computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationWarning {
    /// `|g(last node)| / sup |g|`.
    pub edge_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct Transformed {
    pub profile: RadialProfile,
    pub warning: Option<TruncationWarning>,
}

fn i_pow(p: u32) -> Complex64 {
    match p % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

fn edge_check(values: &[Complex64]) -> Option<TruncationWarning> {
    let sup = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let edge = values.last().map_or(0.0, |z| z.norm());
    (sup > 0.0 && edge > TRUNCATION_THRESHOLD * sup).then(|| TruncationWarning {
        edge_ratio: edge / sup,
    })
}

impl HankelPlan {
    /// Plan for angular order `n` with `len` nodes on `[0, rmax]`.
    pub fn new(n: i32, rmax: f64, len: usize) -> Result<Self> {
        if len < 16 {
            return Err(Error::Size(format!("Hankel plan needs at least 16 nodes, got {len}")));
        }
        if !(rmax.is_finite() && rmax > 0.0) {
            return Err(Error::Param(format!("rmax must be positive, got {rmax}")));
        }
        let p = n.unsigned_abs();
        let zeros = bessel_zeros(p, len + 1);
        let s = zeros[len];
        let v = s / rmax;
        let j = &zeros[..len];
        let jp1: Vec<f64> = j.iter().map(|&x| bessel_j(p as i32 + 1, x)).collect();
        let fwd_weights = jp1.iter().map(|&b| 2.0 / (v * v * b * b)).collect();
        let inv_weights = jp1.iter().map(|&b| 2.0 / (rmax * rmax * b * b)).collect();
        let mut transform = vec![0.0; len * len];
        transform
            .par_chunks_mut(len)
            .enumerate()
            .for_each(|(m, row)| {
                for (k, t) in row.iter_mut().enumerate() {
                    *t = bessel_j(p as i32, j[m] * j[k] / s);
                }
            });
        Ok(Self {
            order: p,
            rmax,
            nodes: j.iter().map(|&x| x / v).collect(),
            freqs: j.iter().map(|&x| x / rmax).collect(),
            fwd_weights,
            inv_weights,
            transform,
        })
    }

    /// `|n|`.
    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn rmax(&self) -> f64 {
        self.rmax
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Radial collocation nodes, strictly increasing in `(0, rmax)`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Conjugate frequency nodes `j_k / rmax`.
    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn fwd_weights(&self) -> &[f64] {
        &self.fwd_weights
    }

    pub fn inv_weights(&self) -> &[f64] {
        &self.inv_weights
    }

    /// Row-major `J_p(j_m j_k / j_{N+1})`.
    pub fn transform_matrix(&self) -> &[f64] {
        &self.transform
    }

    fn check(&self, p: &RadialProfile) -> Result<()> {
        if p.len() != self.len() {
            return Err(Error::Shape {
                expected: self.len(),
                got: p.len(),
            });
        }
        Ok(())
    }

    fn apply(&self, weights: &[f64], phase: Complex64, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.len();
        let wx: Vec<Complex64> = x.iter().zip(weights).map(|(z, w)| z * *w).collect();
        (0..n)
            .into_par_iter()
            .map(|m| {
                let row = &self.transform[m * n..(m + 1) * n];
                let s: Complex64 = row.iter().zip(&wx).map(|(t, z)| z * *t).sum();
                phase * s
            })
            .collect()
    }

    /// `ğ(ρ_m)` from samples `g(r_k)`.
    pub fn forward(&self, g: &RadialProfile) -> Result<Transformed> {
        self.check(g)?;
        let values = self.apply(&self.fwd_weights, i_pow(4 - self.order % 4), &g.values);
        Ok(Transformed {
            profile: RadialProfile::new(values),
            warning: edge_check(&g.values),
        })
    }

    /// `g(r_k)` from samples `ğ(ρ_m)`.
    pub fn inverse(&self, gh: &RadialProfile) -> Result<Transformed> {
        self.check(gh)?;
        let values = self.apply(&self.inv_weights, i_pow(self.order), &gh.values);
        Ok(Transformed {
            profile: RadialProfile::new(values),
            warning: edge_check(&gh.values),
        })
    }

    /// Evaluates the Fourier–Bessel series defined by a spectrum at an
    /// arbitrary radius `r ∈ [0, rmax]`.
    pub fn eval_series(&self, spectrum: &RadialProfile, r: f64) -> Result<Complex64> {
        self.check(spectrum)?;
        if !(0.0..=self.rmax).contains(&r) {
            return Err(Error::Range {
                what: "r",
                value: r,
                lo: 0.0,
                hi: self.rmax,
            });
        }
        let p = self.order as i32;
        let s: Complex64 = self
            .freqs
            .iter()
            .zip(&self.inv_weights)
            .zip(&spectrum.values)
            .map(|((&rho, &w), &f)| f * (w * bessel_j(p, rho * r)))
            .sum();
        Ok(i_pow(self.order) * s)
    }

    /// Dense matrix of `u ↦ P⁻¹[mult · P[u]]` acting on nodal samples.
    pub fn multiplier_matrix(&self, mult: &[Complex64]) -> Result<DMatrix<Complex64>> {
        let n = self.len();
        if mult.len() != n {
            return Err(Error::Shape {
                expected: n,
                got: mult.len(),
            });
        }
        // The (−i)^p and i^p phases cancel.
        let y = DMatrix::from_row_slice(n, n, &self.transform).map(|t| Complex64::new(t, 0.0));
        let mut right = y.clone();
        for (k, mut col) in right.column_iter_mut().enumerate() {
            col *= Complex64::new(self.fwd_weights[k], 0.0);
        }
        let mut left = y;
        for (m, mut col) in left.column_iter_mut().enumerate() {
            col *= mult[m] * self.inv_weights[m];
        }
        Ok(left * right)
    }

    /// Symbol values at the frequency nodes.
    pub fn symbol_values(&self, sym: &KernelSymbol) -> Result<Vec<f64>> {
        self.freqs.iter().map(|&rho| sym.eval(rho)).collect()
    }
}

/// `P⁻¹[K̂ · P[u]]`: the radial convolution restricted to the plan's mode.
pub fn radial_convolve(sym: &KernelSymbol, plan: &HankelPlan, u: &RadialProfile) -> Result<RadialProfile> {
    let spec = plan.forward(u)?.profile;
    let k = plan.symbol_values(sym)?;
    let prod = RadialProfile::new(spec.values.iter().zip(&k).map(|(z, k)| z * *k).collect());
    Ok(plan.inverse(&prod)?.profile)
}

/// Solves `K ∗ u + beta·u = f` on the plan's mode.
pub fn solve_mode_operator(
    sym: &KernelSymbol,
    beta: Complex64,
    plan: &HankelPlan,
    f: &RadialProfile,
) -> Result<RadialProfile> {
    let k = plan.symbol_values(sym)?;
    let inv = symbol_inverse(&k, beta, plan.freqs())?;
    let spec = plan.forward(f)?.profile;
    let prod = RadialProfile::new(spec.values.iter().zip(&inv).map(|(z, m)| z * m).collect());
    Ok(plan.inverse(&prod)?.profile)
}

/// `1/(k + beta)` at each node, failing if the denominator (nearly) vanishes.
pub fn symbol_inverse(k: &[f64], beta: Complex64, freqs: &[f64]) -> Result<Vec<Complex64>> {
    let scale = 1.0 + beta.norm() + k.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    k.iter()
        .zip(freqs)
        .map(|(&kv, &rho)| {
            let d = beta + kv;
            if d.norm() <= 1e-13 * scale {
                Err(Error::SingularOperator {
                    rho,
                    beta_re: beta.re,
                    beta_im: beta.im,
                })
            } else {
                Ok(d.inv())
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    /// Independent quadrature of `∫₀^∞ g(r) J_n(ρr) r dr` by composite
    /// Gauss–Legendre on a fine partition of `[0, 40]`.
    fn hankel_quadrature(n: i32, g: impl Fn(f64) -> f64, rho: f64) -> f64 {
        // 5-point Gauss–Legendre nodes/weights on [−1, 1].
        const X: [f64; 5] = [
            0.0,
            -0.538_469_310_105_683_1,
            0.538_469_310_105_683_1,
            -0.906_179_845_938_664,
            0.906_179_845_938_664,
        ];
        const W: [f64; 5] = [
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_47,
            0.478_628_670_499_366_47,
            0.236_926_885_056_189_08,
            0.236_926_885_056_189_08,
        ];
        let (a, b, m) = (0.0, 40.0, 4000);
        let h = (b - a) / m as f64;
        let mut s = 0.0;
        for i in 0..m {
            let mid = a + (i as f64 + 0.5) * h;
            for (x, w) in X.iter().zip(W) {
                let r = mid + 0.5 * h * x;
                s += w * g(r) * bessel_j(n, rho * r) * r;
            }
        }
        0.5 * h * s
    }

    #[test]
    fn plan_basic_shape() {
        let p = HankelPlan::new(0, 10.0, 64).unwrap();
        assert!((p.nodes()[0] * bessel_zeros(0, 65)[64] / 10.0 - 2.404825557695773).abs() < 1e-13);
        assert!(p.nodes().windows(2).all(|w| w[0] < w[1]));
        assert!(*p.nodes().last().unwrap() < 10.0 && p.nodes()[0] > 0.0);
        assert!(matches!(HankelPlan::new(0, 10.0, 15), Err(Error::Size(_))));
        let a = HankelPlan::new(3, 7.0, 32).unwrap();
        let b = HankelPlan::new(-3, 7.0, 32).unwrap();
        assert_eq!(a.nodes(), b.nodes());
        assert_eq!(a.transform_matrix(), b.transform_matrix());
    }

    #[test]
    fn gaussian_self_reciprocal() {
        let p = HankelPlan::new(0, 10.0, 256).unwrap();
        let g = RadialProfile::from_fn(&p, |r| c((-r * r / 2.0).exp()));
        let t = p.forward(&g).unwrap();
        assert!(t.warning.is_none());
        let err = t
            .profile
            .values
            .iter()
            .zip(p.freqs())
            .map(|(z, &rho)| (z - c((-rho * rho / 2.0).exp())).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
        // Reverse direction.
        let gh = RadialProfile::from_spectrum_fn(&p, |rho| c((-rho * rho / 2.0).exp()));
        let back = p.inverse(&gh).unwrap().profile;
        let err = back
            .values
            .iter()
            .zip(p.nodes())
            .map(|(z, &r)| (z - c((-r * r / 2.0).exp())).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn first_order_gaussian_against_quadrature() {
        let p = HankelPlan::new(1, 10.0, 256).unwrap();
        let g = RadialProfile::from_fn(&p, |r| c(r * (-r * r / 2.0).exp()));
        let t = p.forward(&g).unwrap().profile;
        for (m, &rho) in p.freqs().iter().enumerate().step_by(7) {
            let q = hankel_quadrature(1, |r| r * (-r * r / 2.0).exp(), rho);
            // Closed form ρ e^{−ρ²/2} and the quadrature agree with each other.
            assert!((q - rho * (-rho * rho / 2.0).exp()).abs() < 1e-10);
            let expect = Complex64::new(0.0, -q);
            assert!((t.values[m] - expect).norm() < 1e-6);
        }
    }

    #[test]
    fn roundtrip_is_identity() {
        // The collocation transform is orthogonal up to O(N⁻³), with a constant
        // growing in the order.
        for (n, tol) in [(0, 1e-10), (1, 1e-10), (4, 1e-8), (8, 1e-8)] {
            let p = HankelPlan::new(n, 10.0, 256).unwrap();
            let len = p.len();
            let mut worst: f64 = 0.0;
            for k in (0..len).step_by(17) {
                let mut e = vec![c(0.0); len];
                e[k] = c(1.0);
                let x = p.inverse(&p.forward(&RadialProfile::new(e.clone())).unwrap().profile).unwrap();
                for (j, z) in x.profile.values.iter().enumerate() {
                    worst = worst.max((z - e[j]).norm());
                }
            }
            assert!(worst < tol, "order {n}: {worst}");
        }
    }

    #[test]
    fn truncation_is_flagged() {
        let p = HankelPlan::new(0, 5.0, 32).unwrap();
        let g = RadialProfile::from_fn(&p, |_| c(1.0));
        assert!(p.forward(&g).unwrap().warning.is_some());
        let z = RadialProfile::zeros(32);
        let t = p.forward(&z).unwrap();
        assert!(t.warning.is_none());
        assert!(t.profile.values.iter().all(|v| v.norm() == 0.0));
        assert!(matches!(p.forward(&RadialProfile::zeros(31)), Err(Error::Shape { .. })));
    }

    #[test]
    fn zero_symbol_and_trivial_solve() {
        let p = HankelPlan::new(2, 10.0, 64).unwrap();
        let f = RadialProfile::from_fn(&p, |r| Complex64::new(r * r * (-r * r).exp(), 0.3 * (-r).exp()));
        let zero = KernelSymbol::zero();
        let u = radial_convolve(&zero, &p, &f).unwrap();
        assert!(u.sup_norm() == 0.0);
        let u = solve_mode_operator(&zero, c(2.0), &p, &f).unwrap();
        for (a, b) in u.values.iter().zip(&f.values) {
            assert!((a - b / 2.0).norm() < 1e-10 * f.sup_norm());
        }
    }

    #[test]
    fn apply_then_solve() {
        let sym = KernelSymbol::rational(5.0, 0.5).unwrap();
        let p = HankelPlan::new(1, 12.0, 128).unwrap();
        let f = RadialProfile::from_fn(&p, |r| Complex64::new(r * (-r * r / 3.0).exp(), -0.5 * r * (-r * r).exp()));
        let beta = Complex64::new(0.7, 1.3);
        let kf = radial_convolve(&sym, &p, &f).unwrap();
        let lf = RadialProfile::new(kf.values.iter().zip(&f.values).map(|(a, b)| a + beta * b).collect());
        let back = solve_mode_operator(&sym, beta, &p, &lf).unwrap();
        let err = back.values.iter().zip(&f.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10 * f.sup_norm(), "{err}");
    }

    #[test]
    fn singular_symbol_reported() {
        let sym = KernelSymbol::laplacian(1.0).unwrap();
        let p = HankelPlan::new(0, 10.0, 32).unwrap();
        let rho = p.freqs()[3];
        let f = RadialProfile::zeros(32);
        match solve_mode_operator(&sym, c(rho * rho), &p, &f) {
            Err(Error::SingularOperator { rho: r, .. }) => assert!((r - rho).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn real_even_symbol_keeps_real_profiles_real() {
        let sym = KernelSymbol::rational(5.0, 0.5).unwrap();
        let p = HankelPlan::new(0, 10.0, 128).unwrap();
        let u = RadialProfile::from_fn(&p, |r| c((-r * r).exp() * (1.0 + r)));
        let v = radial_convolve(&sym, &p, &u).unwrap();
        let im = v.values.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        assert!(im <= 1e-10 * u.sup_norm());
    }

    #[test]
    fn multiplier_matrix_matches_transforms() {
        let sym = KernelSymbol::rational(2.0, 1.0).unwrap();
        let p = HankelPlan::new(2, 8.0, 48).unwrap();
        let k: Vec<Complex64> = p.symbol_values(&sym).unwrap().into_iter().map(c).collect();
        let m = p.multiplier_matrix(&k).unwrap();
        let u = RadialProfile::from_fn(&p, |r| Complex64::new(r * r * (-r * r).exp(), r * r * (-2.0 * r * r).exp()));
        let direct = radial_convolve(&sym, &p, &u).unwrap();
        let via = &m * nalgebra::DVector::from_vec(u.values.clone());
        for (a, b) in direct.values.iter().zip(via.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn series_interpolates_nodes() {
        let p = HankelPlan::new(1, 10.0, 128).unwrap();
        let g = |r: f64| r * (-r * r / 2.0).exp();
        let spec = p.forward(&RadialProfile::from_fn(&p, |r| c(g(r)))).unwrap().profile;
        for &r in &[0.0, 0.37, 1.5, 4.2, 9.9] {
            let v = p.eval_series(&spec, r).unwrap();
            assert!((v - c(g(r))).norm() < 1e-9, "{r}");
        }
        assert!(p.eval_series(&spec, 10.5).is_err());
    }

    proptest! {
        #[test]
        fn linearity(re in -3.0f64..3.0, im in -3.0f64..3.0, n in 0i32..4) {
            let p = HankelPlan::new(n, 10.0, 32).unwrap();
            let gh = RadialProfile::from_spectrum_fn(&p, |rho| Complex64::new((-rho * rho).exp(), rho * (-rho).exp()));
            let a = Complex64::new(re, im);
            let lhs = p.inverse(&gh.scale(a)).unwrap().profile;
            let rhs = p.inverse(&gh).unwrap().profile.scale(a);
            for (x, y) in lhs.values.iter().zip(&rhs.values) {
                prop_assert!((x - y).norm() <= 1e-12 * (1.0 + y.norm()));
            }
        }

        #[test]
        fn lemma_bound(cc in 0.05f64..5.0, n in 1i32..9) {
            let sym = KernelSymbol::rational(5.0, 0.5).unwrap();
            let p = HankelPlan::new(n, 10.0, 32).unwrap();
            let beta = Complex64::new(0.0, cc * n as f64);
            for k in p.symbol_values(&sym).unwrap() {
                prop_assert!((beta + k).norm().recip() <= 1.0 / (cc * n as f64) + 1e-15);
            }
        }
    }
}
