//! Matrix φ-functions of real 2×2 blocks for exponential integrators.
//!
//! `f(Z) = f(λ₁)·I + f[λ₁, λ₂]·(Z − λ₁I)`, with the divided difference taken
//! from a contour average whenever the eigenvalues nearly coincide. Scalar
//! φ's switch to their Taylor series near the origin.

use num_complex::Complex64 as C;

pub(crate) type M2 = [[f64; 2]; 2];

const SERIES_RADIUS: f64 = 0.5;
const SERIES_TERMS: usize = 24;
const CONTOUR_POINTS: usize = 32;
const CLOSE_EIGENVALUES: f64 = 0.25;

/// `φ_k(z) = Σ_j z^j / (j + k)!`, so `φ₀ = e^z`.
pub(crate) fn phi_scalar(k: u32, z: C) -> C {
    if z.norm() < SERIES_RADIUS {
        phi_series(k, z)
    } else {
        phi_closed(k, z)
    }
}

fn phi_series(k: u32, z: C) -> C {
    {
        let mut fact = 1.0;
        for j in 1..=k {
            fact *= j as f64;
        }
        let mut term = C::new(1.0 / fact, 0.0);
        let mut sum = term;
        for j in 1..SERIES_TERMS {
            term = term * z / (j as f64 + k as f64);
            sum += term;
        }
        sum
    }
}

fn phi_closed(k: u32, z: C) -> C {
    let mut acc = z.exp();
    let mut taylor = C::new(1.0, 0.0);
    let mut zp = C::new(1.0, 0.0);
    for j in 0..k {
        acc -= taylor;
        zp *= z;
        taylor = taylor * z / (j as f64 + 1.0);
    }
    acc / zp
}

fn divided_difference(f: &impl Fn(C) -> C, l1: C, l2: C) -> C {
    if (l1 - l2).norm() > CLOSE_EIGENVALUES {
        return (f(l1) - f(l2)) / (l1 - l2);
    }
    let c = (l1 + l2) * 0.5;
    let mut sum = C::new(0.0, 0.0);
    for j in 0..CONTOUR_POINTS {
        let th = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / CONTOUR_POINTS as f64;
        let t = c + C::from_polar(1.0, th);
        sum += f(t) * (t - c) / ((t - l1) * (t - l2));
    }
    sum / CONTOUR_POINTS as f64
}

/// `f(Z)` for a real 2×2 matrix and a real-analytic `f`.
pub(crate) fn matrix_function(f: impl Fn(C) -> C, z: &M2) -> M2 {
    let tr = z[0][0] + z[1][1];
    let det = z[0][0] * z[1][1] - z[0][1] * z[1][0];
    let s = C::new(tr * tr / 4.0 - det, 0.0).sqrt();
    let l1 = C::new(tr / 2.0, 0.0) + s;
    let l2 = C::new(tr / 2.0, 0.0) - s;
    let dd = divided_difference(&f, l1, l2);
    let f1 = f(l1);
    let mut out = [[0.0; 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let id = if i == j { 1.0 } else { 0.0 };
            *v = (f1 * id + dd * (C::new(z[i][j], 0.0) - l1 * id)).re;
        }
    }
    out
}

pub(crate) fn phi_matrix(k: u32, z: &M2) -> M2 {
    matrix_function(|t| phi_scalar(k, t), z)
}

pub(crate) fn scale(a: &M2, s: f64) -> M2 {
    [[a[0][0] * s, a[0][1] * s], [a[1][0] * s, a[1][1] * s]]
}

pub(crate) fn inverse(a: &M2) -> Option<M2> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some([[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]])
}
