//! Hopf data and reduced-equation coefficients for two-component reaction
//! models `F(U; λ) = (A₀ + λA₁)U + (M₀ + λM₁)UU + (N₀ + λN₁)UUU + …`.
//!
//! All pairings `⟨a, b⟩ = Σ aᵢbᵢ` are bilinear, not sesquilinear.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hankel::RadialProfile;
use crate::modes::AngularDecomposition;

pub type C = Complex64;
pub type Vec2 = [C; 2];
pub type Mat2 = [[C; 2]; 2];
pub type RMat2 = [[f64; 2]; 2];
pub type Tensor3 = [[[f64; 2]; 2]; 2];
pub type Tensor4 = [[[[f64; 2]; 2]; 2]; 2];

type Rhs = Arc<dyn Fn([f64; 2], f64) -> [f64; 2] + Send + Sync>;

const I: C = C::new(0.0, 1.0);

/// Bilinear pairing `Σ aᵢbᵢ`.
pub fn pair(a: &Vec2, b: &Vec2) -> C {
    a[0] * b[0] + a[1] * b[1]
}

fn conj(v: &Vec2) -> Vec2 {
    [v[0].conj(), v[1].conj()]
}

fn real_mat(m: &RMat2) -> Mat2 {
    [[m[0][0].into(), m[0][1].into()], [m[1][0].into(), m[1][1].into()]]
}

fn mat_vec(m: &Mat2, v: &Vec2) -> Vec2 {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

fn symmetrize3(t: &Tensor3) -> Tensor3 {
    let mut s = [[[0.0; 2]; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                s[i][j][k] = 0.5 * (t[i][j][k] + t[i][k][j]);
            }
        }
    }
    s
}

fn symmetrize4(t: &Tensor4) -> Tensor4 {
    let mut s = [[[[0.0; 2]; 2]; 2]; 2];
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    let idx = [j, k, l];
                    s[i][j][k][l] = perms
                        .iter()
                        .map(|p| t[i][idx[p[0]]][idx[p[1]]][idx[p[2]]])
                        .sum::<f64>()
                        / 6.0;
                }
            }
        }
    }
    s
}

/// `M(U, V)ᵢ = Σ mᵢⱼₖ UⱼVₖ`.
pub fn contract2(m: &Tensor3, u: &Vec2, v: &Vec2) -> Vec2 {
    let mut out = [C::new(0.0, 0.0); 2];
    for (i, o) in out.iter_mut().enumerate() {
        for j in 0..2 {
            for k in 0..2 {
                *o += u[j] * v[k] * m[i][j][k];
            }
        }
    }
    out
}

/// `N(U, V, W)ᵢ = Σ nᵢⱼₖₗ UⱼVₖWₗ`.
pub fn contract3(n: &Tensor4, u: &Vec2, v: &Vec2, w: &Vec2) -> Vec2 {
    let mut out = [C::new(0.0, 0.0); 2];
    for (i, o) in out.iter_mut().enumerate() {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    *o += u[j] * v[k] * w[l] * n[i][j][k][l];
                }
            }
        }
    }
    out
}

/// A two-component reaction term with its Taylor data at `(U, λ) = (0, 0)`.
#[derive(Clone)]
pub struct ReactionModel {
    pub a0: RMat2,
    pub a1_slope: RMat2,
    pub m0: Tensor3,
    pub n0_tensor: Tensor4,
    pub m1_slope: Tensor3,
    pub n1_slope: Tensor4,
    /// Weight of the convolution on each component (`K` acts component-wise).
    pub diffusion: [f64; 2],
    rhs: Rhs,
}

impl std::fmt::Debug for ReactionModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ReactionModel")
            .field("a0", &self.a0)
            .field("a1_slope", &self.a1_slope)
            .field("m0", &self.m0)
            .field("n0_tensor", &self.n0_tensor)
            .field("diffusion", &self.diffusion)
            .finish_non_exhaustive()
    }
}

impl ReactionModel {
    /// Model given by an explicit right-hand side and its Taylor tensors.
    /// Tensors are stored symmetrized.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        rhs: impl Fn([f64; 2], f64) -> [f64; 2] + Send + Sync + 'static,
        a0: RMat2,
        a1_slope: RMat2,
        m0: Tensor3,
        n0_tensor: Tensor4,
        m1_slope: Tensor3,
        n1_slope: Tensor4,
        diffusion: [f64; 2],
    ) -> Self {
        Self {
            a0,
            a1_slope,
            m0: symmetrize3(&m0),
            n0_tensor: symmetrize4(&n0_tensor),
            m1_slope: symmetrize3(&m1_slope),
            n1_slope: symmetrize4(&n1_slope),
            diffusion,
            rhs: Arc::new(rhs),
        }
    }

    /// Cubic polynomial model whose right-hand side is its own Taylor expansion.
    pub fn polynomial(
        a0: RMat2,
        a1_slope: RMat2,
        m0: Tensor3,
        n0_tensor: Tensor4,
        m1_slope: Tensor3,
        n1_slope: Tensor4,
        diffusion: [f64; 2],
    ) -> Self {
        let (sm0, sn0, sm1, sn1) = (symmetrize3(&m0), symmetrize4(&n0_tensor), symmetrize3(&m1_slope), symmetrize4(&n1_slope));
        let rhs = move |u: [f64; 2], lambda: f64| -> [f64; 2] {
            let mut out = [0.0; 2];
            for (i, o) in out.iter_mut().enumerate() {
                for j in 0..2 {
                    *o += (a0[i][j] + lambda * a1_slope[i][j]) * u[j];
                    for k in 0..2 {
                        *o += (sm0[i][j][k] + lambda * sm1[i][j][k]) * u[j] * u[k];
                        for l in 0..2 {
                            *o += (sn0[i][j][k][l] + lambda * sn1[i][j][k][l]) * u[j] * u[k] * u[l];
                        }
                    }
                }
            }
            out
        };
        Self::new(rhs, a0, a1_slope, m0, n0_tensor, m1_slope, n1_slope, diffusion)
    }

    /// `F(U; λ)`.
    pub fn eval(&self, u: [f64; 2], lambda: f64) -> [f64; 2] {
        (self.rhs)(u, lambda)
    }

    /// Checks `F(0; λ) = 0` and that `A₀` matches a finite-difference Jacobian.
    pub fn check_consistency(&self) -> Result<()> {
        for lambda in [-0.1, 0.0, 0.1] {
            let f = self.eval([0.0, 0.0], lambda);
            if f.iter().any(|v| v.abs() > 1e-12) {
                return Err(Error::Param(format!("F(0; {lambda}) = {f:?} is not zero")));
            }
        }
        let h = 1e-6;
        for j in 0..2 {
            let mut up = [0.0; 2];
            let mut dn = [0.0; 2];
            up[j] = h;
            dn[j] = -h;
            let (fp, fm) = (self.eval(up, 0.0), self.eval(dn, 0.0));
            for i in 0..2 {
                let d = (fp[i] - fm[i]) / (2.0 * h);
                if (d - self.a0[i][j]).abs() > 1e-6 * (1.0 + self.a0[i][j].abs()) {
                    return Err(Error::Param(format!(
                        "finite-difference Jacobian entry ({i},{j}) = {d} disagrees with A0 = {}",
                        self.a0[i][j]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Critical eigendata of `A₀` and the rotation speed `c* = ω/n₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HopfData {
    pub omega: f64,
    pub w1: Vec2,
    pub w1_star: Vec2,
    pub c_star: f64,
    pub n0: i32,
}

impl HopfData {
    /// Simultaneous rephasing `W₁ → e^{iφ}W₁`, `W₁* → e^{-iφ}W₁*`.
    pub fn rephased(&self, phi: f64) -> Self {
        let p = C::from_polar(1.0, phi);
        Self {
            w1: [self.w1[0] * p, self.w1[1] * p],
            w1_star: [self.w1_star[0] / p, self.w1_star[1] / p],
            ..*self
        }
    }
}

/// Purely imaginary eigenpair of `A₀` with `⟨W₁*, W₁⟩ = 1` and the first
/// component of `W₁` real and negative.
pub fn hopf_data(model: &ReactionModel, n0: i32) -> Result<HopfData> {
    if n0 == 0 {
        return Err(Error::Param("n0 must be nonzero".into()));
    }
    let [[a, b], [c, d]] = model.a0;
    let trace = a + d;
    let det = a * d - b * c;
    let norm = (a * a + b * b + c * c + d * d).sqrt();
    if !(trace * trace < 4.0 * det) || trace.abs() > 1e-8 * norm {
        return Err(Error::NotHopf { trace, det });
    }
    let omega = (det - trace * trace / 4.0).sqrt();
    let lambda = C::new(trace / 2.0, omega);
    // b ≠ 0 since bc < 0 whenever the spectrum is complex.
    let s = if b > 0.0 { -1.0 } else { 1.0 };
    let w1 = [C::new(s * b, 0.0), (lambda - a) * s];
    let y = [C::new(c, 0.0), lambda - a];
    let norm_factor = pair(&y, &w1);
    let w1_star = [y[0] / norm_factor, y[1] / norm_factor];
    Ok(HopfData {
        omega,
        w1,
        w1_star,
        c_star: omega / n0 as f64,
        n0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeMatrix {
    pub b_n: Mat2,
    /// Ordered by increasing modulus.
    pub eigenvalues: [C; 2],
}

/// `B_n = A₀ - i c* n I` and its eigenvalues.
pub fn mode_matrix(hopf: &HopfData, a0: &RMat2, n: i32) -> ModeMatrix {
    let shift = I * (hopf.c_star * n as f64);
    let mut b_n = real_mat(a0);
    b_n[0][0] -= shift;
    b_n[1][1] -= shift;
    let tr = b_n[0][0] + b_n[1][1];
    let det = b_n[0][0] * b_n[1][1] - b_n[0][1] * b_n[1][0];
    let disc = (tr * tr / 4.0 - det).sqrt();
    let (p, q) = (tr / 2.0 + disc, tr / 2.0 - disc);
    let large = if p.norm() >= q.norm() { p } else { q };
    // The small root from the product avoids cancellation.
    let small = if large.norm() == 0.0 { C::new(0.0, 0.0) } else { det / large };
    ModeMatrix {
        b_n,
        eigenvalues: [small, large],
    }
}

fn solve2(m: &Mat2, rhs: &Vec2, name: &'static str) -> Result<Vec2> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let scale: f64 = m.iter().flatten().map(|z| z.norm_sqr()).sum();
    if det.norm() <= 1e-13 * scale {
        return Err(Error::Resonance { matrix: name });
    }
    Ok([
        (m[1][1] * rhs[0] - m[0][1] * rhs[1]) / det,
        (m[0][0] * rhs[1] - m[1][0] * rhs[0]) / det,
    ])
}

fn shifted(a0: &RMat2, shift: C) -> Mat2 {
    let mut m = real_mat(a0);
    for (i, row) in m.iter_mut().enumerate() {
        for z in row.iter_mut() {
            *z = -*z;
        }
        row[i] += shift;
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResonantVectors {
    pub v1: Vec2,
    pub v0: Vec2,
    pub vm1: Vec2,
}

/// Second-order ansatz vectors from
/// `(2in₀c* − A₀)V₁ = M₀W₁W₁`, `(−2in₀c* − A₀)V₋₁ = M₀W̄₁W̄₁`, `−A₀V₀ = 2M₀W₁W̄₁`.
pub fn resonant_vectors(model: &ReactionModel, hopf: &HopfData) -> Result<ResonantVectors> {
    let w = hopf.w1;
    let wb = conj(&w);
    let s = I * (2.0 * hopf.n0 as f64 * hopf.c_star);
    let v1 = solve2(&shifted(&model.a0, s), &contract2(&model.m0, &w, &w), "2i n0 c* - A0")?;
    let vm1 = solve2(&shifted(&model.a0, -s), &contract2(&model.m0, &wb, &wb), "-2i n0 c* - A0")?;
    let m = contract2(&model.m0, &w, &wb);
    let v0 = solve2(&shifted(&model.a0, C::new(0.0, 0.0)), &[m[0] * 2.0, m[1] * 2.0], "-A0")?;
    Ok(ResonantVectors { v1, v0, vm1 })
}

/// Coefficients of the reduced equation
/// `κ K̃∗w + ν₁λ̄ w ± i(μ*+μ)n₀ w + (a₁+a₂)|w|²w = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalFormCoefficients {
    pub nu1: C,
    pub a1: C,
    pub a2: C,
    pub v1: Vec2,
    pub v0: Vec2,
    pub vm1: Vec2,
    /// `κ = ⟨W₁*, diag(diffusion) W₁⟩`, the weight of the projected convolution.
    pub kernel_weight: C,
}

impl NormalFormCoefficients {
    pub fn a(&self) -> C {
        self.a1 + self.a2
    }
}

/// `ν₁ = ⟨W₁*, A₁W₁⟩`, `a₁ = ⟨W₁*, 2M₀(W₁V₀ + W̄₁V₁)⟩`,
/// `a₂ = ⟨W₁*, 3N₀(W₁W₁W̄₁)⟩`.
pub fn coefficients(model: &ReactionModel, hopf: &HopfData) -> Result<NormalFormCoefficients> {
    let ResonantVectors { v1, v0, vm1 } = resonant_vectors(model, hopf)?;
    let w = hopf.w1;
    let wb = conj(&w);
    let ws = hopf.w1_star;
    let nu1 = pair(&ws, &mat_vec(&real_mat(&model.a1_slope), &w));
    let p = contract2(&model.m0, &w, &v0);
    let q = contract2(&model.m0, &wb, &v1);
    let a1 = pair(&ws, &[(p[0] + q[0]) * 2.0, (p[1] + q[1]) * 2.0]);
    let n = contract3(&model.n0_tensor, &w, &w, &wb);
    let a2 = pair(&ws, &[n[0] * 3.0, n[1] * 3.0]);
    let dw = [w[0] * model.diffusion[0], w[1] * model.diffusion[1]];
    Ok(NormalFormCoefficients {
        nu1,
        a1,
        a2,
        v1,
        v0,
        vm1,
        kernel_weight: pair(&ws, &dw),
    })
}

/// `w(r) = ⟨W₁*, U_{n₀}(r)⟩` from the angular decompositions of both components.
pub fn project_parallel(u: &AngularDecomposition, v: &AngularDecomposition, hopf: &HopfData) -> Result<RadialProfile> {
    if u.radial_grid() != v.radial_grid() {
        return Err(Error::Shape {
            expected: u.radial_grid().len(),
            got: v.radial_grid().len(),
        });
    }
    let missing = |d: &AngularDecomposition| Error::Shape {
        expected: hopf.n0.unsigned_abs() as usize,
        got: d.n_max() as usize,
    };
    let pu = u.profile(hopf.n0).ok_or_else(|| missing(u))?;
    let pv = v.profile(hopf.n0).ok_or_else(|| missing(v))?;
    Ok(RadialProfile::new(
        pu.iter().zip(pv).map(|(a, b)| pair(&hopf.w1_star, &[*a, *b])).collect(),
    ))
}

/// The nonlocal FitzHugh–Nagumo system
/// `u_t = K∗u + (u − u³ − v)/τ`, `v_t = βu + δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct Fhn {
    pub tau: f64,
    pub beta: f64,
    pub delta: f64,
}

impl Fhn {
    pub fn new(tau: f64, beta: f64, delta: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Param(format!("tau must be positive, got {tau}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Param(format!("beta must be positive, got {beta}")));
        }
        if !delta.is_finite() {
            return Err(Error::Param("delta must be finite".into()));
        }
        Ok(Self { tau, beta, delta })
    }

    /// Homogeneous steady state `(u*, v*) = (−δ/β, (δ/β)³ − δ/β)`.
    pub fn u_star(&self) -> f64 {
        -self.delta / self.beta
    }

    pub fn v_star(&self) -> f64 {
        let r = self.delta / self.beta;
        r * r * r - r
    }

    /// Linear growth parameter `λ = 1 − 3u*²` at the steady state.
    pub fn lambda(&self) -> f64 {
        1.0 - 3.0 * self.u_star().powi(2)
    }

    /// Deviation dynamics around `(u*, v*)` with `λ` as bifurcation parameter:
    /// `F(U; λ) = ((λu − v − 3u*u² − u³)/τ, βu)`; the convolution acts on `u` only.
    pub fn model(&self) -> ReactionModel {
        let Fhn { tau, beta, .. } = *self;
        let us = self.u_star();
        let mut m0 = [[[0.0; 2]; 2]; 2];
        m0[0][0][0] = -3.0 * us / tau;
        let mut n0 = [[[[0.0; 2]; 2]; 2]; 2];
        n0[0][0][0][0] = -1.0 / tau;
        let rhs = move |u: [f64; 2], lambda: f64| {
            [
                (lambda * u[0] - u[1] - 3.0 * us * u[0] * u[0] - u[0].powi(3)) / tau,
                beta * u[0],
            ]
        };
        ReactionModel::new(
            rhs,
            [[0.0, -1.0 / tau], [beta, 0.0]],
            [[1.0 / tau, 0.0], [0.0, 0.0]],
            m0,
            n0,
            [[[0.0; 2]; 2]; 2],
            [[[[0.0; 2]; 2]; 2]; 2],
            [1.0, 0.0],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn close(a: C, b: C, tol: f64) -> bool {
        (a - b).norm() <= tol * (1.0 + b.norm())
    }

    /// Hand-derived closed forms for the FitzHugh–Nagumo instance.
    struct Closed {
        v1: Vec2,
        v0: Vec2,
        a1: C,
        a2: C,
        nu1: C,
    }

    fn closed(f: &Fhn) -> Closed {
        let (t, b, us) = (f.tau, f.beta, f.u_star());
        let s = (b * t).sqrt();
        let k = us / (t * t);
        Closed {
            v1: [I * (2.0 * k / s), C::new(k, 0.0)],
            v0: [C::new(0.0, 0.0), C::new(-6.0 * k, 0.0)],
            a1: I * (-6.0 * us * us / (t.powi(3) * s)),
            a2: C::new(-1.5 / t.powi(3), 0.0),
            nu1: C::new(0.5 / t, 0.0),
        }
    }

    #[test]
    fn fhn_hopf_data() {
        let f = Fhn::new(0.25, 1.0, 0.0).unwrap();
        let h = hopf_data(&f.model(), 1).unwrap();
        assert!((h.omega - 2.0).abs() < 1e-15);
        assert!(close(h.w1[0], C::new(-4.0, 0.0), 1e-15));
        assert!(close(h.w1[1], C::new(0.0, 2.0), 1e-15));
        assert!(close(h.w1_star[0], C::new(-0.125, 0.0), 1e-15));
        assert!(close(h.w1_star[1], C::new(0.0, -0.25), 1e-15));
        assert!(close(pair(&h.w1_star, &h.w1), C::new(1.0, 0.0), 1e-15));
        let a = mat_vec(&real_mat(&f.model().a0), &h.w1);
        for i in 0..2 {
            assert!((a[i] - I * h.omega * h.w1[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn not_hopf() {
        let m = ReactionModel::polynomial(
            [[1.0, 0.0], [0.0, -1.0]],
            [[0.0; 2]; 2],
            [[[0.0; 2]; 2]; 2],
            [[[[0.0; 2]; 2]; 2]; 2],
            [[[0.0; 2]; 2]; 2],
            [[[[0.0; 2]; 2]; 2]; 2],
            [1.0, 1.0],
        );
        assert!(matches!(hopf_data(&m, 1), Err(Error::NotHopf { .. })));
        let shifted = ReactionModel::polynomial(
            [[0.1, -1.0], [1.0, 0.0]],
            [[0.0; 2]; 2],
            [[[0.0; 2]; 2]; 2],
            [[[[0.0; 2]; 2]; 2]; 2],
            [[[0.0; 2]; 2]; 2],
            [[[[0.0; 2]; 2]; 2]; 2],
            [1.0, 1.0],
        );
        match hopf_data(&shifted, 1) {
            Err(Error::NotHopf { trace, .. }) => assert!((trace - 0.1).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
        assert!(matches!(hopf_data(&Fhn::new(1.0, 1.0, 0.0).unwrap().model(), 0), Err(Error::Param(_))));
    }

    #[test]
    fn mode_matrix_spectrum() {
        let f = Fhn::new(1.0, 1.0, 0.2).unwrap();
        for n0 in [1, 2, 3] {
            let h = hopf_data(&f.model(), n0).unwrap();
            let m = mode_matrix(&h, &f.model().a0, n0);
            assert!(m.eigenvalues[0].norm() <= 1e-12);
            assert!((m.eigenvalues[1] - C::new(0.0, -2.0 * h.omega)).norm() < 1e-12);
            let z = mode_matrix(&h, &f.model().a0, 0);
            assert!((z.eigenvalues[0].im.abs() - h.omega).abs() < 1e-12 && z.eigenvalues[0].re.abs() < 1e-12);
            assert!((z.eigenvalues[1] + z.eigenvalues[0]).norm() < 1e-12);
        }
        let h = hopf_data(&f.model(), 1).unwrap();
        let m = mode_matrix(&h, &f.model().a0, 2);
        assert!((m.eigenvalues[0] - C::new(0.0, -1.0)).norm() < 1e-12);
        assert!((m.eigenvalues[1] - C::new(0.0, -3.0)).norm() < 1e-12);
    }

    #[test]
    fn left_kernel_of_critical_mode_matrix() {
        let f = Fhn::new(0.7, 2.3, -0.3).unwrap();
        let h = hopf_data(&f.model(), 2).unwrap();
        let b = mode_matrix(&h, &f.model().a0, 2).b_n;
        for x in [[C::new(1.0, 0.0), C::new(0.0, 0.0)], [C::new(0.3, -2.0), C::new(1.5, 0.7)]] {
            assert!(pair(&h.w1_star, &mat_vec(&b, &x)).norm() < 1e-12);
        }
    }

    #[test]
    fn fhn_coefficients_match_closed_forms() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let f = Fhn::new(rng.gen_range(0.1..2.0), rng.gen_range(0.5..4.0), rng.gen_range(-0.5..0.5)).unwrap();
            let model = f.model();
            model.check_consistency().unwrap();
            let h = hopf_data(&model, 1).unwrap();
            let nf = coefficients(&model, &h).unwrap();
            let cf = closed(&f);
            let scale = f.u_star().abs() / (f.tau * f.tau);
            for i in 0..2 {
                assert!((nf.v1[i] - cf.v1[i]).norm() <= 1e-12 * (1.0 + scale));
                assert!((nf.vm1[i] - cf.v1[i].conj()).norm() <= 1e-12 * (1.0 + scale));
                assert!((nf.v0[i] - cf.v0[i]).norm() <= 1e-12 * (1.0 + scale));
            }
            assert!(close(nf.a1, cf.a1, 1e-12));
            assert!((nf.a2 - cf.a2).norm() <= 1e-12 * cf.a2.norm());
            assert!((nf.nu1 - cf.nu1).norm() <= 1e-12 * cf.nu1.norm());
            assert!((nf.kernel_weight - C::new(0.5, 0.0)).norm() < 1e-12);
            assert!(nf.a2.re < 0.0);
        }
    }

    #[test]
    fn resonant_systems_are_solved() {
        let f = Fhn::new(0.4, 1.7, 0.35).unwrap();
        let model = f.model();
        let h = hopf_data(&model, 3).unwrap();
        let rv = resonant_vectors(&model, &h).unwrap();
        let s = I * (2.0 * 3.0 * h.c_star);
        let wb = conj(&h.w1);
        let r1 = mat_vec(&shifted(&model.a0, s), &rv.v1);
        let t1 = contract2(&model.m0, &h.w1, &h.w1);
        let r0 = mat_vec(&shifted(&model.a0, C::new(0.0, 0.0)), &rv.v0);
        let t0 = contract2(&model.m0, &h.w1, &wb);
        for i in 0..2 {
            assert!((r1[i] - t1[i]).norm() < 1e-12);
            assert!((r0[i] - t0[i] * 2.0).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_delta_kills_quadratic_terms() {
        let f = Fhn::new(0.5, 2.0, 0.0).unwrap();
        let h = hopf_data(&f.model(), 1).unwrap();
        let nf = coefficients(&f.model(), &h).unwrap();
        for v in [nf.v1, nf.v0, nf.vm1] {
            assert!(v.iter().all(|z| z.norm() == 0.0));
        }
        assert_eq!(nf.a1, C::new(0.0, 0.0));
    }

    #[test]
    fn resonance_is_detected() {
        // A₀ with eigenvalues ±i and a quadratic term, but c* chosen so that
        // 2n₀c* hits the spectrum.
        let f = Fhn::new(1.0, 1.0, 0.1).unwrap();
        let mut h = hopf_data(&f.model(), 1).unwrap();
        h.c_star = 0.5;
        assert!(matches!(resonant_vectors(&f.model(), &h), Err(Error::Resonance { matrix: "2i n0 c* - A0" })));
    }

    #[test]
    fn symmetrization() {
        let mut m0 = [[[0.0; 2]; 2]; 2];
        m0[0][0][1] = 2.0;
        let mut n0 = [[[[0.0; 2]; 2]; 2]; 2];
        n0[1][0][0][1] = 3.0;
        let m = ReactionModel::polynomial([[0.0, -1.0], [1.0, 0.0]], [[0.0; 2]; 2], m0, n0, [[[0.0; 2]; 2]; 2], [[[[0.0; 2]; 2]; 2]; 2], [1.0, 0.0]);
        assert_eq!(m.m0[0][0][1], 1.0);
        assert_eq!(m.m0[0][1][0], 1.0);
        assert_eq!(m.n0_tensor[1][1][0][0], 1.0);
        assert_eq!(m.n0_tensor[1][0][1][0], 1.0);
        assert_eq!(m.n0_tensor[1][0][0][1], 1.0);
        // The polynomial right-hand side reproduces the original (unsymmetrized) form.
        let u = [0.3, -0.7];
        let f = m.eval(u, 0.0);
        assert!((f[0] - (-u[1] + 2.0 * u[0] * u[1])).abs() < 1e-15);
        assert!((f[1] - (u[0] + 3.0 * u[0] * u[0] * u[1])).abs() < 1e-15);
        m.check_consistency().unwrap();
    }

    #[test]
    fn inconsistent_model_is_flagged() {
        let f = Fhn::new(1.0, 1.0, 0.0).unwrap().model();
        let g = f.clone();
        let bad = ReactionModel::new(move |u, l| g.eval(u, l), [[0.0, -2.0], [1.0, 0.0]], f.a1_slope, f.m0, f.n0_tensor, f.m1_slope, f.n1_slope, f.diffusion);
        assert!(bad.check_consistency().is_err());
    }

    fn field_pair(h: &HopfData, vec: Vec2, n: i32) -> (AngularDecomposition, AngularDecomposition, Vec<f64>) {
        use crate::field::Field2D;
        use crate::modes::decompose_angular;
        let g = |x: f64, y: f64| {
            let r2 = x * x + y * y;
            let z = if n >= 0 { C::new(x, y) } else { C::new(x, -y) };
            z.powu(n.unsigned_abs()) * (-r2 / 2.0).exp()
        };
        let u = Field2D::from_fn(64, 8.0, |x, y| vec[0] * g(x, y)).unwrap();
        let v = Field2D::from_fn(64, 8.0, |x, y| vec[1] * g(x, y)).unwrap();
        let grid: Vec<f64> = (0..12).map(|i| 0.4 * i as f64).collect();
        let nm = (h.n0.unsigned_abs()).max(n.unsigned_abs()) + 1;
        (decompose_angular(&u, nm, &grid).unwrap(), decompose_angular(&v, nm, &grid).unwrap(), grid)
    }

    #[test]
    fn projection_recovers_amplitude() {
        let f = Fhn::new(0.6, 1.3, 0.2).unwrap();
        let h = hopf_data(&f.model(), 2).unwrap();
        let (du, dv, grid) = field_pair(&h, h.w1, 2);
        let w = project_parallel(&du, &dv, &h).unwrap();
        for (z, r) in w.values.iter().zip(&grid) {
            assert!((z - C::new(r * r * (-r * r / 2.0).exp(), 0.0)).norm() < 1e-12);
        }
        // Idempotence: projecting W₁ w e^{in₀θ} again gives w.
        let grid2 = grid.clone();
        let profiles_u: Vec<Vec<C>> = (-3..=3).map(|n| if n == 2 { w.values.iter().map(|z| h.w1[0] * z).collect() } else { vec![C::new(0.0, 0.0); grid2.len()] }).collect();
        let profiles_v: Vec<Vec<C>> = (-3..=3).map(|n| if n == 2 { w.values.iter().map(|z| h.w1[1] * z).collect() } else { vec![C::new(0.0, 0.0); grid2.len()] }).collect();
        let again = project_parallel(
            &AngularDecomposition::new(3, grid2.clone(), profiles_u).unwrap(),
            &AngularDecomposition::new(3, grid2, profiles_v).unwrap(),
            &h,
        )
        .unwrap();
        for (a, b) in again.values.iter().zip(&w.values) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn projection_annihilates_other_directions() {
        let f = Fhn::new(0.6, 1.3, 0.2).unwrap();
        let h = hopf_data(&f.model(), 1).unwrap();
        let (du, dv, _) = field_pair(&h, conj(&h.w1), 1);
        assert!(project_parallel(&du, &dv, &h).unwrap().sup_norm() < 1e-12);
        let (du, dv, _) = field_pair(&h, h.w1, 3);
        assert!(project_parallel(&du, &dv, &h).unwrap().sup_norm() < 1e-12);
        let (du, dv, _) = field_pair(&h, h.w1, 0);
        let small = AngularDecomposition::new(0, du.radial_grid().to_vec(), vec![du.profile(0).unwrap().to_vec()]).unwrap();
        assert!(matches!(project_parallel(&small, &dv, &h), Err(Error::Shape { .. })));
    }

    proptest! {
        #[test]
        fn coefficients_are_gauge_invariant(phi in -3.2f64..3.2, tau in 0.1f64..2.0, beta in 0.5f64..4.0, delta in -0.5f64..0.5) {
            let f = Fhn::new(tau, beta, delta).unwrap();
            let h = hopf_data(&f.model(), 1).unwrap();
            let a = coefficients(&f.model(), &h).unwrap();
            let b = coefficients(&f.model(), &h.rephased(phi)).unwrap();
            prop_assert!(close(b.a1, a.a1, 1e-12));
            prop_assert!(close(b.a2, a.a2, 1e-12));
            prop_assert!(close(b.nu1, a.nu1, 1e-12));
        }

        #[test]
        fn a2_is_negative(tau in 0.01f64..10.0, beta in 0.1f64..10.0) {
            let f = Fhn::new(tau, beta, 0.2).unwrap();
            let nf = coefficients(&f.model(), &hopf_data(&f.model(), 1).unwrap()).unwrap();
            prop_assert!((nf.a2.re + 1.5 / tau.powi(3)).abs() <= 1e-12 * 1.5 / tau.powi(3));
            prop_assert!(nf.a2.re < 0.0);
        }
    }
}
