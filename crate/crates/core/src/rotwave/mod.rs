//! Rotating-wave profiles of the reduced equation
//!
//! ```text
//! κ K̃_ε ∗ w + β w + a|w|²w + h(w) = 0,   β = λ_c + s·i(μ* + μ)n₀,
//! ```
//!
//! posed on angular mode `n₀`, plus reconstruction of the two-term ansatz and
//! the full steady-state residual.
//!
//! Profiles are split as `w = w_dec + w₀·T(R)` with `T(R) = tanh(R)^{|n₀|}`
//! (`T ≡ 1` for `n₀ = 0`). The decaying part lives on the Hankel grid; the
//! convolution of the tail is computed analytically (`K̃∗T = 0` for `n₀ = 0`,
//! `αΔT` in the Laplacian limit) or as `G∗ΔT` with `Ĝ = K̂/(−P²) = M/(1+P²)`,
//! which only needs the decaying `ΔT`.

mod fhn;

pub use fhn::{ansatz_residual, far_field_mu_star, setup_wave, AnsatzResidual, WaveConfig, WaveSetup};

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{angular_derivative, convolve, symbol_grid, Fft2, Field2D, FieldState};
use crate::hankel::{symbol_inverse, HankelPlan, RadialProfile};
use crate::kernel::{KernelSymbol, SymbolFamily};
use crate::normalform::{HopfData, NormalFormCoefficients, ReactionModel};

type C = Complex64;

/// Pointwise higher-order term `h(w)` standing in for `O(ε|w|⁴w)`.
pub trait HigherOrder: Send + Sync + std::fmt::Debug {
    fn value(&self, w: C) -> C;
    /// Wirtinger derivatives `(∂h/∂w, ∂h/∂w̄)`.
    fn derivatives(&self, w: C) -> (C, C);
}

/// `h(w) = coeff·|w|⁴w`.
#[derive(Debug, Clone, Copy)]
pub struct QuinticTerm {
    pub coeff: C,
}

impl HigherOrder for QuinticTerm {
    fn value(&self, w: C) -> C {
        self.coeff * w.norm_sqr().powi(2) * w
    }

    fn derivatives(&self, w: C) -> (C, C) {
        let m = w.norm_sqr();
        (self.coeff * 3.0 * m * m, self.coeff * 2.0 * m * w * w)
    }
}

#[derive(Debug, Clone)]
pub struct ReducedProblem {
    pub sym: KernelSymbol,
    pub kernel_weight: C,
    pub lambda_c: C,
    pub mu_star: f64,
    pub mu: f64,
    pub n0: i32,
    /// `+1`: `+i(μ*+μ)n₀w`; `−1`: the co-rotating steady-state convention.
    pub rotation_sign: f64,
    pub a: C,
    pub hot: Option<Arc<dyn HigherOrder>>,
}

impl ReducedProblem {
    /// Generic problem without rotation term and unit kernel weight.
    pub fn new(sym: KernelSymbol, lambda_c: C, a: C, n0: i32) -> Result<Self> {
        if a == C::new(0.0, 0.0) {
            return Err(Error::Param("cubic coefficient a must be nonzero".into()));
        }
        if !sym.is_validated() {
            return Err(Error::State("reduced problem needs a validated symbol".into()));
        }
        Ok(Self {
            sym,
            kernel_weight: C::new(1.0, 0.0),
            lambda_c,
            mu_star: 0.0,
            mu: 0.0,
            n0,
            rotation_sign: 1.0,
            a,
            hot: None,
        })
    }

    /// Problem with a rotation term around a nonzero reference speed `μ*`.
    pub fn rotating(sym: KernelSymbol, lambda_c: C, a: C, n0: i32, mu_star: f64, mu: f64) -> Result<Self> {
        if mu_star == 0.0 {
            return Err(Error::Param("mu_star must be nonzero".into()));
        }
        Ok(Self {
            mu_star,
            mu,
            ..Self::new(sym, lambda_c, a, n0)?
        })
    }

    /// Reduced equation of a reaction model at scale `eps` and parameter
    /// `λ = ε²λ̄`, in the co-rotating steady-state convention.
    pub fn from_normal_form(
        nf: &NormalFormCoefficients,
        hopf: &HopfData,
        base: &KernelSymbol,
        eps: f64,
        lambda_bar: f64,
        mu_star: f64,
        mu: f64,
    ) -> Result<Self> {
        let mut p = Self::rotating(base.rescale(eps), nf.nu1 * lambda_bar, nf.a(), hopf.n0, mu_star, mu)?;
        p.kernel_weight = nf.kernel_weight;
        p.rotation_sign = -1.0;
        Ok(p)
    }

    pub fn with_kernel_weight(mut self, kappa: C) -> Self {
        self.kernel_weight = kappa;
        self
    }

    pub fn with_rotation(mut self, mu_star: f64, mu: f64, sign: f64) -> Self {
        self.mu_star = mu_star;
        self.mu = mu;
        self.rotation_sign = sign.signum();
        self
    }

    pub fn with_hot(mut self, hot: Arc<dyn HigherOrder>) -> Self {
        self.hot = Some(hot);
        self
    }

    /// `β = λ_c + s·i(μ*+μ)n₀`.
    pub fn beta(&self) -> C {
        self.lambda_c + C::new(0.0, self.rotation_sign * (self.mu_star + self.mu) * self.n0 as f64)
    }

    /// `√(−Re λ_c / Re a)` when positive (supercritical far-field balance).
    pub fn supercritical_amplitude(&self) -> Option<f64> {
        let r = -self.lambda_c.re / self.a.re;
        (r > 0.0 && r.is_finite()).then(|| r.sqrt())
    }

    fn pointwise(&self, w: C) -> C {
        let h = self.hot.as_ref().map_or(C::new(0.0, 0.0), |h| h.value(w));
        self.beta() * w + self.a * w.norm_sqr() * w + h
    }
}

/// Tail profile `T` and its mode-`n` Laplacian `T'' + T'/R − n²T/R²`.
pub fn tail_profile(n: i32, r: f64) -> (f64, f64) {
    let p = n.unsigned_abs() as i32;
    if p == 0 {
        return (1.0, 0.0);
    }
    let t = r.tanh();
    let s = 1.0 - t * t;
    let pf = p as f64;
    let tp = t.powi(p);
    let d1 = pf * t.powi(p - 1) * s;
    let d2 = pf * (pf - 1.0) * t.powi(p - 2) * s * s - 2.0 * pf * tp * s;
    let lap = if r == 0.0 { 0.0 } else { d2 + d1 / r - pf * pf * tp / (r * r) };
    (tp, lap)
}

/// Unknown of the reduced problem: a decaying part on the Hankel nodes plus a
/// constant tail amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileCandidate {
    pub w_decaying: RadialProfile,
    pub w_const: C,
}

impl ProfileCandidate {
    pub fn rotated(&self, phi: f64) -> Self {
        let p = C::from_polar(1.0, phi);
        Self {
            w_decaying: self.w_decaying.scale(p),
            w_const: self.w_const * p,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Init {
    Zero,
    TanhFront { amplitude: f64, width: f64 },
    Given(ProfileCandidate),
}

#[derive(Debug, Clone)]
pub struct ProfileSolution {
    pub plan: Arc<HankelPlan>,
    pub w_decaying: RadialProfile,
    pub w_const: C,
    pub residual_norm: f64,
    pub iterations: usize,
    /// Sup-norm residual before each Newton step and at the end.
    pub residual_history: Vec<f64>,
    spectrum: RadialProfile,
    n0: i32,
}

impl ProfileSolution {
    fn new(plan: Arc<HankelPlan>, n0: i32, cand: ProfileCandidate, history: Vec<f64>) -> Result<Self> {
        let spectrum = plan.forward(&cand.w_decaying)?.profile;
        Ok(Self {
            residual_norm: *history.last().unwrap_or(&0.0),
            iterations: history.len().saturating_sub(1),
            residual_history: history,
            plan,
            w_decaying: cand.w_decaying,
            w_const: cand.w_const,
            spectrum,
            n0,
        })
    }

    pub fn candidate(&self) -> ProfileCandidate {
        ProfileCandidate {
            w_decaying: self.w_decaying.clone(),
            w_const: self.w_const,
        }
    }

    /// Full profile `w` at the plan nodes.
    pub fn nodal_values(&self) -> Vec<C> {
        self.plan
            .nodes()
            .iter()
            .zip(&self.w_decaying.values)
            .map(|(&r, &d)| d + self.w_const * tail_profile(self.n0, r).0)
            .collect()
    }

    /// `w(R)` for any `R ∈ [0, Rmax]`, via the Fourier–Bessel series of the
    /// decaying part.
    pub fn eval(&self, r: f64) -> Result<C> {
        Ok(self.plan.eval_series(&self.spectrum, r)? + self.w_const * tail_profile(self.n0, r).0)
    }
}

/// Precomputed operators for one problem on one plan.
struct Assembly<'a> {
    p: &'a ReducedProblem,
    tail: Vec<f64>,
    /// `K̃∗(T e^{in₀θ})` at the nodes.
    ktail: Vec<C>,
    kmat: DMatrix<C>,
}

fn tail_convolution(p: &ReducedProblem, plan: &HankelPlan) -> Result<Vec<C>> {
    let n = p.n0;
    let nodes = plan.nodes();
    if n == 0 {
        return Ok(vec![C::new(0.0, 0.0); nodes.len()]);
    }
    let lap: Vec<C> = nodes.iter().map(|&r| C::new(tail_profile(n, r).1, 0.0)).collect();
    match p.sym.family() {
        SymbolFamily::Zero => Ok(vec![C::new(0.0, 0.0); nodes.len()]),
        SymbolFamily::LaplacianLimit { alpha } => Ok(lap.iter().map(|z| z * *alpha).collect()),
        _ => {
            let g: Vec<C> = plan
                .freqs()
                .iter()
                .map(|&rho| p.sym.decompose(rho).map(|(m, _)| C::new(m / (1.0 + rho * rho), 0.0)))
                .collect::<Result<_>>()?;
            let out = plan.multiplier_matrix(&g)? * DVector::from_vec(lap);
            Ok(out.iter().copied().collect())
        }
    }
}

impl<'a> Assembly<'a> {
    fn new(p: &'a ReducedProblem, plan: &'a HankelPlan) -> Result<Self> {
        if plan.order() != p.n0.unsigned_abs() {
            return Err(Error::Param(format!(
                "plan order {} does not match n0 = {}",
                plan.order(),
                p.n0
            )));
        }
        let k: Vec<C> = plan.symbol_values(&p.sym)?.into_iter().map(|v| C::new(v, 0.0)).collect();
        Ok(Self {
            p,
            tail: plan.nodes().iter().map(|&r| tail_profile(p.n0, r).0).collect(),
            ktail: tail_convolution(p, plan)?,
            kmat: plan.multiplier_matrix(&k)?,
        })
    }

    fn full(&self, x: &[C], w0: C) -> Vec<C> {
        x.iter().zip(&self.tail).map(|(d, t)| d + w0 * *t).collect()
    }

    fn residual(&self, x: &[C], w0: C) -> Vec<C> {
        let kx = &self.kmat * DVector::from_column_slice(x);
        let w = self.full(x, w0);
        let kappa = self.p.kernel_weight;
        (0..x.len())
            .map(|k| kappa * (kx[k] + w0 * self.ktail[k]) + self.p.pointwise(w[k]))
            .collect()
    }
}

fn sup(v: &[C]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `κK̃∗w + βw + a|w|²w + h(w)` at the plan nodes.
pub fn reduced_residual(p: &ReducedProblem, plan: &HankelPlan, w: &ProfileCandidate) -> Result<RadialProfile> {
    if w.w_decaying.len() != plan.len() {
        return Err(Error::Shape {
            expected: plan.len(),
            got: w.w_decaying.len(),
        });
    }
    let asm = Assembly::new(p, plan)?;
    Ok(RadialProfile::new(asm.residual(&w.w_decaying.values, w.w_const)))
}

fn initial_candidate(p: &ReducedProblem, plan: &HankelPlan, init: Init) -> Result<ProfileCandidate> {
    let n = plan.len();
    Ok(match init {
        Init::Zero => ProfileCandidate {
            w_decaying: RadialProfile::zeros(n),
            w_const: C::new(0.0, 0.0),
        },
        Init::TanhFront { amplitude, width } => {
            if !(width > 0.0) {
                return Err(Error::Param(format!("front width must be positive, got {width}")));
            }
            let p_ord = p.n0.unsigned_abs() as i32;
            let values = plan
                .nodes()
                .iter()
                .map(|&r| {
                    let front = if p_ord == 0 { (r / width).tanh() } else { (r / width).tanh().powi(p_ord) };
                    C::new(amplitude * (front - tail_profile(p.n0, r).0), 0.0)
                })
                .collect();
            ProfileCandidate {
                w_decaying: RadialProfile::new(values),
                w_const: C::new(amplitude, 0.0),
            }
        }
        Init::Given(c) => {
            if c.w_decaying.len() != n {
                return Err(Error::Shape {
                    expected: n,
                    got: c.w_decaying.len(),
                });
            }
            c
        }
    })
}

/// Damped Newton on the preconditioned map `w + L⁻¹[N(w)]` with
/// `L̂ = κK̂ + β_p`. The tail amplitude `w₀` stays at its initial value and
/// acts as the far-field boundary condition; the decaying part is solved for.
pub fn solve_profile(p: &ReducedProblem, plan: Arc<HankelPlan>, init: Init, tol: f64, max_iter: usize) -> Result<ProfileSolution> {
    let cand = initial_candidate(p, &plan, init)?;
    let asm = Assembly::new(p, &plan)?;
    let n = plan.len();
    let w0 = cand.w_const;
    let mut x = cand.w_decaying.values.clone();

    let kappa = p.kernel_weight;
    let beta = p.beta();
    // Linearization about the far field keeps the preconditioner well away
    // from symbol zeros for supercritical problems.
    let beta_p = beta + p.a * 2.0 * w0.norm_sqr();
    let kvals = plan.symbol_values(&p.sym)?;
    if kappa.norm() == 0.0 {
        return Err(Error::Param("kernel weight must be nonzero".into()));
    }
    // κK̂ + β_p = κ(K̂ + β_p/κ).
    let inv_base = symbol_inverse(&kvals, beta_p / kappa, plan.freqs())?;
    let linv: Vec<C> = inv_base.iter().map(|z| z / kappa).collect();
    let pmat = plan.multiplier_matrix(&linv)?;
    let qvals: Vec<C> = kvals.iter().zip(&linv).map(|(k, l)| kappa * *k * l).collect();
    let qmat = plan.multiplier_matrix(&qvals)?;

    let merit = |r: &[C]| -> f64 { (&pmat * DVector::from_column_slice(r)).norm() };

    let mut r = asm.residual(&x, w0);
    let mut history = vec![sup(&r)];
    for _ in 0..max_iter {
        if *history.last().unwrap() <= tol {
            break;
        }
        let w = asm.full(&x, w0);
        let (d1, d2): (Vec<C>, Vec<C>) = w
            .iter()
            .map(|&wk| {
                let (hw, hb) = p.hot.as_ref().map_or((C::new(0.0, 0.0), C::new(0.0, 0.0)), |h| h.derivatives(wk));
                (beta + p.a * 2.0 * wk.norm_sqr() + hw, p.a * wk * wk + hb)
            })
            .unzip();
        let mut jac = DMatrix::<f64>::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                let a1 = qmat[(i, j)] + pmat[(i, j)] * d1[j];
                let a2 = pmat[(i, j)] * d2[j];
                jac[(i, j)] = a1.re + a2.re;
                jac[(i, j + n)] = -a1.im + a2.im;
                jac[(i + n, j)] = a1.im + a2.im;
                jac[(i + n, j + n)] = a1.re - a2.re;
            }
        }
        let pr = &pmat * DVector::from_column_slice(&r);
        let rhs = DVector::from_iterator(2 * n, pr.iter().map(|z| -z.re).chain(pr.iter().map(|z| -z.im)));
        let sol = jac.lu().solve(&rhs).ok_or_else(|| Error::State("singular Newton Jacobian".into()))?;
        let delta: Vec<C> = (0..n).map(|k| C::new(sol[k], sol[k + n])).collect();

        let phi0 = pr.norm();
        let mut t = 1.0;
        let floor = 2f64.powi(-10);
        let (mut x_new, mut r_new);
        loop {
            x_new = x.iter().zip(&delta).map(|(a, d)| a + d * t).collect::<Vec<_>>();
            r_new = asm.residual(&x_new, w0);
            if merit(&r_new) <= (1.0 - 1e-4 * t) * phi0 || t <= floor {
                break;
            }
            t *= 0.5;
        }
        x = x_new;
        r = r_new;
        history.push(sup(&r));
    }
    let last = *history.last().unwrap();
    if !last.is_finite() || last > tol {
        return Err(Error::MaxIterations {
            iterations: history.len() - 1,
            residual: last,
        });
    }
    ProfileSolution::new(
        plan,
        p.n0,
        ProfileCandidate {
            w_decaying: RadialProfile::new(x),
            w_const: w0,
        },
        history,
    )
}

/// Grid on which an ansatz is reconstructed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub half_width: f64,
}

/// `U = ε·2Re(W₁ w(εr) e^{in₀θ}) + ε²·[2Re(V₁ w² e^{2in₀θ}) + V₀|w|²]`.
pub fn reconstruct(
    hopf: &HopfData,
    nf: &NormalFormCoefficients,
    sol: &ProfileSolution,
    eps: f64,
    grid: GridSpec,
) -> Result<FieldState> {
    if !(eps > 0.0) {
        return Err(Error::Param(format!("eps must be positive, got {eps}")));
    }
    let reach = eps * grid.half_width * std::f64::consts::SQRT_2;
    let rmax = sol.plan.rmax();
    if reach > rmax {
        return Err(Error::Range {
            what: "eps * grid radius",
            value: reach,
            lo: 0.0,
            hi: rmax,
        });
    }
    let n = grid.n;
    let mut u = Field2D::zeros(n, grid.half_width)?;
    let mut v = Field2D::zeros(n, grid.half_width)?;
    let h = u.spacing();
    // The grid is symmetric about the origin, so radii repeat; evaluate each
    // distinct one once.
    let half = (n / 2) as i64;
    let mut keys: Vec<i64> = Vec::new();
    for iy in 0..n as i64 {
        for ix in 0..n as i64 {
            keys.push((ix - half).pow(2) + (iy - half).pow(2));
        }
    }
    let mut distinct: Vec<i64> = keys.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let values: Vec<C> = distinct
        .par_iter()
        .map(|&k| sol.eval(eps * h * (k as f64).sqrt()))
        .collect::<Result<_>>()?;
    let table: HashMap<i64, C> = distinct.into_iter().zip(values).collect();
    let n0 = hopf.n0 as f64;
    for iy in 0..n {
        for ix in 0..n {
            let (x, y) = (u.coord(ix), u.coord(iy));
            let w = table[&keys[iy * n + ix]];
            let th = y.atan2(x);
            let e1 = C::from_polar(1.0, n0 * th);
            let e2 = e1 * e1;
            for (c, field) in [(0usize, &mut u), (1usize, &mut v)] {
                let first = 2.0 * (hopf.w1[c] * w * e1).re;
                let second = 2.0 * (nf.v1[c] * w * w * e2).re + (nf.v0[c] * w.norm_sqr()).re;
                field.data[iy * n + ix] = C::new(eps * first + eps * eps * second, 0.0);
            }
        }
    }
    FieldState::new(0.0, u, v)
}

#[derive(Debug, Clone)]
pub struct SteadyResidual {
    pub sup_norm: f64,
    pub l2_norm: f64,
    pub u: Field2D,
    pub v: Field2D,
}

/// Fraction of the half-width inside which steady residual norms are taken.
pub const RESIDUAL_MASK: f64 = 0.8;

/// `K∗U − c∂θU + F(U; λ)` on the grid; norms over the disk `|x| ≤ 0.8L`.
pub fn steady_residual(model: &ReactionModel, sym: &KernelSymbol, c: f64, state: &FieldState, lambda: f64) -> Result<SteadyResidual> {
    let n = state.n();
    let l = state.half_width();
    let fft = Fft2::new(n);
    let mult = symbol_grid(sym, n, l)?;
    let comps = [&state.u, &state.v];
    let mut out: Vec<Field2D> = Vec::with_capacity(2);
    let conv: Vec<Field2D> = comps.iter().map(|f| convolve(&fft, f, &mult)).collect();
    let rot: Vec<Field2D> = comps.iter().map(|f| angular_derivative(&fft, f)).collect();
    let mut fvals = vec![[0.0; 2]; n * n];
    fvals.par_iter_mut().enumerate().for_each(|(k, f)| {
        *f = model.eval([state.u.data[k].re, state.v.data[k].re], lambda);
    });
    for c_idx in 0..2 {
        let mut f = Field2D::zeros(n, l)?;
        let d = model.diffusion[c_idx];
        for k in 0..n * n {
            f.data[k] = conv[c_idx].data[k] * d - rot[c_idx].data[k] * c + fvals[k][c_idx];
        }
        out.push(f);
    }
    let h = state.u.spacing();
    let r_mask = RESIDUAL_MASK * l;
    let (mut sup_norm, mut sq): (f64, f64) = (0.0, 0.0);
    for iy in 0..n {
        for ix in 0..n {
            let (x, y) = (state.u.coord(ix), state.u.coord(iy));
            if x * x + y * y <= r_mask * r_mask {
                let k = iy * n + ix;
                let m = out[0].data[k].norm_sqr() + out[1].data[k].norm_sqr();
                sup_norm = sup_norm.max(m.sqrt());
                sq += m;
            }
        }
    }
    let v = out.pop().unwrap();
    let u = out.pop().unwrap();
    Ok(SteadyResidual {
        sup_norm,
        l2_norm: (h * h * sq).sqrt(),
        u,
        v,
    })
}
