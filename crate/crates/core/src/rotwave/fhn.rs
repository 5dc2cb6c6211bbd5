//! End-to-end rotating waves of the nonlocal FitzHugh–Nagumo system: normal
//! form, reduced profile, reconstructed ansatz and its steady residual.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{reconstruct, solve_profile, steady_residual, GridSpec, Init, ProfileSolution, ReducedProblem};
use crate::error::{Error, Result};
use crate::field::radial_window;
use crate::hankel::HankelPlan;
use crate::kernel::{KernelSpec, KernelSymbol};
use crate::normalform::{coefficients, hopf_data, Fhn, HopfData, NormalFormCoefficients, ReactionModel};

/// Inner and outer radius of the window applied to reconstructed fields, as
/// fractions of the half-width; it removes the periodic seam of the grid.
pub const WINDOW: (f64, f64) = (0.88, 0.98);

fn one() -> i32 {
    1
}
fn default_tol() -> f64 {
    1e-10
}
fn default_iter() -> usize {
    50
}
fn default_width() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveConfig {
    pub tau: f64,
    pub beta: f64,
    pub delta: f64,
    pub kernel: KernelSpec,
    #[serde(default = "one")]
    pub n0: i32,
    /// Scale of the reduced problem; ignored when `laplacian_limit` is set.
    pub eps: f64,
    pub lambda_bar: f64,
    #[serde(default)]
    pub mu: f64,
    /// Reference speed correction; defaults to the far-field balance.
    #[serde(default)]
    pub mu_star: Option<f64>,
    /// Solve with the `ε → 0` symbol `−αP²` instead of `K̃_ε`.
    #[serde(default)]
    pub laplacian_limit: bool,
    pub rmax: f64,
    pub nodes: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_iter")]
    pub max_iter: usize,
    /// Width of the `tanh` front used as Newton initial guess.
    #[serde(default = "default_width")]
    pub init_width: f64,
    #[serde(default)]
    pub reconstruct: Option<GridSpec>,
}

#[derive(Debug, Clone)]
pub struct WaveSetup {
    pub fhn: Fhn,
    pub model: ReactionModel,
    pub hopf: HopfData,
    pub nf: NormalFormCoefficients,
    pub base: KernelSymbol,
    pub problem: ReducedProblem,
    pub mu_star: f64,
}

/// `μ*` balancing the imaginary parts of `λ_c + a|w₀|²` at `R → ∞`, where the
/// constant-modulus state `|w₀|² = −Re λ_c / Re a` must hold.
pub fn far_field_mu_star(nf: &NormalFormCoefficients, hopf: &HopfData, lambda_bar: f64) -> Result<f64> {
    let lc = nf.nu1 * lambda_bar;
    let a = nf.a();
    let amp2 = -lc.re / a.re;
    if !(amp2 > 0.0) {
        return Err(Error::Param(format!(
            "no supercritical far field: Re λ_c = {}, Re a = {}",
            lc.re, a.re
        )));
    }
    // In the co-rotating convention the speed enters as −i(μ* + μ)n₀.
    Ok((lc.im + a.im * amp2) / hopf.n0 as f64)
}

pub fn setup_wave(cfg: &WaveConfig, base_dir: Option<&Path>) -> Result<WaveSetup> {
    let fhn = Fhn::new(cfg.tau, cfg.beta, cfg.delta)?;
    let model = fhn.model();
    let hopf = hopf_data(&model, cfg.n0)?;
    let nf = coefficients(&model, &hopf)?;
    let base = cfg.kernel.build(base_dir)?.validate()?;
    let mu_star = match cfg.mu_star {
        Some(m) => m,
        None => far_field_mu_star(&nf, &hopf, cfg.lambda_bar)?,
    };
    let eps = if cfg.laplacian_limit { 0.0 } else { cfg.eps };
    let problem = ReducedProblem::from_normal_form(&nf, &hopf, &base, eps, cfg.lambda_bar, mu_star, cfg.mu)?;
    Ok(WaveSetup { fhn, model, hopf, nf, base, problem, mu_star })
}

impl WaveSetup {
    pub fn solve(&self, cfg: &WaveConfig) -> Result<ProfileSolution> {
        let plan = Arc::new(HankelPlan::new(cfg.n0, cfg.rmax, cfg.nodes)?);
        let init = match self.problem.supercritical_amplitude() {
            Some(amplitude) => Init::TanhFront { amplitude, width: cfg.init_width },
            None => Init::Zero,
        };
        solve_profile(&self.problem, plan, init, cfg.tol, cfg.max_iter)
    }

    /// Rotation speed `c* + ε²(μ* + μ)` of the full wave.
    pub fn speed(&self, eps: f64, mu: f64) -> f64 {
        self.hopf.c_star + eps * eps * (self.mu_star + mu)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnsatzResidual {
    pub eps: f64,
    pub half_width: f64,
    pub sup_norm: f64,
    pub l2_norm: f64,
}

/// Steady residual of the windowed ansatz `εU₁ + ε²U₂` at scale `eps` on an
/// `n × n` grid of half-width `reach / eps`, with `λ = ε²λ̄`.
pub fn ansatz_residual(
    setup: &WaveSetup,
    sol: &ProfileSolution,
    eps: f64,
    lambda_bar: f64,
    mu: f64,
    n: usize,
    reach: f64,
) -> Result<AnsatzResidual> {
    let half_width = reach / eps;
    let state = reconstruct(&setup.hopf, &setup.nf, sol, eps, GridSpec { n, half_width })?;
    let chi = radial_window(n, half_width, WINDOW.0 * half_width, WINDOW.1 * half_width);
    let state = state.weighted(&chi);
    let r = steady_residual(&setup.model, &setup.base, setup.speed(eps, mu), &state, eps * eps * lambda_bar)?;
    Ok(AnsatzResidual { eps, half_width, sup_norm: r.sup_norm, l2_norm: r.l2_norm })
}
