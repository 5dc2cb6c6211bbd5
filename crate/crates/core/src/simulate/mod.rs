//! Pseudo-spectral integrator for the nonlocal FitzHugh–Nagumo system
//!
//! ```text
//! u_t = K ∗ u + (u − u³ − v)/τ,    v_t = βu + δ
//! ```
//!
//! on a periodic square, in deviation variables `(p, q) = (u − u*, v − v*)`
//! around the homogeneous state. Each wavenumber carries the exact 2×2 linear
//! part `[[K̂(|k|) + λ/τ, −1/τ], [β, 0]]`, `λ = 1 − 3u*²`; the remainder
//! `−(3u*p² + p³)/τ` acts on `p` only and is treated explicitly.

mod diagnostics;
mod dump;
mod phi;

pub use diagnostics::{
    detect_spiral, local_coherence, mask_cores, period_from_series, phase_field, upward_crossings, Core,
    SpiralDiagnostics,
};
pub use dump::{decode_dump, encode_dump, read_dump, write_atomic, write_dump, DUMP_VERSION, MAGIC};

use std::path::{Path, PathBuf};

use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{symbol_grid, Fft2, Field2D, FieldState};
use crate::kernel::{KernelSpec, KernelSymbol};
use crate::normalform::Fhn;
use phi::{inverse, phi_matrix, scale, M2};

/// Fraction of the half-width inside which diagnostics are reported.
pub const DIAGNOSTIC_MASK: f64 = 0.8;

/// Crossings per probe entering a period estimate.
pub const PERIOD_CROSSINGS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Etdrk4,
    ImexEuler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// Homogeneous state plus uniform noise in `[−a, a]` on both components.
    /// A positive `correlation_length` ℓ smooths the noise with the Gaussian
    /// multiplier `exp(−ℓ²|k|²/4)` and rescales it to the same sup-norm.
    RandomPerturbation {
        amplitude: f64,
        #[serde(default)]
        correlation_length: f64,
    },
    /// `p = ½tanh(x/2)`, `q = ½tanh(y/2)`: a single phase singularity at the centre.
    CrossGradient,
    /// A binary dump on the same grid.
    File { path: PathBuf },
}

fn default_scheme() -> Scheme {
    Scheme::Etdrk4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    pub tau: f64,
    pub beta: f64,
    pub delta: f64,
    pub kernel: KernelSpec,
    #[serde(default)]
    pub seed: u64,
    pub ic: InitialCondition,
    pub snapshot_every: usize,
    /// Probe points for time series; defaults to eight points at `0.4L`.
    #[serde(default)]
    pub probes: Option<Vec<[f64; 2]>>,
    /// Disk radius for the coherence field; defaults to four grid cells.
    #[serde(default)]
    pub coherence_radius: Option<f64>,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n < 8 || !self.n.is_power_of_two() {
            return bad(format!("n must be a power of two ≥ 8, got {}", self.n));
        }
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return bad(format!("L must be positive, got {}", self.half_width));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be non-negative, got {}", self.t_end));
        }
        if self.snapshot_every == 0 {
            return bad("snapshot_every must be at least 1".into());
        }
        if let InitialCondition::RandomPerturbation { amplitude, correlation_length } = self.ic {
            if !(amplitude > 0.0 && amplitude.is_finite()) {
                return bad(format!("random perturbation amplitude must be positive, got {amplitude}"));
            }
            if !(correlation_length >= 0.0 && correlation_length.is_finite()) {
                return bad(format!("correlation length must be non-negative, got {correlation_length}"));
            }
        }
        Fhn::new(self.tau, self.beta, self.delta).map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn model(&self) -> Result<Fhn> {
        Fhn::new(self.tau, self.beta, self.delta)
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn probe_points(&self) -> Vec<[f64; 2]> {
        self.probes.clone().unwrap_or_else(|| {
            let a = 0.4 * self.half_width;
            vec![[a, 0.0], [-a, 0.0], [0.0, a], [0.0, -a], [a, a], [-a, a], [a, -a], [-a, -a]]
        })
    }

    pub fn coherence_radius(&self) -> f64 {
        self.coherence_radius.unwrap_or(4.0 * self.spacing())
    }
}

/// Initial state; `base_dir` resolves relative dump paths.
pub fn initial_state(cfg: &SimConfig, base_dir: Option<&Path>) -> Result<FieldState> {
    cfg.validate()?;
    let fhn = cfg.model()?;
    let (us, vs) = (fhn.u_star(), fhn.v_star());
    let (n, l) = (cfg.n, cfg.half_width);
    match &cfg.ic {
        InitialCondition::RandomPerturbation { amplitude, correlation_length } => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let fft = Fft2::new(n);
            let mut noise = |c: f64| -> Vec<f64> {
                let mut w: Vec<C> = (0..n * n).map(|_| C::new(rng.gen_range(-1.0..=1.0), 0.0)).collect();
                if *correlation_length > 0.0 {
                    fft.forward(&mut w);
                    let k: Vec<f64> = (0..n).map(|j| crate::field::wavenumber(n, l, j)).collect();
                    let ell2 = correlation_length * correlation_length / 4.0;
                    for (idx, z) in w.iter_mut().enumerate() {
                        let (kx, ky) = (k[idx % n], k[idx / n]);
                        *z *= (-ell2 * (kx * kx + ky * ky)).exp();
                    }
                    fft.inverse(&mut w);
                    let sup = w.iter().fold(0.0f64, |m, z| m.max(z.re.abs()));
                    w.iter_mut().for_each(|z| *z /= sup);
                }
                w.iter().map(|z| c + amplitude * z.re).collect()
            };
            let u = noise(us);
            let v = noise(vs);
            FieldState::new(0.0, Field2D::from_real(n, l, &u)?, Field2D::from_real(n, l, &v)?)
        }
        InitialCondition::CrossGradient => FieldState::new(
            0.0,
            Field2D::from_fn(n, l, |x, _| C::new(us + 0.5 * (x / 2.0).tanh(), 0.0))?,
            Field2D::from_fn(n, l, |_, y| C::new(vs + 0.5 * (y / 2.0).tanh(), 0.0))?,
        ),
        InitialCondition::File { path } => {
            let p = match base_dir {
                Some(d) if path.is_relative() => d.join(path),
                _ => path.clone(),
            };
            let s = read_dump(&p)?;
            if s.n() != n || (s.half_width() - l).abs() > 1e-12 * l {
                return Err(Error::Config(format!(
                    "{}: grid n = {}, L = {} does not match config n = {n}, L = {l}",
                    p.display(),
                    s.n(),
                    s.half_width()
                )));
            }
            Ok(s)
        }
    }
}

/// Per-wavenumber step operators. Only first columns are kept where the
/// nonlinearity (which lives in the `u` slot) is applied.
enum Stepper {
    Etdrk4 {
        e: Vec<M2>,
        e2: Vec<M2>,
        q: Vec<[f64; 2]>,
        b1: Vec<[f64; 2]>,
        b2: Vec<[f64; 2]>,
        b4: Vec<[f64; 2]>,
    },
    ImexEuler {
        inv: Vec<M2>,
    },
}

fn mat_vec(m: &M2, p: C, q: C) -> (C, C) {
    (p * m[0][0] + q * m[0][1], p * m[1][0] + q * m[1][1])
}

fn col(m: &M2) -> [f64; 2] {
    [m[0][0], m[1][0]]
}

/// Explicit part: transforms, the cubic remainder and bookkeeping.
struct Explicit {
    fft: Fft2,
    u_star: f64,
    tau: f64,
    enabled: bool,
    imag_residue: f64,
    scratch: Vec<C>,
}

impl Explicit {
    /// Real part of the inverse transform; tracks the discarded imaginary part.
    fn physical(&mut self, hat: &[C], step: usize) -> Result<Vec<f64>> {
        self.scratch.copy_from_slice(hat);
        self.fft.inverse(&mut self.scratch);
        let im = self.scratch.par_iter().map(|z| z.im.abs()).reduce(|| 0.0, f64::max);
        self.imag_residue = self.imag_residue.max(im);
        let out: Vec<f64> = self.scratch.iter().map(|z| z.re).collect();
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Error::Divergence { step });
        }
        Ok(out)
    }

    fn eval(&mut self, p_hat: &[C], step: usize) -> Result<Vec<C>> {
        if !self.enabled {
            return Ok(vec![C::new(0.0, 0.0); p_hat.len()]);
        }
        let p = self.physical(p_hat, step)?;
        let (us, tau) = (self.u_star, self.tau);
        let mut out: Vec<C> = p.par_iter().map(|&p| C::new(-(3.0 * us * p * p + p * p * p) / tau, 0.0)).collect();
        self.fft.forward(&mut out);
        Ok(out)
    }
}

/// Time stepper holding the state in spectral space.
pub struct Simulator {
    fhn: Fhn,
    n: usize,
    half_width: f64,
    dt: f64,
    stepper: Stepper,
    explicit: Explicit,
    p_hat: Vec<C>,
    q_hat: Vec<C>,
    step: usize,
    t0: f64,
}

impl std::fmt::Debug for Simulator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Simulator")
            .field("n", &self.n)
            .field("dt", &self.dt)
            .field("t", &self.time())
            .finish()
    }
}

/// Projects a spectrum onto its Hermitian part, i.e. keeps the transform of
/// a real field. Rounding otherwise seeds an imaginary component that the
/// unstable low modes amplify without bound.
fn hermitian_part(n: usize, hat: &mut [C]) {
    let src = hat.to_vec();
    hat.par_chunks_mut(n).enumerate().for_each(|(iy, row)| {
        let my = (n - iy) % n;
        for (ix, z) in row.iter_mut().enumerate() {
            let mx = (n - ix) % n;
            *z = (src[iy * n + ix] + src[my * n + mx].conj()) * 0.5;
        }
    });
}

/// `E·(p, q) + f·w` per wavenumber.
fn propagate(e: &[M2], p: &[C], q: &[C], w: &[[f64; 2]], f: impl Fn(usize) -> C + Sync) -> (Vec<C>, Vec<C>) {
    (0..p.len())
        .into_par_iter()
        .map(|k| {
            let (a, b) = mat_vec(&e[k], p[k], q[k]);
            let g = f(k);
            (a + g * w[k][0], b + g * w[k][1])
        })
        .unzip()
}

impl Simulator {
    pub fn new(cfg: &SimConfig, sym: &KernelSymbol, state: &FieldState) -> Result<Self> {
        cfg.validate()?;
        if state.n() != cfg.n {
            return Err(Error::Shape { expected: cfg.n, got: state.n() });
        }
        let fhn = cfg.model()?;
        let (n, l, h) = (cfg.n, cfg.half_width, cfg.dt);
        let khat = symbol_grid(sym, n, l)?;
        let lin = |k: f64| -> M2 { [[k + fhn.lambda() / fhn.tau, -1.0 / fhn.tau], [fhn.beta, 0.0]] };
        let stepper = match cfg.scheme {
            Scheme::Etdrk4 => {
                type Ops = (M2, M2, [f64; 2], [f64; 2], [f64; 2], [f64; 2]);
                let ops: Vec<Ops> = khat
                    .par_iter()
                    .map(|&k| {
                        let z = scale(&lin(k), h);
                        let zh = scale(&z, 0.5);
                        let (p1, p2, p3) = (phi_matrix(1, &z), phi_matrix(2, &z), phi_matrix(3, &z));
                        let b = |c1: f64, c2: f64, c3: f64| {
                            [0, 1].map(|i| h * (c1 * p1[i][0] + c2 * p2[i][0] + c3 * p3[i][0]))
                        };
                        (
                            phi_matrix(0, &z),
                            phi_matrix(0, &zh),
                            col(&scale(&phi_matrix(1, &zh), 0.5 * h)),
                            b(1.0, -3.0, 4.0),
                            b(0.0, 2.0, -4.0),
                            b(0.0, -1.0, 4.0),
                        )
                    })
                    .collect();
                Stepper::Etdrk4 {
                    e: ops.iter().map(|o| o.0).collect(),
                    e2: ops.iter().map(|o| o.1).collect(),
                    q: ops.iter().map(|o| o.2).collect(),
                    b1: ops.iter().map(|o| o.3).collect(),
                    b2: ops.iter().map(|o| o.4).collect(),
                    b4: ops.iter().map(|o| o.5).collect(),
                }
            }
            Scheme::ImexEuler => {
                let inv = khat
                    .iter()
                    .map(|&k| {
                        let a = lin(k);
                        let m = [[1.0 - h * a[0][0], -h * a[0][1]], [-h * a[1][0], 1.0 - h * a[1][1]]];
                        inverse(&m).ok_or_else(|| Error::Param(format!("implicit Euler matrix singular at symbol {k}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Stepper::ImexEuler { inv }
            }
        };
        let fft = Fft2::new(n);
        let to_hat = |f: &Field2D, shift: f64| {
            let mut d: Vec<C> = f.data.iter().map(|z| C::new(z.re - shift, 0.0)).collect();
            fft.forward(&mut d);
            d
        };
        let p_hat = to_hat(&state.u, fhn.u_star());
        let q_hat = to_hat(&state.v, fhn.v_star());
        Ok(Self {
            n,
            half_width: l,
            dt: h,
            stepper,
            p_hat,
            q_hat,
            step: 0,
            t0: state.t,
            explicit: Explicit {
                fft,
                u_star: fhn.u_star(),
                tau: fhn.tau,
                enabled: true,
                imag_residue: 0.0,
                scratch: vec![C::new(0.0, 0.0); n * n],
            },
            fhn,
        })
    }

    /// Drops the explicit nonlinearity; used for linear-propagator checks.
    pub fn set_nonlinear(&mut self, on: bool) {
        self.explicit.enabled = on;
    }

    pub fn time(&self) -> f64 {
        self.t0 + self.step as f64 * self.dt
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    /// Largest imaginary residue seen after inverse transforms.
    pub fn imag_residue(&self) -> f64 {
        self.explicit.imag_residue
    }

    /// Current `u` at the given grid indices, in absolute variables.
    pub fn sample_u(&mut self, idx: &[usize]) -> Result<Vec<f64>> {
        let p = self.explicit.physical(&self.p_hat, self.step)?;
        Ok(idx.iter().map(|&k| p[k] + self.fhn.u_star()).collect())
    }

    pub fn step(&mut self) -> Result<()> {
        let ex = &mut self.explicit;
        let st = self.step;
        let nu = ex.eval(&self.p_hat, st)?;
        match &self.stepper {
            Stepper::ImexEuler { inv } => {
                let h = self.dt;
                self.p_hat
                    .par_iter_mut()
                    .zip(self.q_hat.par_iter_mut())
                    .zip(inv.par_iter().zip(&nu))
                    .for_each(|((p, q), (m, nl))| {
                        let (a, b) = mat_vec(m, *p + nl * h, *q);
                        *p = a;
                        *q = b;
                    });
            }
            Stepper::Etdrk4 { e, e2, q, b1, b2, b4 } => {
                let (ap, aq) = propagate(e2, &self.p_hat, &self.q_hat, q, |k| nu[k]);
                let na = ex.eval(&ap, st)?;
                let (bp, _) = propagate(e2, &self.p_hat, &self.q_hat, q, |k| na[k]);
                let nb = ex.eval(&bp, st)?;
                let (cp, _) = propagate(e2, &ap, &aq, q, |k| nb[k] * 2.0 - nu[k]);
                let nc = ex.eval(&cp, st)?;
                self.p_hat
                    .par_iter_mut()
                    .zip(self.q_hat.par_iter_mut())
                    .enumerate()
                    .for_each(|(k, (p, qv))| {
                        let (a, b) = mat_vec(&e[k], *p, *qv);
                        let s = na[k] + nb[k];
                        *p = a + nu[k] * b1[k][0] + s * b2[k][0] + nc[k] * b4[k][0];
                        *qv = b + nu[k] * b1[k][1] + s * b2[k][1] + nc[k] * b4[k][1];
                    });
            }
        }
        hermitian_part(self.n, &mut self.p_hat);
        hermitian_part(self.n, &mut self.q_hat);
        self.step += 1;
        Ok(())
    }

    /// Physical state in absolute variables.
    pub fn state(&mut self) -> Result<FieldState> {
        let (n, l, st) = (self.n, self.half_width, self.step);
        let p = self.explicit.physical(&self.p_hat, st)?;
        let q = self.explicit.physical(&self.q_hat, st)?;
        let (us, vs) = (self.fhn.u_star(), self.fhn.v_star());
        let u = Field2D::from_real(n, l, &p.iter().map(|x| x + us).collect::<Vec<_>>())?;
        let v = Field2D::from_real(n, l, &q.iter().map(|x| x + vs).collect::<Vec<_>>())?;
        FieldState::new(self.time(), u, v)
    }
}

/// One step from `state` under `cfg`.
pub fn step(state: &FieldState, cfg: &SimConfig, base_dir: Option<&Path>) -> Result<FieldState> {
    let sym = cfg.kernel.build(base_dir)?;
    let mut sim = Simulator::new(cfg, &sym, state)?;
    sim.step()?;
    sim.state()
}

/// `u` time series at the probe points, one sample per step.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProbeSeries {
    pub points: Vec<[f64; 2]>,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl ProbeSeries {
    /// Median over probes of the mean spacing of the last
    /// [`PERIOD_CROSSINGS`] upward crossings of `level` up to time `t`.
    pub fn period(&self, level: f64, t: f64) -> Option<f64> {
        let hi = self.times.partition_point(|&s| s <= t);
        let mut ps: Vec<f64> = self
            .values
            .iter()
            .filter_map(|v| {
                let x = upward_crossings(&self.times[..hi], &v[..hi], level);
                let x = &x[x.len().saturating_sub(PERIOD_CROSSINGS)..];
                (x.len() >= 2).then(|| (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64)
            })
            .collect();
        if ps.is_empty() {
            return None;
        }
        ps.sort_by(f64::total_cmp);
        Some(ps[ps.len() / 2])
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let mut header = vec!["t".to_string()];
        header.extend(self.points.iter().map(|p| format!("u({},{})", p[0], p[1])));
        w.write_record(&header).map_err(|e| Error::Format(e.to_string()))?;
        for (k, t) in self.times.iter().enumerate() {
            let mut rec = vec![format!("{t:.17e}")];
            rec.extend(self.values.iter().map(|v| format!("{:.17e}", v[k])));
            w.write_record(&rec).map_err(|e| Error::Format(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub snapshots: Vec<FieldState>,
    pub diagnostics: Vec<SpiralDiagnostics>,
    pub probes: ProbeSeries,
    pub imag_residue: f64,
}

/// Diagnostics of one snapshot: masked cores, coherence and the period from
/// the most recent probe crossings.
pub fn snapshot_diagnostics(cfg: &SimConfig, state: &FieldState, probes: &ProbeSeries) -> Result<SpiralDiagnostics> {
    let fhn = cfg.model()?;
    let (ur, vr) = (fhn.u_star(), fhn.v_star());
    let cores = mask_cores(&detect_spiral(state, ur, vr), DIAGNOSTIC_MASK * cfg.half_width);
    Ok(SpiralDiagnostics {
        t: state.t,
        cores,
        period_estimate: probes.period(ur, state.t),
        coherence: local_coherence(state, ur, vr, cfg.coherence_radius())?,
    })
}

/// Integrates to `t_end`, handing each snapshot and its diagnostics to `sink`
/// as soon as it is produced.
pub fn run_with(
    cfg: &SimConfig,
    base_dir: Option<&Path>,
    mut sink: impl FnMut(&FieldState, &SpiralDiagnostics) -> Result<()>,
) -> Result<(ProbeSeries, f64)> {
    cfg.validate()?;
    let sym = cfg.kernel.build(base_dir)?;
    let init = initial_state(cfg, base_dir)?;
    let mut sim = Simulator::new(cfg, &sym, &init)?;
    let points = cfg.probe_points();
    let idx: Vec<usize> = points
        .iter()
        .map(|p| {
            let j = |x: f64| (((x + cfg.half_width) / cfg.spacing()).round() as usize).min(cfg.n - 1);
            j(p[1]) * cfg.n + j(p[0])
        })
        .collect();
    let mut probes = ProbeSeries { points: points.clone(), values: vec![vec![]; points.len()], ..Default::default() };
    let record = |sim: &mut Simulator, probes: &mut ProbeSeries| -> Result<()> {
        let vals = sim.sample_u(&idx)?;
        probes.times.push(sim.time());
        for (s, v) in probes.values.iter_mut().zip(vals) {
            s.push(v);
        }
        Ok(())
    };
    record(&mut sim, &mut probes)?;
    let d0 = snapshot_diagnostics(cfg, &init, &probes)?;
    sink(&init, &d0)?;
    let steps = cfg.steps();
    for k in 1..=steps {
        sim.step()?;
        record(&mut sim, &mut probes)?;
        if k % cfg.snapshot_every == 0 || k == steps {
            let s = sim.state()?;
            let d = snapshot_diagnostics(cfg, &s, &probes)?;
            sink(&s, &d)?;
        }
    }
    Ok((probes, sim.imag_residue()))
}

pub fn run(cfg: &SimConfig, base_dir: Option<&Path>) -> Result<RunOutput> {
    let mut snapshots = vec![];
    let mut diagnostics = vec![];
    let (probes, imag_residue) = run_with(cfg, base_dir, |s, d| {
        snapshots.push(s.clone());
        diagnostics.push(d.clone());
        Ok(())
    })?;
    Ok(RunOutput { snapshots, diagnostics, probes, imag_residue })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix2;

    fn cfg(n: usize, l: f64, dt: f64, t_end: f64) -> SimConfig {
        SimConfig {
            n,
            half_width: l,
            dt,
            t_end,
            scheme: Scheme::Etdrk4,
            tau: 0.2,
            beta: 1.0,
            delta: 0.1,
            kernel: KernelSpec::Rational { diffusion: 5.0, range: 0.5 },
            seed: 7,
            ic: InitialCondition::RandomPerturbation { amplitude: 0.1, correlation_length: 0.0 },
            snapshot_every: 5,
            probes: None,
            coherence_radius: None,
        }
    }

    fn sim_from(c: &SimConfig, s: &FieldState) -> Simulator {
        Simulator::new(c, &c.kernel.build(None).unwrap(), s).unwrap()
    }

    #[test]
    fn zero_is_fixed_without_forcing() {
        for scheme in [Scheme::Etdrk4, Scheme::ImexEuler] {
            let mut c = cfg(16, 5.0, 0.05, 1.0);
            c.delta = 0.0;
            c.scheme = scheme;
            let z = FieldState::new(0.0, Field2D::zeros(16, 5.0).unwrap(), Field2D::zeros(16, 5.0).unwrap()).unwrap();
            let mut s = sim_from(&c, &z);
            for _ in 0..20 {
                s.step().unwrap();
            }
            let out = s.state().unwrap();
            assert_eq!(out.u.sup_norm() + out.v.sup_norm(), 0.0);
        }
    }

    #[test]
    fn homogeneous_state_is_stationary() {
        for scheme in [Scheme::Etdrk4, Scheme::ImexEuler] {
            let mut c = cfg(16, 5.0, 0.05, 1.0);
            c.scheme = scheme;
            c.delta = 0.13;
            c.beta = 0.7;
            let (us, vs) = (-0.13 / 0.7, (0.13f64 / 0.7).powi(3) - 0.13 / 0.7);
            let u = Field2D::from_fn(16, 5.0, |_, _| C::new(us, 0.0)).unwrap();
            let v = Field2D::from_fn(16, 5.0, |_, _| C::new(vs, 0.0)).unwrap();
            let st = FieldState::new(0.0, u, v).unwrap();
            let mut s = sim_from(&c, &st);
            for _ in 0..10 {
                let before = s.state().unwrap();
                s.step().unwrap();
                let after = s.state().unwrap();
                for (a, b) in after.u.data.iter().chain(&after.v.data).zip(before.u.data.iter().chain(&before.v.data)) {
                    assert!((a - b).norm() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn linear_modes_match_matrix_exponential() {
        let c = cfg(32, 8.0, 0.03, 1.0);
        let fhn = c.model().unwrap();
        let sym = c.kernel.build(None).unwrap();
        let (mx, my) = (3.0, -2.0);
        let (kx, ky) = (mx * std::f64::consts::PI / 8.0, my * std::f64::consts::PI / 8.0);
        let (p0, q0) = (0.3, -0.2);
        let u = Field2D::from_fn(32, 8.0, |x, y| C::new(fhn.u_star() + p0 * (kx * x + ky * y).cos(), 0.0)).unwrap();
        let v = Field2D::from_fn(32, 8.0, |x, y| C::new(fhn.v_star() + q0 * (kx * x + ky * y).cos(), 0.0)).unwrap();
        let mut s = sim_from(&c, &FieldState::new(0.0, u, v).unwrap());
        s.set_nonlinear(false);
        let m = 40;
        for _ in 0..m {
            s.step().unwrap();
        }
        let out = s.state().unwrap();
        let k = sym.eval((kx * kx + ky * ky).sqrt()).unwrap();
        let a = Matrix2::new(k + fhn.lambda() / fhn.tau, -1.0 / fhn.tau, fhn.beta, 0.0);
        let prop = (a * (m as f64 * c.dt)).exp();
        let (pe, qe) = (prop[(0, 0)] * p0 + prop[(0, 1)] * q0, prop[(1, 0)] * p0 + prop[(1, 1)] * q0);
        for iy in 0..32 {
            for ix in 0..32 {
                let ph = (kx * out.u.coord(ix) + ky * out.u.coord(iy)).cos();
                assert!((out.u.get(ix, iy).re - fhn.u_star() - pe * ph).abs() <= 1e-8);
                assert!((out.v.get(ix, iy).re - fhn.v_star() - qe * ph).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn run_is_deterministic_and_real() {
        let c = cfg(32, 10.0, 0.02, 0.4);
        let a = run(&c, None).unwrap();
        let b = run(&c, None).unwrap();
        assert_eq!(a.snapshots.len(), 5);
        for (x, y) in a.snapshots.iter().zip(&b.snapshots) {
            assert_eq!(encode_dump(x), encode_dump(y));
        }
        assert!(a.imag_residue <= 1e-12, "{}", a.imag_residue);
        let mut d = c.clone();
        d.seed = 8;
        assert_ne!(encode_dump(&run(&d, None).unwrap().snapshots[0]), encode_dump(&a.snapshots[0]));
    }

    #[test]
    fn zero_horizon_returns_initial_snapshot() {
        let out = run(&cfg(16, 5.0, 0.1, 0.0), None).unwrap();
        assert_eq!(out.snapshots.len(), 1);
        assert_eq!(out.snapshots[0].t, 0.0);
    }

    fn smooth_final(dt: f64) -> FieldState {
        let mut c = cfg(32, 10.0, dt, 1.0);
        c.ic = InitialCondition::CrossGradient;
        let init = initial_state(&c, None).unwrap();
        let mut s = sim_from(&c, &init);
        for _ in 0..c.steps() {
            s.step().unwrap();
        }
        s.state().unwrap()
    }

    #[test]
    fn etdrk4_is_fourth_order() {
        let (a, b, c) = (smooth_final(0.1), smooth_final(0.05), smooth_final(0.025));
        let diff = |x: &FieldState, y: &FieldState| {
            x.u.data.iter().zip(&y.u.data).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max)
        };
        let ratio = diff(&a, &b) / diff(&b, &c);
        assert!((8.0..=32.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn imex_is_first_order() {
        let final_at = |dt: f64| {
            let mut c = cfg(16, 10.0, dt, 0.5);
            c.scheme = Scheme::ImexEuler;
            c.ic = InitialCondition::CrossGradient;
            let init = initial_state(&c, None).unwrap();
            let mut s = sim_from(&c, &init);
            for _ in 0..c.steps() {
                s.step().unwrap();
            }
            s.state().unwrap()
        };
        let (a, b, c) = (final_at(0.01), final_at(0.005), final_at(0.0025));
        let diff = |x: &FieldState, y: &FieldState| x.u.data.iter().zip(&y.u.data).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        let ratio = diff(&a, &b) / diff(&b, &c);
        assert!((1.6..=2.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn config_validation() {
        let mut c = cfg(16, 5.0, 0.1, 1.0);
        c.dt = 0.0;
        assert!(c.validate().is_err());
        let mut c = cfg(24, 5.0, 0.1, 1.0);
        assert!(c.validate().is_err());
        c.n = 16;
        c.ic = InitialCondition::RandomPerturbation { amplitude: 0.0, correlation_length: 0.0 };
        assert!(c.validate().is_err());
        let text = r#"
            n = 64
            L = 20.0
            dt = 0.05
            t_end = 10.0
            scheme = "imex_euler"
            tau = 0.2
            beta = 1.0
            delta = 0.1
            seed = 3
            snapshot_every = 10
            kernel = { family = "rational", D = 5.0, d = 0.5 }
            ic = { kind = "random_perturbation", amplitude = 0.05 }
        "#;
        let c: SimConfig = toml::from_str(text).unwrap();
        assert_eq!(c.scheme, Scheme::ImexEuler);
        assert_eq!(c.steps(), 200);
        c.validate().unwrap();
        let back: SimConfig = toml::from_str(&toml::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn divergence_is_reported() {
        // Forward-Euler treatment of the cubic term blows up for large steps.
        let mut c = cfg(16, 5.0, 0.5, 50.0);
        c.ic = InitialCondition::RandomPerturbation { amplitude: 3.0, correlation_length: 0.0 };
        c.scheme = Scheme::ImexEuler;
        match run(&c, None) {
            Err(Error::Divergence { step }) => assert!(step > 0),
            other => panic!("{:?}", other.map(|o| o.snapshots.len())),
        }
    }

    #[test]
    fn dump_initial_condition() {
        let c = cfg(16, 5.0, 0.1, 0.0);
        let s = initial_state(&c, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_dump(dir.path().join("ic.bin"), &s).unwrap();
        let mut d = c.clone();
        d.ic = InitialCondition::File { path: "ic.bin".into() };
        assert_eq!(initial_state(&d, Some(dir.path())).unwrap(), s);
        d.n = 32;
        assert!(matches!(initial_state(&d, Some(dir.path())), Err(Error::Config(_))));
    }
}
