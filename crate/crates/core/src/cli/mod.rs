//! Command-line front end. Every subcommand writes its artifacts plus a
//! `manifest.json` into `--out`; domain errors print one JSON line to stderr.

mod heatmap;
mod manifest;

use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldState;
use crate::hankel::{HankelPlan, RadialProfile};
use crate::kernel::{KernelSpec, ValidationReport};
use crate::normalform::{coefficients, hopf_data, Fhn};
use crate::rotwave::{ansatz_residual, reconstruct, setup_wave, WaveConfig};
use crate::simulate::{run_with, write_atomic, write_dump, Core, SimConfig};

pub use heatmap::{colormap, encode_heatmap, render_heatmap, symmetric_range};
pub use manifest::{config_hash, sha256_hex, write_manifest, Output, RunManifest, MANIFEST_FILE};

#[derive(Debug, Parser)]
#[command(name = "nloc", version, about = "Rotating waves in nonlocal oscillatory media")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct OutDir {
    /// Directory receiving all artifacts and the run manifest.
    #[arg(long, default_value = "nloc-out")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Family {
    Rational,
    Tabulated,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the kernel symbol against the structural hypotheses.
    ValidateKernel {
        #[arg(long, value_enum)]
        family: Family,
        /// Diffusion strength of the rational family.
        #[arg(long = "D")]
        diffusion: Option<f64>,
        /// Range parameter of the rational family.
        #[arg(long = "d")]
        range: Option<f64>,
        /// Two-column CSV `rho,value` for the tabulated family.
        #[arg(long)]
        path: Option<PathBuf>,
        /// Upper end of the boundedness scan.
        #[arg(long, default_value_t = 100.0)]
        rho_max: f64,
        /// Constant of the quartic remainder bound.
        #[arg(long, default_value_t = 1e4)]
        tol: f64,
        #[command(flatten)]
        out: OutDir,
    },
    /// Integrate the nonlocal FitzHugh–Nagumo system on a periodic square.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        out: OutDir,
    },
    /// Hopf data and reduced-equation coefficients of the FitzHugh–Nagumo model.
    NormalForm {
        #[arg(long)]
        tau: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 1, allow_negative_numbers = true)]
        n0: i32,
        #[command(flatten)]
        out: OutDir,
    },
    /// Solve the reduced profile equation of a rotating wave.
    SolveWave {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        out: OutDir,
    },
    /// Steady residual of the reconstructed ansatz over a list of scales.
    ResidualCheck {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        out: OutDir,
    },
    /// Gaussian identities of the discrete Hankel transform.
    HankelSelftest {
        #[arg(long, default_value_t = 256)]
        nodes: usize,
        #[arg(long, default_value_t = 10.0)]
        rmax: f64,
        #[command(flatten)]
        out: OutDir,
    },
}

/// Parses `argv` (program name first) and runs the subcommand: 0 on success,
/// 1 on domain errors, 2 on usage errors.
pub fn run_command<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    init_threads();
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": e.kind(), "message": e.to_string() }));
            1
        }
    }
}

/// `NLOC_THREADS` caps the worker pool; unset or invalid leaves the default.
fn init_threads() {
    if let Some(n) = std::env::var("NLOC_THREADS").ok().and_then(|s| s.trim().parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    let start = Instant::now();
    let (name, out, hash, outputs) = match command {
        Command::ValidateKernel { family, diffusion, range, path, rho_max, tol, out } => {
            let spec = match family {
                Family::Rational => KernelSpec::Rational {
                    diffusion: diffusion.ok_or_else(|| Error::Config("rational family needs --D".into()))?,
                    range: range.ok_or_else(|| Error::Config("rational family needs --d".into()))?,
                },
                Family::Tabulated => KernelSpec::Tabulated {
                    path: path.ok_or_else(|| Error::Config("tabulated family needs --path".into()))?,
                },
            };
            let hash = config_hash(&serde_json::json!({ "kernel": spec, "rho_max": rho_max, "tol": tol }))?;
            let outputs = validate_kernel(&spec, rho_max, tol, &out.out)?;
            ("validate-kernel", out.out, hash, outputs)
        }
        Command::Simulate { config, out } => {
            let (cfg, base) = load_section::<SimulateFile>(&config)?;
            let hash = config_hash(&cfg)?;
            let outputs = simulate(&cfg, Some(&base), &out.out)?;
            ("simulate", out.out, hash, outputs)
        }
        Command::NormalForm { tau, beta, delta, n0, out } => {
            let fhn = Fhn::new(tau, beta, delta)?;
            let hash = config_hash(&serde_json::json!({ "fhn": fhn, "n0": n0 }))?;
            let outputs = normal_form(&fhn, n0, &out.out)?;
            ("normal-form", out.out, hash, outputs)
        }
        Command::SolveWave { config, out } => {
            let (cfg, base) = load_section::<SolveWaveFile>(&config)?;
            let hash = config_hash(&cfg)?;
            let outputs = solve_wave(&cfg, Some(&base), &out.out)?;
            ("solve-wave", out.out, hash, outputs)
        }
        Command::ResidualCheck { config, out } => {
            let (cfg, base) = load_section::<ResidualCheckFile>(&config)?;
            let hash = config_hash(&cfg)?;
            let outputs = residual_check(&cfg, Some(&base), &out.out)?;
            ("residual-check", out.out, hash, outputs)
        }
        Command::HankelSelftest { nodes, rmax, out } => {
            let hash = config_hash(&serde_json::json!({ "nodes": nodes, "rmax": rmax }))?;
            let outputs = hankel_selftest(nodes, rmax, &out.out)?;
            ("hankel-selftest", out.out, hash, outputs)
        }
    };
    write_manifest(&out, name, hash, &outputs, start.elapsed().as_secs_f64())?;
    Ok(())
}

/// Config files hold one top-level table named after the subcommand.
trait Section: for<'de> Deserialize<'de> {
    type Inner: Serialize;
    fn into_inner(self) -> Self::Inner;
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateFile {
    simulate: SimulateSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolveWaveFile {
    solve_wave: WaveConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResidualCheckFile {
    residual_check: ResidualCheckConfig,
}

impl Section for SimulateFile {
    type Inner = SimulateSection;
    fn into_inner(self) -> SimulateSection {
        self.simulate
    }
}

impl Section for SolveWaveFile {
    type Inner = WaveConfig;
    fn into_inner(self) -> WaveConfig {
        self.solve_wave
    }
}

impl Section for ResidualCheckFile {
    type Inner = ResidualCheckConfig;
    fn into_inner(self) -> ResidualCheckConfig {
        self.residual_check
    }
}

/// Reads the config and returns it with the directory that relative paths
/// inside it resolve against.
fn load_section<S: Section>(path: &Path) -> Result<(S::Inner, PathBuf)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: S = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((file.into_inner(), base))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    write_atomic(&dir.join(name), text.as_bytes())?;
    Ok(name.into())
}

fn write_csv(dir: &Path, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<PathBuf> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fmt = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(header).map_err(fmt)?;
    for row in rows {
        w.write_record(row.iter().map(|v| format!("{v:.17e}"))).map_err(fmt)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    write_atomic(&dir.join(name), &bytes)?;
    Ok(name.into())
}

#[derive(Debug, Serialize)]
struct KernelReport<'a> {
    kernel: &'a KernelSpec,
    alpha: f64,
    ok: bool,
    #[serde(flatten)]
    report: &'a ValidationReport,
}

fn validate_kernel(spec: &KernelSpec, rho_max: f64, tol: f64, out: &Path) -> Result<Vec<PathBuf>> {
    let sym = spec.build(None)?;
    let report = sym.validate_hypotheses(rho_max, tol);
    // Families with a closed-form α report it exactly; tables report the fit.
    let alpha = match report.ok() {
        true => sym.clone().validated(rho_max, tol)?.alpha().unwrap_or(report.alpha_estimate),
        false => report.alpha_estimate,
    };
    let doc = KernelReport { kernel: spec, alpha, ok: report.ok(), report: &report };
    println!("{}", serde_json::to_string(&doc).map_err(|e| Error::Format(e.to_string()))?);
    if !report.ok() {
        return Err(Error::State(format!("kernel symbol fails hypotheses: {}", report.notes.join("; "))));
    }
    create_dir(out)?;
    Ok(vec![write_json(out, "kernel_report.json", &doc)?])
}

#[derive(Debug, Serialize)]
struct NormalFormReport {
    tau: f64,
    beta: f64,
    delta: f64,
    n0: i32,
    u_star: f64,
    v_star: f64,
    omega: f64,
    c_star: f64,
    #[serde(rename = "W1")]
    w1: [C; 2],
    #[serde(rename = "W1_star")]
    w1_star: [C; 2],
    #[serde(rename = "V1")]
    v1: [C; 2],
    #[serde(rename = "V0")]
    v0: [C; 2],
    #[serde(rename = "Vm1")]
    vm1: [C; 2],
    nu1: C,
    kappa: C,
    a1: C,
    a2: C,
    a: C,
}

fn normal_form(fhn: &Fhn, n0: i32, out: &Path) -> Result<Vec<PathBuf>> {
    let model = fhn.model();
    let hopf = hopf_data(&model, n0)?;
    let nf = coefficients(&model, &hopf)?;
    let report = NormalFormReport {
        tau: fhn.tau,
        beta: fhn.beta,
        delta: fhn.delta,
        n0,
        u_star: fhn.u_star(),
        v_star: fhn.v_star(),
        omega: hopf.omega,
        c_star: hopf.c_star,
        w1: hopf.w1,
        w1_star: hopf.w1_star,
        v1: nf.v1,
        v0: nf.v0,
        vm1: nf.vm1,
        nu1: nf.nu1,
        kappa: nf.kernel_weight,
        a1: nf.a1,
        a2: nf.a2,
        a: nf.a(),
    };
    println!("{}", serde_json::to_string(&report).map_err(|e| Error::Format(e.to_string()))?);
    create_dir(out)?;
    Ok(vec![write_json(out, "normal_form.json", &report)?])
}

fn default_true() -> bool {
    true
}

/// The `[simulate]` table: the physical run plus artifact switches.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateSection {
    #[serde(flatten)]
    pub run: SimConfig,
    /// Colour range of `u` heatmaps, locked for the whole run.
    #[serde(default = "default_u_range")]
    pub png_range: [f64; 2],
    #[serde(default = "default_true")]
    pub write_dumps: bool,
    #[serde(default = "default_true")]
    pub write_png: bool,
}

/// Covers the excursions of `u` on the relaxation cycle of the cubic.
fn default_u_range() -> [f64; 2] {
    [-2.0, 2.0]
}

#[derive(Debug, Serialize)]
struct SnapshotRecord {
    index: usize,
    t: f64,
    cores: Vec<Core>,
    period_estimate: Option<f64>,
    coherence_min: f64,
    coherence_max: f64,
    /// Fractions of the grid with coherence `≥ 0.8` and `≤ 0.4`.
    coherent_fraction: f64,
    incoherent_fraction: f64,
}

#[derive(Debug, Serialize)]
struct SimulateReport {
    snapshots: Vec<SnapshotRecord>,
    imag_residue: f64,
}

enum Job {
    Snapshot(usize, FieldState, crate::field::Field2D),
}

fn snapshot_name(k: usize, stem: &str, ext: &str) -> PathBuf {
    format!("{stem}_{k:05}.{ext}").into()
}

/// Steps in this thread while a writer thread turns snapshots into dumps and
/// images.
fn simulate(sec: &SimulateSection, base: Option<&Path>, out: &Path) -> Result<Vec<PathBuf>> {
    if sec.png_range[1] <= sec.png_range[0] {
        return Err(Error::Config(format!("png_range {:?} is empty", sec.png_range)));
    }
    sec.run.validate()?;
    create_dir(out)?;
    let (tx, rx) = mpsc::sync_channel::<Job>(2);
    let dir = out.to_path_buf();
    let (dumps, pngs, range) = (sec.write_dumps, sec.write_png, (sec.png_range[0], sec.png_range[1]));
    let writer = std::thread::spawn(move || -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        for Job::Snapshot(k, state, coherence) in rx {
            if dumps {
                let p = snapshot_name(k, "snapshot", "bin");
                write_dump(dir.join(&p), &state)?;
                written.push(p);
            }
            if pngs {
                let p = snapshot_name(k, "u", "png");
                render_heatmap(&state.u, dir.join(&p), Some(range))?;
                written.push(p);
                let p = snapshot_name(k, "coherence", "png");
                render_heatmap(&coherence, dir.join(&p), Some((0.0, 1.0)))?;
                written.push(p);
            }
        }
        Ok(written)
    });
    let mut records = Vec::new();
    let result = run_with(&sec.run, base, |state, d| {
        let c: Vec<f64> = d.coherence.data.iter().map(|z| z.re).collect();
        let total = c.len() as f64;
        records.push(SnapshotRecord {
            index: records.len(),
            t: d.t,
            cores: d.cores.clone(),
            period_estimate: d.period_estimate,
            coherence_min: c.iter().copied().fold(f64::INFINITY, f64::min),
            coherence_max: c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            coherent_fraction: c.iter().filter(|&&v| v >= 0.8).count() as f64 / total,
            incoherent_fraction: c.iter().filter(|&&v| v <= 0.4).count() as f64 / total,
        });
        tx.send(Job::Snapshot(records.len() - 1, state.clone(), d.coherence.clone()))
            .map_err(|_| Error::State("snapshot writer stopped".into()))
    });
    drop(tx);
    let written = writer.join().map_err(|_| Error::State("snapshot writer panicked".into()))?;
    // A writer failure is the root cause of a failed send; report it first.
    let mut outputs = written?;
    let (probes, imag_residue) = result?;
    let probes_path: PathBuf = "probes.csv".into();
    probes.write_csv(out.join(&probes_path))?;
    outputs.push(probes_path);
    outputs.push(write_json(out, "diagnostics.json", &SimulateReport { snapshots: records, imag_residue })?);
    Ok(outputs)
}

#[derive(Debug, Serialize)]
struct ConvergenceReport {
    converged: bool,
    iterations: usize,
    residual_norm: f64,
    residual_history: Vec<f64>,
    tol: f64,
    mu_star: f64,
    c_star: f64,
    speed: f64,
    w_far: C,
    lambda_c: C,
    a: C,
}

fn solve_wave(cfg: &WaveConfig, base: Option<&Path>, out: &Path) -> Result<Vec<PathBuf>> {
    let setup = setup_wave(cfg, base)?;
    let sol = setup.solve(cfg)?;
    create_dir(out)?;
    let rows = sol.plan.nodes().iter().zip(sol.nodal_values()).map(|(&r, w)| vec![r, w.re, w.im, w.norm()]);
    let mut outputs = vec![write_csv(out, "profile.csv", &["R", "re_w", "im_w", "abs_w"], rows)?];
    let report = ConvergenceReport {
        converged: sol.residual_norm <= cfg.tol,
        iterations: sol.iterations,
        residual_norm: sol.residual_norm,
        residual_history: sol.residual_history.clone(),
        tol: cfg.tol,
        mu_star: setup.mu_star,
        c_star: setup.hopf.c_star,
        speed: setup.speed(cfg.eps, cfg.mu),
        w_far: sol.w_const,
        lambda_c: setup.problem.lambda_c,
        a: setup.problem.a,
    };
    outputs.push(write_json(out, "convergence.json", &report)?);
    if let Some(grid) = cfg.reconstruct {
        let state = reconstruct(&setup.hopf, &setup.nf, &sol, cfg.eps, grid)?;
        let p: PathBuf = "field.bin".into();
        write_dump(out.join(&p), &state)?;
        outputs.push(p);
    }
    Ok(outputs)
}

/// The `[residual_check]` table: one profile solve, then the ansatz residual
/// at every scale in `eps` on an `n × n` grid of half-width `reach / ε`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidualCheckConfig {
    pub eps: Vec<f64>,
    pub n: usize,
    pub reach: f64,
    pub wave: WaveConfig,
}

#[derive(Debug, Serialize)]
struct ResidualCheckReport {
    residuals: Vec<crate::rotwave::AnsatzResidual>,
    /// `sup(ε_k) / sup(ε_{k+1})` for consecutive entries.
    ratios: Vec<f64>,
    profile_residual: f64,
}

fn residual_check(cfg: &ResidualCheckConfig, base: Option<&Path>, out: &Path) -> Result<Vec<PathBuf>> {
    if cfg.eps.is_empty() {
        return Err(Error::Config("eps list is empty".into()));
    }
    let setup = setup_wave(&cfg.wave, base)?;
    let sol = setup.solve(&cfg.wave)?;
    let residuals = cfg
        .eps
        .iter()
        .map(|&e| ansatz_residual(&setup, &sol, e, cfg.wave.lambda_bar, cfg.wave.mu, cfg.n, cfg.reach))
        .collect::<Result<Vec<_>>>()?;
    let ratios = residuals.windows(2).map(|w| w[0].sup_norm / w[1].sup_norm).collect();
    create_dir(out)?;
    let rows = residuals.iter().map(|r| vec![r.eps, r.half_width, r.sup_norm, r.l2_norm]);
    let mut outputs = vec![write_csv(out, "residuals.csv", &["eps", "half_width", "sup_norm", "l2_norm"], rows)?];
    let report = ResidualCheckReport { residuals, ratios, profile_residual: sol.residual_norm };
    println!("{}", serde_json::to_string(&report.ratios).map_err(|e| Error::Format(e.to_string()))?);
    outputs.push(write_json(out, "residual_check.json", &report)?);
    Ok(outputs)
}

/// `e^{−r²/2}` is its own order-0 transform and `r e^{−r²/2}` maps to
/// `ρ e^{−ρ²/2}` at order 1, up to the phase `(−i)ⁿ` of the convention.
fn hankel_selftest(nodes: usize, rmax: f64, out: &Path) -> Result<Vec<PathBuf>> {
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for order in [0i32, 1] {
        let plan = HankelPlan::new(order, rmax, nodes)?;
        let f = move |r: f64| r.powi(order) * (-r * r / 2.0).exp();
        let g = RadialProfile::from_fn(&plan, |r| C::new(f(r), 0.0));
        let t = plan.forward(&g)?.profile;
        let phase = C::new(0.0, 1.0).powi(order);
        for (z, &rho) in t.values.iter().zip(plan.freqs()) {
            let computed = (z * phase).re;
            let err = (z * phase - f(rho)).norm();
            worst = worst.max(err);
            rows.push(vec![order as f64, rho, f(rho), computed, err]);
        }
    }
    create_dir(out)?;
    let p = write_csv(out, "hankel_selftest.csv", &["order", "rho", "analytic", "computed", "error"], rows)?;
    println!("{}", serde_json::json!({ "max_error": worst }));
    Ok(vec![p])
}
