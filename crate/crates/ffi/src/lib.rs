//! C ABI over the core library: opaque handles, status codes and a
//! thread-local message for the most recent failure.
//!
//! Every function returns an [`NlocStatus`]; results go through out-pointers.
//! Handles are created by `*_new` and released by the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use nloc::hankel::{HankelPlan, RadialProfile};
use nloc::kernel::KernelSymbol;
use nloc::normalform::{coefficients, hopf_data, Fhn};
use nloc::simulate::{initial_state, SimConfig, Simulator};
use nloc::Error;
use num_complex::Complex64;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NlocStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Range = 3,
    State = 4,
    Shape = 5,
    Size = 6,
    Param = 7,
    NotHopf = 8,
    Resonance = 9,
    SingularOperator = 10,
    MaxIterations = 11,
    Divergence = 12,
    Config = 13,
    Format = 14,
    Io = 15,
    BufferTooSmall = 16,
    Panic = 17,
}

impl From<&Error> for NlocStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Range { .. } => NlocStatus::Range,
            Error::State(_) => NlocStatus::State,
            Error::Shape { .. } => NlocStatus::Shape,
            Error::Size(_) => NlocStatus::Size,
            Error::Param(_) => NlocStatus::Param,
            Error::NotHopf { .. } => NlocStatus::NotHopf,
            Error::Resonance { .. } => NlocStatus::Resonance,
            Error::SingularOperator { .. } => NlocStatus::SingularOperator,
            Error::MaxIterations { .. } => NlocStatus::MaxIterations,
            Error::Divergence { .. } => NlocStatus::Divergence,
            Error::Config(_) => NlocStatus::Config,
            Error::Format(_) => NlocStatus::Format,
            Error::Io { .. } => NlocStatus::Io,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

/// Runs `f`, recording the message of any failure, and converts panics into
/// [`NlocStatus::Panic`] so they never cross the boundary.
fn guard(f: impl FnOnce() -> Result<(), (NlocStatus, String)>) -> NlocStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            NlocStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            NlocStatus::Panic
        }
    }
}

fn lib(e: Error) -> (NlocStatus, String) {
    (NlocStatus::from(&e), e.to_string())
}

fn null(what: &str) -> (NlocStatus, String) {
    (NlocStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (NlocStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (NlocStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], (NlocStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], (NlocStatus, String)> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn check_len(got: usize, want: usize) -> Result<(), (NlocStatus, String)> {
    if got < want {
        return Err((NlocStatus::BufferTooSmall, format!("buffer holds {got} values, need {want}")));
    }
    Ok(())
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`) and returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn nloc_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Opaque kernel symbol.
pub struct NlocKernel(KernelSymbol);

/// Validated rational symbol `−Dρ²/(1 + dρ²)`.
///
/// # Safety
/// `out` must be a valid pointer; on success it receives a handle to free with
/// [`nloc_kernel_free`].
#[no_mangle]
pub unsafe extern "C" fn nloc_kernel_rational(diffusion: f64, range: f64, out: *mut *mut NlocKernel) -> NlocStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let k = KernelSymbol::rational(diffusion, range).and_then(KernelSymbol::validate).map_err(lib)?;
        *out = Box::into_raw(Box::new(NlocKernel(k)));
        Ok(())
    })
}

/// # Safety
/// `kernel` must come from this library and `value` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nloc_kernel_eval(kernel: *const NlocKernel, rho: f64, value: *mut f64) -> NlocStatus {
    guard(|| {
        let k = deref(kernel, "kernel")?;
        *deref_mut(value, "value")? = k.0.eval(rho).map_err(lib)?;
        Ok(())
    })
}

/// Leading coefficient `α` of `K̂(ρ) ≈ −αρ²`.
///
/// # Safety
/// `kernel` must come from this library and `alpha` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nloc_kernel_alpha(kernel: *const NlocKernel, alpha: *mut f64) -> NlocStatus {
    guard(|| {
        let k = deref(kernel, "kernel")?;
        *deref_mut(alpha, "alpha")? = k.0.alpha().ok_or((NlocStatus::State, "kernel is not validated".into()))?;
        Ok(())
    })
}

/// # Safety
/// `kernel` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nloc_kernel_free(kernel: *mut NlocKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// Opaque discrete Hankel transform plan.
pub struct NlocHankelPlan(HankelPlan);

/// # Safety
/// `out` must be valid; free the handle with [`nloc_hankel_free`].
#[no_mangle]
pub unsafe extern "C" fn nloc_hankel_new(order: i32, rmax: f64, nodes: usize, out: *mut *mut NlocHankelPlan) -> NlocStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let p = HankelPlan::new(order, rmax, nodes).map_err(lib)?;
        *out = Box::into_raw(Box::new(NlocHankelPlan(p)));
        Ok(())
    })
}

/// # Safety
/// `plan` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn nloc_hankel_len(plan: *const NlocHankelPlan, len: *mut usize) -> NlocStatus {
    guard(|| {
        *deref_mut(len, "len")? = deref(plan, "plan")?.0.len();
        Ok(())
    })
}

/// Radial nodes (`which = 0`) or frequencies (`which = 1`) into `buf`.
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn nloc_hankel_grid(plan: *const NlocHankelPlan, which: i32, buf: *mut f64, len: usize) -> NlocStatus {
    guard(|| {
        let p = &deref(plan, "plan")?.0;
        let src = match which {
            0 => p.nodes(),
            1 => p.freqs(),
            _ => return Err((NlocStatus::InvalidArgument, format!("grid selector {which} is not 0 or 1"))),
        };
        check_len(len, src.len())?;
        slice_mut(buf, len, "buf")?[..src.len()].copy_from_slice(src);
        Ok(())
    })
}

unsafe fn transform(
    plan: *const NlocHankelPlan,
    inverse: bool,
    re: *const f64,
    im: *const f64,
    re_out: *mut f64,
    im_out: *mut f64,
    len: usize,
) -> NlocStatus {
    guard(|| {
        let p = &deref(plan, "plan")?.0;
        if len != p.len() {
            return Err((NlocStatus::Shape, format!("expected {} values, got {len}", p.len())));
        }
        let (re, im) = (slice(re, len, "re")?, slice(im, len, "im")?);
        let g = RadialProfile::new(re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect());
        let t = if inverse { p.inverse(&g) } else { p.forward(&g) }.map_err(lib)?;
        let (ro, io) = (slice_mut(re_out, len, "re_out")?, slice_mut(im_out, len, "im_out")?);
        for (k, z) in t.profile.values.iter().enumerate() {
            ro[k] = z.re;
            io[k] = z.im;
        }
        Ok(())
    })
}

/// Forward transform of nodal values into frequency values.
///
/// # Safety
/// All buffers must hold `len` doubles, `len` equal to the plan length.
#[no_mangle]
pub unsafe extern "C" fn nloc_hankel_forward(
    plan: *const NlocHankelPlan,
    re: *const f64,
    im: *const f64,
    re_out: *mut f64,
    im_out: *mut f64,
    len: usize,
) -> NlocStatus {
    transform(plan, false, re, im, re_out, im_out, len)
}

/// Inverse transform of frequency values into nodal values.
///
/// # Safety
/// All buffers must hold `len` doubles, `len` equal to the plan length.
#[no_mangle]
pub unsafe extern "C" fn nloc_hankel_inverse(
    plan: *const NlocHankelPlan,
    re: *const f64,
    im: *const f64,
    re_out: *mut f64,
    im_out: *mut f64,
    len: usize,
) -> NlocStatus {
    transform(plan, true, re, im, re_out, im_out, len)
}

/// # Safety
/// `plan` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nloc_hankel_free(plan: *mut NlocHankelPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

/// Hopf data and reduced-equation coefficients; complex numbers are `[re, im]`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NlocNormalForm {
    pub omega: f64,
    pub c_star: f64,
    pub w1: [[f64; 2]; 2],
    pub w1_star: [[f64; 2]; 2],
    pub v1: [[f64; 2]; 2],
    pub v0: [[f64; 2]; 2],
    pub vm1: [[f64; 2]; 2],
    pub nu1: [f64; 2],
    pub kappa: [f64; 2],
    pub a1: [f64; 2],
    pub a2: [f64; 2],
}

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

/// Normal form of the nonlocal FitzHugh–Nagumo system at angular mode `n0`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nloc_fhn_normal_form(tau: f64, beta: f64, delta: f64, n0: i32, out: *mut NlocNormalForm) -> NlocStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let model = Fhn::new(tau, beta, delta).map_err(lib)?.model();
        let hopf = hopf_data(&model, n0).map_err(lib)?;
        let nf = coefficients(&model, &hopf).map_err(lib)?;
        *out = NlocNormalForm {
            omega: hopf.omega,
            c_star: hopf.c_star,
            w1: hopf.w1.map(pair),
            w1_star: hopf.w1_star.map(pair),
            v1: nf.v1.map(pair),
            v0: nf.v0.map(pair),
            vm1: nf.vm1.map(pair),
            nu1: pair(nf.nu1),
            kappa: pair(nf.kernel_weight),
            a1: pair(nf.a1),
            a2: pair(nf.a2),
        };
        Ok(())
    })
}

/// Opaque time stepper.
pub struct NlocSimulator {
    sim: Simulator,
    n: usize,
}

/// Simulator from a NUL-terminated TOML document holding the run table
/// (the body of `[simulate]`); relative paths resolve against the working
/// directory.
///
/// # Safety
/// `config` must be a valid C string and `out` valid; free the handle with
/// [`nloc_simulator_free`].
#[no_mangle]
pub unsafe extern "C" fn nloc_simulator_new(config: *const c_char, out: *mut *mut NlocSimulator) -> NlocStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        if config.is_null() {
            return Err(null("config"));
        }
        let text = CStr::from_ptr(config)
            .to_str()
            .map_err(|e| (NlocStatus::InvalidArgument, format!("config is not UTF-8: {e}")))?;
        let cfg: SimConfig = toml::from_str(text).map_err(|e| (NlocStatus::Config, e.message().to_string()))?;
        cfg.validate().map_err(lib)?;
        let sym = cfg.kernel.build(None).map_err(lib)?;
        let state = initial_state(&cfg, None).map_err(lib)?;
        let sim = Simulator::new(&cfg, &sym, &state).map_err(lib)?;
        *out = Box::into_raw(Box::new(NlocSimulator { sim, n: cfg.n }));
        Ok(())
    })
}

/// Advances by `steps` time steps.
///
/// # Safety
/// `sim` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn nloc_simulator_step(sim: *mut NlocSimulator, steps: usize) -> NlocStatus {
    guard(|| {
        let s = deref_mut(sim, "sim")?;
        for _ in 0..steps {
            s.sim.step().map_err(lib)?;
        }
        Ok(())
    })
}

/// # Safety
/// `sim` and `t` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nloc_simulator_time(sim: *const NlocSimulator, t: *mut f64) -> NlocStatus {
    guard(|| {
        *deref_mut(t, "t")? = deref(sim, "sim")?.sim.time();
        Ok(())
    })
}

/// Grid points per side.
///
/// # Safety
/// `sim` and `n` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nloc_simulator_grid_size(sim: *const NlocSimulator, n: *mut usize) -> NlocStatus {
    guard(|| {
        *deref_mut(n, "n")? = deref(sim, "sim")?.n;
        Ok(())
    })
}

/// Copies `u` and `v` (row-major, `n²` values each) into the buffers.
///
/// # Safety
/// `u` and `v` must each hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn nloc_simulator_state(sim: *mut NlocSimulator, u: *mut f64, v: *mut f64, len: usize) -> NlocStatus {
    guard(|| {
        let s = deref_mut(sim, "sim")?;
        check_len(len, s.n * s.n)?;
        let state = s.sim.state().map_err(lib)?;
        let (u, v) = (slice_mut(u, len, "u")?, slice_mut(v, len, "v")?);
        for (k, (a, b)) in state.u.data.iter().zip(&state.v.data).enumerate() {
            u[k] = a.re;
            v[k] = b.re;
        }
        Ok(())
    })
}

/// # Safety
/// `sim` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nloc_simulator_free(sim: *mut NlocSimulator) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}
