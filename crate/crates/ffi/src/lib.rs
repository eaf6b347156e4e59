//! C interface. Objects are opaque handles created and destroyed through
//! this API; every fallible call returns an [`EhdStatus`] code and leaves a
//! message retrievable with [`ehd_last_error_message`] on the calling
//! thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use ehd2d::analysis::DiagnosticsRecord;
use ehd2d::io;
use ehd2d::sim::{init_state, SimConfig, SimState, Simulator};
use ehd2d::steady::{solve_steady, SteadyState};
use ehd2d::{EhdError, GridSpec, ScalarField};

/// Status codes. Values 2 to 4 match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EhdStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Solver = 3,
    Io = 4,
    InvalidArgument = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Fields of a simulation state.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EhdField {
    V = 0,
    W = 1,
    Phi = 2,
    Pressure = 3,
}

/// Fields of a steady state.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EhdSteadyField {
    Phi = 0,
    V = 1,
    W = 2,
}

/// One diagnostics row.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EhdDiagnostics {
    pub step: u64,
    pub t: f64,
    pub mass_v: f64,
    pub mass_w: f64,
    pub min_v: f64,
    pub min_w: f64,
    pub kinetic: f64,
    pub entropy: f64,
    pub electrostatic: f64,
    pub k_total: f64,
    pub lyapunov: f64,
    pub dist_sq: f64,
    pub dissipation: f64,
    pub max_div: f64,
}

impl From<&DiagnosticsRecord> for EhdDiagnostics {
    fn from(r: &DiagnosticsRecord) -> Self {
        Self {
            step: r.step,
            t: r.t,
            mass_v: r.mass_v,
            mass_w: r.mass_w,
            min_v: r.min_v,
            min_w: r.min_w,
            kinetic: r.kinetic,
            entropy: r.entropy,
            electrostatic: r.electrostatic,
            k_total: r.k_total,
            lyapunov: r.lyapunov,
            dist_sq: r.dist_sq,
            dissipation: r.dissipation,
            max_div: r.max_div,
        }
    }
}

/// Parsed run configuration.
pub struct EhdConfig {
    inner: SimConfig,
}

/// A running simulation with its steady state.
pub struct EhdSim {
    sim: Simulator,
    state: SimState,
    steady: SteadyState,
}

/// A solved steady state.
pub struct EhdSteady {
    inner: SteadyState,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &EhdError) -> EhdStatus {
    match e.exit_code() {
        2 => EhdStatus::Config,
        4 => EhdStatus::Io,
        _ => match e.kind() {
            "contract" => EhdStatus::InvalidArgument,
            _ => EhdStatus::Solver,
        },
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (EhdStatus, String)>) -> EhdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            EhdStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            EhdStatus::Panic
        }
    }
}

fn lib_err(e: EhdError) -> (EhdStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (EhdStatus, String) {
    (EhdStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (EhdStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        (
            EhdStatus::InvalidArgument,
            format!("{what} is not valid UTF-8"),
        )
    })
}

unsafe fn copy_out(
    field: &ScalarField,
    buf: *mut f64,
    len: usize,
) -> Result<(), (EhdStatus, String)> {
    if buf.is_null() {
        return Err(null("buffer"));
    }
    let vals = field.values();
    if len < vals.len() {
        return Err((
            EhdStatus::BufferTooSmall,
            format!("buffer holds {len} values, field has {}", vals.len()),
        ));
    }
    std::ptr::copy_nonoverlapping(vals.as_ptr(), buf, vals.len());
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ehd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes) and returns the full message length.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn ehd_last_error_message(buf: *mut c_char, len: usize) -> usize {
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

/// Parses configuration text in the `key = value` format.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ehd_config_parse(
    text: *const c_char,
    out: *mut *mut EhdConfig,
) -> EhdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(text, "text")?;
        let inner = io::parse_config(text).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(EhdConfig { inner }));
        Ok(())
    })
}

/// Reads and parses a configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ehd_config_read(
    path: *const c_char,
    out: *mut *mut EhdConfig,
) -> EhdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = str_arg(path, "path")?;
        let inner = io::read_config(Path::new(path)).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(EhdConfig { inner }));
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ehd_config_free(cfg: *mut EhdConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Builds the initial state and solves the steady state for its masses.
///
/// # Safety
/// `cfg` must be a live config handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ehd_sim_new(cfg: *const EhdConfig, out: *mut *mut EhdSim) -> EhdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = cfg.as_ref().ok_or_else(|| null("config"))?;
        let sim = Simulator::new(cfg.inner.clone()).map_err(lib_err)?;
        let state = init_state(&cfg.inner).map_err(lib_err)?;
        let steady = sim.steady_for(&state).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(EhdSim { sim, state, steady }));
        Ok(())
    })
}

/// Advances `steps` time steps. On error the state is left at the last
/// completed step.
///
/// # Safety
/// `sim` must be a live simulation handle.
#[no_mangle]
pub unsafe extern "C" fn ehd_sim_step(sim: *mut EhdSim, steps: u64) -> EhdStatus {
    guard(|| {
        let s = sim.as_mut().ok_or_else(|| null("sim"))?;
        for _ in 0..steps {
            s.state = s.sim.step(&s.state).map_err(lib_err)?;
        }
        Ok(())
    })
}

/// Current time and step index.
///
/// # Safety
/// `sim` must be a live handle; `t` and `step` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ehd_sim_time(
    sim: *const EhdSim,
    t: *mut f64,
    step: *mut u64,
) -> EhdStatus {
    guard(|| {
        let s = sim.as_ref().ok_or_else(|| null("sim"))?;
        if t.is_null() || step.is_null() {
            return Err(null("output"));
        }
        *t = s.state.t;
        *step = s.state.step;
        Ok(())
    })
}

/// Grid dimensions of a simulation.
///
/// # Safety
/// `sim` must be a live handle; `nx` and `ny` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ehd_sim_grid(
    sim: *const EhdSim,
    nx: *mut usize,
    ny: *mut usize,
) -> EhdStatus {
    guard(|| {
        let s = sim.as_ref().ok_or_else(|| null("sim"))?;
        if nx.is_null() || ny.is_null() {
            return Err(null("output"));
        }
        let g: &GridSpec = s.state.grid();
        *nx = g.nx();
        *ny = g.ny();
        Ok(())
    })
}

/// Diagnostics of the current state.
///
/// # Safety
/// `sim` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ehd_sim_diagnostics(
    sim: *const EhdSim,
    out: *mut EhdDiagnostics,
) -> EhdStatus {
    guard(|| {
        let s = sim.as_ref().ok_or_else(|| null("sim"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let rec = s.sim.diagnostics(&s.state, &s.steady).map_err(lib_err)?;
        *out = EhdDiagnostics::from(&rec);
        Ok(())
    })
}

/// Copies a cell field (row-major, `y` outer) into `buf` of `len` doubles.
///
/// # Safety
/// `sim` must be a live handle; `buf` must be valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ehd_sim_copy_field(
    sim: *const EhdSim,
    field: EhdField,
    buf: *mut f64,
    len: usize,
) -> EhdStatus {
    guard(|| {
        let s = sim.as_ref().ok_or_else(|| null("sim"))?;
        let f = match field {
            EhdField::V => &s.state.charges.v,
            EhdField::W => &s.state.charges.w,
            EhdField::Phi => &s.state.phi,
            EhdField::Pressure => &s.state.u.p,
        };
        copy_out(f, buf, len)
    })
}

/// # Safety
/// `sim` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ehd_sim_free(sim: *mut EhdSim) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Solves the steady state on an `nx` by `ny` grid of extent `lx` by `ly`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ehd_steady_solve(
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    mu_v: f64,
    mu_w: f64,
    tol: f64,
    out: *mut *mut EhdSteady,
) -> EhdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let g = GridSpec::new(nx, ny, lx, ly).map_err(lib_err)?;
        let inner = solve_steady(g, mu_v, mu_w, tol).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(EhdSteady { inner }));
        Ok(())
    })
}

/// Residual and Newton iteration count.
///
/// # Safety
/// `st` must be a live handle; outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ehd_steady_info(
    st: *const EhdSteady,
    residual: *mut f64,
    iterations: *mut usize,
) -> EhdStatus {
    guard(|| {
        let s = st.as_ref().ok_or_else(|| null("steady"))?;
        if residual.is_null() || iterations.is_null() {
            return Err(null("output"));
        }
        *residual = s.inner.residual;
        *iterations = s.inner.iterations;
        Ok(())
    })
}

/// # Safety
/// `st` must be a live handle; `buf` must be valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ehd_steady_copy_field(
    st: *const EhdSteady,
    field: EhdSteadyField,
    buf: *mut f64,
    len: usize,
) -> EhdStatus {
    guard(|| {
        let s = st.as_ref().ok_or_else(|| null("steady"))?;
        let f = match field {
            EhdSteadyField::Phi => &s.inner.phi,
            EhdSteadyField::V => &s.inner.v,
            EhdSteadyField::W => &s.inner.w,
        };
        copy_out(f, buf, len)
    })
}

/// # Safety
/// `st` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ehd_steady_free(st: *mut EhdSteady) {
    if !st.is_null() {
        drop(Box::from_raw(st));
    }
}
