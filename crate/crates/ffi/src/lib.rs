//! C ABI over `droo-core`.
//!
//! Objects are opaque heap handles created by `*_new` and released by the
//! matching `*_free`. Every fallible call returns a [`DrooStatus`]; on
//! failure [`droo_last_error_message`] describes the most recent error on
//! the calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use droo_core::agent::{Agent, AgentConfig, KMode};
use droo_core::baselines::{coordinate_descent, exhaustive_opt};
use droo_core::quantizer::{quantize, QuantizerKind, RelaxedAction};
use droo_core::solver::{solve_p2, SolverConfig};
use droo_core::system::{ChannelFrame, OffloadAction, SystemParams};
use droo_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DrooStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    LengthMismatch = 3,
    NonConvergence = 4,
    TooLarge = 5,
    Io = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DrooQuantizer {
    OrderPreserving = 0,
    Knn = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DrooKMode {
    Fixed = 0,
    Adaptive = 1,
}

/// Agent settings not covered by the system parameters. Training uses the
/// reference hyperparameters.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DrooAgentOptions {
    pub quantizer: DrooQuantizer,
    pub k_mode: DrooKMode,
    /// Candidate count in fixed mode.
    pub k: usize,
    /// Update interval in adaptive mode.
    pub delta: u64,
    /// Candidate-evaluation threads; 1 evaluates in place.
    pub threads: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DrooFrameOutput {
    pub a: f64,
    pub q: f64,
    pub k_star: usize,
    pub k_used: usize,
    /// 1 when the policy was trained this frame; `loss` is valid only then.
    pub trained: u8,
    pub loss: f64,
}

/// Opaque system parameters.
pub struct DrooParams {
    inner: SystemParams,
}

/// Opaque online agent.
pub struct DrooAgent {
    inner: Agent,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> DrooStatus {
    match err {
        Error::LengthMismatch { .. } | Error::Shape(_) => DrooStatus::LengthMismatch,
        Error::NonConvergence { .. } => DrooStatus::NonConvergence,
        Error::TooLarge { .. } => DrooStatus::TooLarge,
        Error::Io { .. } | Error::Json { .. } => DrooStatus::Io,
        _ => DrooStatus::InvalidArgument,
    }
}

struct Fail(DrooStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(DrooStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DrooStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DrooStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            DrooStatus::Panic
        }
    }
}

/// # Safety
/// `p` is null or valid for `len` reads.
unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` is null or valid for `len` writes.
unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn action(bits: &[u8]) -> Result<OffloadAction, Fail> {
    Ok(OffloadAction::from_u8(bits)?)
}

/// Reference constants for `n` devices; null when `n` is 0.
#[no_mangle]
pub extern "C" fn droo_params_new(n: usize) -> *mut DrooParams {
    if n == 0 {
        set_error("n must be at least 1".into());
        return ptr::null_mut();
    }
    match catch_unwind(|| SystemParams::reference(n)) {
        Ok(inner) => Box::into_raw(Box::new(DrooParams { inner })),
        Err(_) => {
            set_error("internal panic".into());
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `params` is null or a handle from [`droo_params_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn droo_params_free(params: *mut DrooParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// # Safety
/// `params` is a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn droo_params_n(params: *const DrooParams) -> usize {
    params.as_ref().map_or(0, |p| p.inner.n)
}

/// Replaces the per-device weights.
///
/// # Safety
/// `params` is a live handle; `weights` holds `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn droo_params_set_weights(params: *mut DrooParams, weights: *const f64, len: usize) -> DrooStatus {
    guard(|| {
        let p = params.as_mut().ok_or_else(|| null("params"))?;
        let w = slice(weights, len, "weights")?;
        let mut next = p.inner.clone();
        next.weights = w.to_vec();
        next.validate()?;
        p.inner = next;
        Ok(())
    })
}

/// Optimal allocation for action `x` (0/1 bytes) under gains `h`.
/// `tau_out` receives `n` doubles.
///
/// # Safety
/// `params` is a live handle; `h`, `x` and `tau_out` hold `n` elements;
/// `a_out` and `q_out` are writable.
#[no_mangle]
pub unsafe extern "C" fn droo_solve_p2(
    params: *const DrooParams,
    h: *const f64,
    x: *const u8,
    n: usize,
    a_out: *mut f64,
    tau_out: *mut f64,
    q_out: *mut f64,
) -> DrooStatus {
    guard(|| {
        let p = &params.as_ref().ok_or_else(|| null("params"))?.inner;
        let frame = ChannelFrame::new(1, slice(h, n, "h")?.to_vec())?;
        let x = action(slice(x, n, "x")?)?;
        let r = solve_p2(&frame, &x, p, &SolverConfig::default())?;
        let tau = slice_mut(tau_out, n, "tau_out")?;
        let a_out = a_out.as_mut().ok_or_else(|| null("a_out"))?;
        let q_out = q_out.as_mut().ok_or_else(|| null("q_out"))?;
        tau.copy_from_slice(&r.tau);
        *a_out = r.a;
        *q_out = r.q;
        Ok(())
    })
}

unsafe fn baseline(
    params: *const DrooParams,
    h: *const f64,
    n: usize,
    x_out: *mut u8,
    q_out: *mut f64,
    run: fn(&ChannelFrame, &SystemParams, &SolverConfig) -> droo_core::Result<(OffloadAction, droo_core::AllocationResult)>,
) -> DrooStatus {
    guard(|| {
        let p = &params.as_ref().ok_or_else(|| null("params"))?.inner;
        let frame = ChannelFrame::new(1, slice(h, n, "h")?.to_vec())?;
        let (x, r) = run(&frame, p, &SolverConfig::default())?;
        let out = slice_mut(x_out, n, "x_out")?;
        let q_out = q_out.as_mut().ok_or_else(|| null("q_out"))?;
        out.copy_from_slice(&x.to_u8());
        *q_out = r.q;
        Ok(())
    })
}

/// Best action over all `2^n` (n <= 12).
///
/// # Safety
/// `params` is a live handle; `h` and `x_out` hold `n` elements; `q_out` is
/// writable.
#[no_mangle]
pub unsafe extern "C" fn droo_exhaustive(
    params: *const DrooParams,
    h: *const f64,
    n: usize,
    x_out: *mut u8,
    q_out: *mut f64,
) -> DrooStatus {
    baseline(params, h, n, x_out, q_out, exhaustive_opt)
}

/// Coordinate descent from all-local.
///
/// # Safety
/// As for [`droo_exhaustive`].
#[no_mangle]
pub unsafe extern "C" fn droo_coordinate_descent(
    params: *const DrooParams,
    h: *const f64,
    n: usize,
    x_out: *mut u8,
    q_out: *mut f64,
) -> DrooStatus {
    baseline(params, h, n, x_out, q_out, coordinate_descent)
}

/// Writes `k` candidate actions, row-major `k x n`, into `out`.
///
/// # Safety
/// `xhat` holds `n` doubles in (0, 1); `out` holds `k * n` bytes.
#[no_mangle]
pub unsafe extern "C" fn droo_quantize(
    kind: DrooQuantizer,
    xhat: *const f64,
    n: usize,
    k: usize,
    out: *mut u8,
) -> DrooStatus {
    guard(|| {
        let kind = match kind {
            DrooQuantizer::OrderPreserving => QuantizerKind::OrderPreserving,
            DrooQuantizer::Knn => QuantizerKind::Knn,
        };
        let xhat = RelaxedAction::new(slice(xhat, n, "xhat")?.to_vec())?;
        let set = quantize(kind, &xhat, k)?;
        let total = k
            .checked_mul(n)
            .ok_or_else(|| Fail(DrooStatus::InvalidArgument, "k * n overflows".into()))?;
        let out = slice_mut(out, total, "out")?;
        for (row, cand) in out.chunks_exact_mut(n.max(1)).zip(&set) {
            row.copy_from_slice(&cand.to_u8());
        }
        Ok(())
    })
}

/// Creates an agent with a freshly initialized policy; `*out` receives
/// the handle.
///
/// # Safety
/// `params` is a live handle; `options` and `out` are valid pointers.
#[no_mangle]
pub unsafe extern "C" fn droo_agent_new(
    params: *const DrooParams,
    options: *const DrooAgentOptions,
    seed: u64,
    out: *mut *mut DrooAgent,
) -> DrooStatus {
    guard(|| {
        let p = &params.as_ref().ok_or_else(|| null("params"))?.inner;
        let o = options.as_ref().ok_or_else(|| null("options"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let mut cfg = AgentConfig::reference(p.n);
        cfg.quantizer = match o.quantizer {
            DrooQuantizer::OrderPreserving => QuantizerKind::OrderPreserving,
            DrooQuantizer::Knn => QuantizerKind::Knn,
        };
        cfg.k_mode = match o.k_mode {
            DrooKMode::Fixed => KMode::Fixed { k: o.k },
            DrooKMode::Adaptive => KMode::Adaptive { delta: o.delta },
        };
        cfg.threads = o.threads;
        let inner = Agent::new(p.clone(), cfg, seed)?;
        *out = Box::into_raw(Box::new(DrooAgent { inner }));
        Ok(())
    })
}

/// # Safety
/// `agent` is null or a handle from [`droo_agent_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn droo_agent_free(agent: *mut DrooAgent) {
    if !agent.is_null() {
        drop(Box::from_raw(agent));
    }
}

/// Processes frame `t` (1-based) with gains `h`. The chosen action goes to
/// `x_out` and its time split to `tau_out`; either may be null.
///
/// # Safety
/// `agent` is a live handle; `h` holds `n` doubles; non-null `x_out` and
/// `tau_out` hold `n` elements; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn droo_agent_step(
    agent: *mut DrooAgent,
    t: u64,
    h: *const f64,
    n: usize,
    out: *mut DrooFrameOutput,
    x_out: *mut u8,
    tau_out: *mut f64,
) -> DrooStatus {
    guard(|| {
        let agent = &mut agent.as_mut().ok_or_else(|| null("agent"))?.inner;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let frame = ChannelFrame::new(t, slice(h, n, "h")?.to_vec())?;
        let r = agent.step(&frame)?;
        if !x_out.is_null() {
            slice_mut(x_out, n, "x_out")?.copy_from_slice(&r.x_star.to_u8());
        }
        if !tau_out.is_null() {
            slice_mut(tau_out, n, "tau_out")?.copy_from_slice(&r.alloc.tau);
        }
        *out = DrooFrameOutput {
            a: r.alloc.a,
            q: r.alloc.q,
            k_star: r.k_star,
            k_used: r.k_used,
            trained: r.loss.is_some() as u8,
            loss: r.loss.unwrap_or(0.0),
        };
        Ok(())
    })
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn droo_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// NUL-terminated crate version.
#[no_mangle]
pub extern "C" fn droo_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
