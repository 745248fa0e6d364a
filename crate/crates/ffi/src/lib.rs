//! C interface to `radis-core`.
//!
//! Every object crosses the boundary as an opaque handle that the caller
//! frees with the matching `*_free` function. Fallible functions return a
//! [`RadisStatus`]; on failure the message is available from
//! [`radis_last_error`] on the same thread. Panics never unwind into C.

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use radis_core::radis::{run_radis, RadisConfig, RadisOutput};
use radis_core::targets::banana::{banana_target, BananaParams};
use radis_core::targets::mixture::mixture_target;
use radis_core::{Domain, Emulator, Error, Rng, SupportBox, TargetDensity};

/// Result of a fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadisStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    DimensionMismatch = 4,
    DegenerateWeights = 5,
    Numerical = 6,
    Io = 7,
    Panic = 8,
}

/// Unnormalized log density supplied by the caller. Called from several
/// threads at once, so it must be thread-safe. Returns `-inf` for zero.
pub type RadisLogDensityFn = Option<unsafe extern "C" fn(user_data: *mut c_void, x: *const f64, dim: usize) -> f64>;

/// An unnormalized target with its own evaluation counter.
pub struct RadisTarget {
    inner: TargetDensity,
}

/// Sampler settings.
pub struct RadisSamplerConfig {
    inner: RadisConfig,
}

/// Output of one run: weighted particles, evidence and the final emulator.
pub struct RadisRun {
    inner: RadisOutput,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: RadisStatus, msg: impl Into<String>) -> RadisStatus {
    set_error(msg.into());
    status
}

fn status_of(err: &Error) -> RadisStatus {
    match err {
        Error::InvalidConfig(_) => RadisStatus::InvalidConfig,
        Error::InvalidArgument(_) | Error::Empty(_) | Error::OutOfDomain | Error::Parse { .. } => RadisStatus::InvalidArgument,
        Error::DimensionMismatch { .. } => RadisStatus::DimensionMismatch,
        Error::DegenerateWeights
        | Error::DegenerateInnerWeights { .. }
        | Error::DegenerateIterationWeights { .. }
        | Error::ZeroDenominator { .. }
        | Error::SupportViolation => RadisStatus::DegenerateWeights,
        Error::IllConditioned => RadisStatus::Numerical,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => RadisStatus::Io,
    }
}

fn guard(f: impl FnOnce() -> RadisStatus) -> RadisStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(RadisStatus::Panic, format!("panic: {msg}"))
        }
    }
}

fn lift<T>(r: radis_core::Result<T>, ok: impl FnOnce(T)) -> RadisStatus {
    match r {
        Ok(v) => {
            ok(v);
            RadisStatus::Ok
        }
        Err(e) => fail(status_of(&e), e.to_string()),
    }
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(RadisStatus::NullPointer, concat!("`", stringify!($p), "` is null"));
        })+
    };
}

fn boxed<T>(out: *mut *mut T, value: T) {
    // SAFETY: callers check `out` for null before calling.
    unsafe { *out = Box::into_raw(Box::new(value)) }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn radis_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn radis_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Target from a caller-supplied log density. `lower` and `upper` give a
/// bounded domain of `dim` entries each; pass both null for an unbounded one.
///
/// # Safety
/// `lower` and `upper` must be null or point to `dim` doubles. `callback`
/// and `user_data` must stay valid and thread-safe for the handle's lifetime.
#[no_mangle]
pub unsafe extern "C" fn radis_target_from_callback(
    dim: usize,
    lower: *const f64,
    upper: *const f64,
    callback: RadisLogDensityFn,
    user_data: *mut c_void,
    out: *mut *mut RadisTarget,
) -> RadisStatus {
    guard(|| {
        non_null!(out);
        let Some(cb) = callback else {
            return fail(RadisStatus::NullPointer, "`callback` is null");
        };
        if dim == 0 {
            return fail(RadisStatus::InvalidArgument, "dimension must be at least 1");
        }
        let domain = match (lower.is_null(), upper.is_null()) {
            (true, true) => Domain::Unbounded,
            (false, false) => {
                let lo = std::slice::from_raw_parts(lower, dim).to_vec();
                let hi = std::slice::from_raw_parts(upper, dim).to_vec();
                match SupportBox::new(lo, hi) {
                    Ok(b) => Domain::Bounded(b),
                    Err(e) => return fail(status_of(&e), e.to_string()),
                }
            }
            _ => return fail(RadisStatus::NullPointer, "`lower` and `upper` must both be set or both be null"),
        };
        let data = user_data as usize;
        let log_pi = move |x: &[f64]| {
            // SAFETY: the caller guarantees the callback and its data outlive the target.
            unsafe { cb(data as *mut c_void, x.as_ptr(), x.len()) }
        };
        boxed(out, RadisTarget { inner: TargetDensity::new(dim, domain, log_pi) });
        RadisStatus::Ok
    })
}

/// Built-in two-dimensional banana target on `[-10, 10]^2`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn radis_target_banana(out: *mut *mut RadisTarget) -> RadisStatus {
    guard(|| {
        non_null!(out);
        lift(banana_target(&BananaParams::default()), |t| boxed(out, RadisTarget { inner: t }))
    })
}

/// Built-in three-component Gaussian mixture with evidence 1.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn radis_target_mixture(dim: usize, out: *mut *mut RadisTarget) -> RadisStatus {
    guard(|| {
        non_null!(out);
        if dim == 0 {
            return fail(RadisStatus::InvalidArgument, "dimension must be at least 1");
        }
        boxed(out, RadisTarget { inner: mixture_target(dim) });
        RadisStatus::Ok
    })
}

/// Dimension of a target, or 0 for a null handle.
///
/// # Safety
/// `target` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn radis_target_dim(target: *const RadisTarget) -> usize {
    target.as_ref().map_or(0, |t| t.inner.dim())
}

/// Target evaluations made so far through this handle.
///
/// # Safety
/// `target` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn radis_target_evaluations(target: *const RadisTarget) -> u64 {
    target.as_ref().map_or(0, |t| t.inner.evaluations())
}

/// `log pi(x)` without touching the evaluation counter.
///
/// # Safety
/// `x` must point to `len` doubles; `target` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn radis_target_log_density(
    target: *const RadisTarget,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> RadisStatus {
    guard(|| {
        non_null!(target, x, out);
        let t = &(*target).inner;
        if len != t.dim() {
            return fail(RadisStatus::DimensionMismatch, format!("expected {} coordinates, got {len}", t.dim()));
        }
        *out = t.log_pi_uncounted(std::slice::from_raw_parts(x, len));
        RadisStatus::Ok
    })
}

/// # Safety
/// `target` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn radis_target_free(target: *mut RadisTarget) {
    if !target.is_null() {
        drop(Box::from_raw(target));
    }
}

/// Nearest-neighbour sampler: `iterations` rounds of `samples` draws, inner
/// pool of `batch` draws, `initial` uniform starting nodes.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn radis_config_nn(
    iterations: usize,
    samples: usize,
    batch: usize,
    initial: usize,
    out: *mut *mut RadisSamplerConfig,
) -> RadisStatus {
    guard(|| {
        non_null!(out);
        let cfg = RadisConfig::nn(iterations, samples, batch, initial);
        lift(cfg.validate(), |_| boxed(out, RadisSamplerConfig { inner: cfg }))
    })
}

/// Sampler settings from a TOML document with the same keys as a `radis`
/// algorithm entry's `params` table.
///
/// # Safety
/// `toml_text` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn radis_config_from_toml(toml_text: *const c_char, out: *mut *mut RadisSamplerConfig) -> RadisStatus {
    guard(|| {
        non_null!(toml_text, out);
        let text = match CStr::from_ptr(toml_text).to_str() {
            Ok(s) => s,
            Err(_) => return fail(RadisStatus::InvalidArgument, "config text is not UTF-8"),
        };
        let cfg: RadisConfig = match toml::from_str(text) {
            Ok(c) => c,
            Err(e) => return fail(RadisStatus::InvalidConfig, e.to_string()),
        };
        lift(cfg.validate(), |_| boxed(out, RadisSamplerConfig { inner: cfg }))
    })
}

/// Target evaluations a run with this config spends on a `dim`-dimensional target.
///
/// # Safety
/// `config` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn radis_config_budget(config: *const RadisSamplerConfig, dim: usize) -> usize {
    config.as_ref().map_or(0, |c| c.inner.budget(dim))
}

/// # Safety
/// `config` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn radis_config_free(config: *mut RadisSamplerConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Run the sampler. The same seed, config and target give the same output.
///
/// # Safety
/// All pointers must be valid handles or out-pointers.
#[no_mangle]
pub unsafe extern "C" fn radis_run(
    target: *const RadisTarget,
    config: *const RadisSamplerConfig,
    seed: u64,
    out: *mut *mut RadisRun,
) -> RadisStatus {
    guard(|| {
        non_null!(target, config, out);
        let mut rng = Rng::new(seed);
        lift(run_radis(&(*target).inner, &(*config).inner, &mut rng), |o| boxed(out, RadisRun { inner: o }))
    })
}

/// Evidence estimate `Z`, or NaN for a null handle.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn radis_run_evidence(run: *const RadisRun) -> f64 {
    run.as_ref().map_or(f64::NAN, |r| r.inner.evidence)
}

/// Number of weighted particles.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn radis_run_len(run: *const RadisRun) -> usize {
    run.as_ref().map_or(0, |r| r.inner.particles.len())
}

/// Particle dimension.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn radis_run_dim(run: *const RadisRun) -> usize {
    run.as_ref().map_or(0, |r| r.inner.particles.dim())
}

/// Target evaluations spent by the run.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn radis_run_evaluations(run: *const RadisRun) -> u64 {
    run.as_ref().map_or(0, |r| r.inner.evaluations)
}

/// Size of the final node set.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn radis_run_node_count(run: *const RadisRun) -> usize {
    run.as_ref().map_or(0, |r| r.inner.nodes.len())
}

/// Effective sample size of the normalized weights.
///
/// # Safety
/// `run` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn radis_run_ess(run: *const RadisRun, out: *mut f64) -> RadisStatus {
    guard(|| {
        non_null!(run, out);
        lift((*run).inner.particles.ess(), |v| *out = v)
    })
}

/// Self-normalized posterior mean into `out` (`len` must equal the dimension).
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn radis_run_mean(run: *const RadisRun, out: *mut f64, len: usize) -> RadisStatus {
    guard(|| {
        non_null!(run, out);
        let r = &(*run).inner;
        if len != r.particles.dim() {
            return fail(RadisStatus::DimensionMismatch, format!("expected {} entries, got {len}", r.particles.dim()));
        }
        lift(r.particles.mean(), |m| std::slice::from_raw_parts_mut(out, len).copy_from_slice(&m))
    })
}

/// Copy the particles: `points` receives `len * dim` coordinates row by row,
/// `log_weights` receives `len` unnormalized log weights. `len` must equal
/// [`radis_run_len`]. Either output may be null to skip it.
///
/// # Safety
/// Non-null outputs must have room for the stated number of doubles.
#[no_mangle]
pub unsafe extern "C" fn radis_run_particles(
    run: *const RadisRun,
    points: *mut f64,
    log_weights: *mut f64,
    len: usize,
) -> RadisStatus {
    guard(|| {
        non_null!(run);
        let set = &(*run).inner.particles;
        if len != set.len() {
            return fail(RadisStatus::DimensionMismatch, format!("run holds {} particles, got room for {len}", set.len()));
        }
        let d = set.dim();
        for (i, p) in set.particles().iter().enumerate() {
            if !points.is_null() {
                std::slice::from_raw_parts_mut(points.add(i * d), d).copy_from_slice(&p.x);
            }
            if !log_weights.is_null() {
                *log_weights.add(i) = p.log_weight;
            }
        }
        RadisStatus::Ok
    })
}

/// `log pi_hat(x)` of the emulator built on the final node set.
///
/// # Safety
/// `x` must point to `len` doubles; `run` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn radis_run_emulator_log(run: *const RadisRun, x: *const f64, len: usize, out: *mut f64) -> RadisStatus {
    guard(|| {
        non_null!(run, x, out);
        let em = &(*run).inner.final_emulator;
        if len != em.dim() {
            return fail(RadisStatus::DimensionMismatch, format!("expected {} coordinates, got {len}", em.dim()));
        }
        *out = em.log_eval(std::slice::from_raw_parts(x, len));
        RadisStatus::Ok
    })
}

/// # Safety
/// `run` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn radis_run_free(run: *mut RadisRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}
