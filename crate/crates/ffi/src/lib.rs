//! C ABI over the flexlink simulator.
//!
//! Every entry point returns a [`FlexlinkStatus`]; on failure the message is
//! kept per thread and can be copied out with [`flexlink_last_error_message`].
//! Scenarios are opaque handles created from TOML and released with
//! [`flexlink_scenario_free`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use flexlink::modal::{solve_characteristic_roots, DEFAULT_ROOT_TOLERANCE};
use flexlink::output::run_to_dir;
use flexlink::{run_scenario, FlexError, ModalBasis, ScenarioFile};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlexlinkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Config = 4,
    Numeric = 5,
    Divergence = 6,
    Io = 7,
    MissingFile = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Opaque scenario handle.
pub struct FlexlinkScenario {
    inner: ScenarioFile,
}

/// Headline figures of a run. Times that did not occur are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlexlinkSummary {
    pub contact_time: f64,
    pub free_phase_tracking_error: f64,
    pub lyapunov_initial: f64,
    pub lyapunov_max_increase: f64,
    pub steady_force: f64,
    pub steady_penetration: f64,
    pub expected_penetration: f64,
    pub tip_position_error: f64,
    pub max_tip_deflection: f64,
    pub settling_time: f64,
    pub force_error_sup: f64,
    pub velocity_error_bound: f64,
    pub force_bound_holds: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlexlinkModeConstants {
    pub mode_index: u32,
    pub beta_l: f64,
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    /// Clamped-free natural frequency (rad/s).
    pub natural_frequency: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
}

fn status_of(err: &FlexError) -> FlexlinkStatus {
    match err {
        FlexError::Parse { .. } | FlexError::Malformed { .. } => FlexlinkStatus::Parse,
        FlexError::Config(_) | FlexError::Domain { .. } => FlexlinkStatus::Config,
        FlexError::RootBracket { .. } | FlexError::Quadrature { .. } | FlexError::Numeric(_) => {
            FlexlinkStatus::Numeric
        }
        FlexError::Divergence { .. } => FlexlinkStatus::Divergence,
        FlexError::Io(_) | FlexError::Csv(_) => FlexlinkStatus::Io,
        FlexError::MissingFile(_) => FlexlinkStatus::MissingFile,
    }
}

/// Runs `body`, recording errors and converting panics.
fn guard<F>(body: F) -> FlexlinkStatus
where
    F: FnOnce() -> Result<(), (FlexlinkStatus, String)>,
{
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error(String::new());
            FlexlinkStatus::Ok
        }
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {message}"));
            FlexlinkStatus::Panic
        }
    }
}

fn lift(err: FlexError) -> (FlexlinkStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(name: &str) -> (FlexlinkStatus, String) {
    (FlexlinkStatus::NullPointer, format!("{name} is null"))
}

unsafe fn read_str<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, (FlexlinkStatus, String)> {
    if ptr.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| (FlexlinkStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

unsafe fn scenario_ref<'a>(ptr: *const FlexlinkScenario) -> Result<&'a FlexlinkScenario, (FlexlinkStatus, String)> {
    ptr.as_ref().ok_or_else(|| null("scenario"))
}

/// Parses a scenario from TOML text.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn flexlink_scenario_from_str(text: *const c_char, out: *mut *mut FlexlinkScenario) -> FlexlinkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = read_str(text, "text")?;
        let inner = ScenarioFile::from_toml(text, Path::new("<string>")).map_err(lift)?;
        inner.to_config().map_err(lift)?;
        *out = Box::into_raw(Box::new(FlexlinkScenario { inner }));
        Ok(())
    })
}

/// Loads a scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn flexlink_scenario_from_file(path: *const c_char, out: *mut *mut FlexlinkScenario) -> FlexlinkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = read_str(path, "path")?;
        let inner = ScenarioFile::load(Path::new(path)).map_err(lift)?;
        inner.to_config().map_err(lift)?;
        *out = Box::into_raw(Box::new(FlexlinkScenario { inner }));
        Ok(())
    })
}

/// Releases a scenario; null is ignored.
///
/// # Safety
/// `scenario` must come from a constructor above and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn flexlink_scenario_free(scenario: *mut FlexlinkScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Overrides the run length in seconds.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn flexlink_scenario_set_duration(scenario: *mut FlexlinkScenario, duration: f64) -> FlexlinkStatus {
    guard(|| {
        let s = scenario.as_mut().ok_or_else(|| null("scenario"))?;
        let mut updated = s.inner.clone();
        updated.simulation.duration = duration;
        updated.to_config().map_err(lift)?;
        s.inner = updated;
        Ok(())
    })
}

/// Runs the scenario (sweep section ignored) and fills `out`.
///
/// # Safety
/// `scenario` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn flexlink_run(scenario: *const FlexlinkScenario, out: *mut FlexlinkSummary) -> FlexlinkStatus {
    guard(|| {
        let s = scenario_ref(scenario)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let config = s.inner.to_config().map_err(lift)?;
        let summary = run_scenario(config).map_err(lift)?.summary;
        *out = FlexlinkSummary {
            contact_time: summary.contact_time.unwrap_or(f64::NAN),
            free_phase_tracking_error: summary.free_phase_tracking_error,
            lyapunov_initial: summary.lyapunov_initial,
            lyapunov_max_increase: summary.lyapunov_max_increase,
            steady_force: summary.steady_force,
            steady_penetration: summary.steady_penetration,
            expected_penetration: summary.expected_penetration,
            tip_position_error: summary.tip_position_error,
            max_tip_deflection: summary.max_tip_deflection,
            settling_time: summary.settling_time.unwrap_or(f64::NAN),
            force_error_sup: summary.force_error_sup,
            velocity_error_bound: summary.velocity_error_bound,
            force_bound_holds: summary.force_bound_holds,
        };
        Ok(())
    })
}

/// Runs the scenario and writes the CSV artifacts under `dir`, like the
/// command-line `run`.
///
/// # Safety
/// `scenario` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn flexlink_run_to_dir(scenario: *const FlexlinkScenario, dir: *const c_char, sweep: bool) -> FlexlinkStatus {
    guard(|| {
        let s = scenario_ref(scenario)?;
        let dir = read_str(dir, "dir")?;
        let rows = run_to_dir(&s.inner, Path::new(dir), sweep).map_err(lift)?;
        match rows.iter().find_map(|r| r.outcome.as_ref().err()) {
            Some(message) => Err((FlexlinkStatus::Divergence, message.clone())),
            None => Ok(()),
        }
    })
}

/// Writes the first `count` roots of `cos x cosh x = −1` to `out`.
///
/// # Safety
/// `out` must have room for `count` values.
#[no_mangle]
pub unsafe extern "C" fn flexlink_characteristic_roots(count: usize, out: *mut f64) -> FlexlinkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let roots = solve_characteristic_roots(count, DEFAULT_ROOT_TOLERANCE).map_err(lift)?;
        std::slice::from_raw_parts_mut(out, count).copy_from_slice(&roots);
        Ok(())
    })
}

/// Modal constants of the scenario's beam. `written` receives the mode count;
/// when `capacity` is smaller nothing is written to `out` and
/// `FLEXLINK_STATUS_BUFFER_TOO_SMALL` is returned.
///
/// # Safety
/// `scenario` must be a live handle, `out` must have room for `capacity`
/// entries and `written` must be valid.
#[no_mangle]
pub unsafe extern "C" fn flexlink_modal_constants(
    scenario: *const FlexlinkScenario,
    out: *mut FlexlinkModeConstants,
    capacity: usize,
    written: *mut usize,
) -> FlexlinkStatus {
    guard(|| {
        let s = scenario_ref(scenario)?;
        if written.is_null() {
            return Err(null("written"));
        }
        let config = s.inner.to_config().map_err(lift)?;
        let basis = ModalBasis::new(config.beam, &config.quadrature).map_err(lift)?;
        let n = basis.mode_count();
        *written = n;
        if capacity < n {
            return Err((
                FlexlinkStatus::BufferTooSmall,
                format!("{n} modes do not fit in a buffer of {capacity}"),
            ));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let dst = std::slice::from_raw_parts_mut(out, n);
        for ((slot, shape), mode) in dst.iter_mut().zip(&basis.shapes).zip(&basis.constants.modes) {
            *slot = FlexlinkModeConstants {
                mode_index: shape.index as u32,
                beta_l: shape.root,
                a0: mode.a0,
                a1: mode.a1,
                a2: mode.a2,
                a3: mode.a3,
                natural_frequency: mode.natural_frequency(),
            };
        }
        Ok(())
    })
}

/// Copies the calling thread's last error message into `buf` (truncated,
/// always NUL-terminated when `len > 0`) and returns the full length
/// including the terminator.
///
/// # Safety
/// `buf` must have room for `len` bytes or be null.
#[no_mangle]
pub unsafe extern "C" fn flexlink_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let message = e.borrow();
        let bytes = message.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            let dst = std::slice::from_raw_parts_mut(buf.cast::<u8>(), n + 1);
            dst[..n].copy_from_slice(&bytes[..n]);
            dst[n] = 0;
        }
        bytes.len() + 1
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn flexlink_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
