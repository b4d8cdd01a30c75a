//! C interface to `jpcm-core`.
//!
//! Objects are opaque heap handles created by `*_new`/`*_from_*` functions
//! and released by the matching `*_free`. Every fallible function returns a
//! [`JpcmStatus`]; on failure a description is available from
//! [`jpcm_last_error`] on the same thread. Rotations cross the boundary as
//! row-major 3x3 matrices.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use jpcm_core::controller::{Controller, StepOutput};
use jpcm_core::dynamics::QuadState;
use jpcm_core::factors::{Pose, RelPoseMeas};
use jpcm_core::harness::{self, RunLog, Scenario};
use jpcm_core::so3::Rotation;
use jpcm_core::JpcmError;
use nalgebra::{DMatrix, Matrix3, Vector3};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JpcmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Solver = 4,
    Io = 5,
    Panic = 6,
}

/// Scenario configuration.
pub struct JpcmScenario(Scenario);

/// Closed-loop run result.
pub struct JpcmRunLog(RunLog);

/// Stateful receding-horizon controller.
pub struct JpcmController(Controller);

/// Full vehicle state in the world frame.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct JpcmState {
    pub position: [f64; 3],
    /// Body-to-world rotation, row-major.
    pub rotation: [f64; 9],
    pub velocity: [f64; 3],
    /// Body-frame angular velocity.
    pub angular_velocity: [f64; 3],
}

/// Relative pose of epoch `j` in the frame of epoch `i`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JpcmRelPose {
    pub i: u64,
    pub j: u64,
    /// Row-major rotation.
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
    /// Row-major 6x6 covariance ordered (rotation, translation).
    pub covariance: [f64; 36],
}

/// Outcome of one control step.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct JpcmStepResult {
    /// Rotor speeds to apply, rad/s.
    pub rotors: [f64; 4],
    /// Collective thrust and body moments.
    pub wrench: [f64; 4],
    pub estimate: JpcmState,
    pub iterations: u32,
    pub final_error: f64,
    /// Non-zero when the solve failed and the previous input was held.
    pub fallback: u8,
    pub cold_start: u8,
}

/// Per-axis tracking RMSE.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct JpcmRmse {
    pub position: [f64; 3],
    pub rotation: [f64; 3],
    pub samples: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

struct Failure(JpcmStatus, String);

impl From<JpcmError> for Failure {
    fn from(e: JpcmError) -> Self {
        let status = match &e {
            JpcmError::Config(_) | JpcmError::ConfigParse(_) => JpcmStatus::Config,
            JpcmError::Io(_) | JpcmError::Csv(_) => JpcmStatus::Io,
            JpcmError::NonFinite { .. } | JpcmError::NotPositiveDefinite(_) | JpcmError::EmptyGraph(_) => {
                JpcmStatus::Solver
            }
            _ => JpcmStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(JpcmStatus::InvalidArgument, msg.into())
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> JpcmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => JpcmStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            JpcmStatus::Panic
        }
    }
}

unsafe fn non_null<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure(JpcmStatus::NullPointer, format!("{what} is null")))
}

unsafe fn non_null_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure(JpcmStatus::NullPointer, format!("{what} is null")))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    let s = non_null(p, what)?;
    CStr::from_ptr(s).to_str().map_err(|_| invalid(format!("{what} is not UTF-8")))
}

fn rotation_from(m: &[f64; 9]) -> Result<Rotation, Failure> {
    Ok(Rotation::from_matrix(Matrix3::from_row_slice(m))?)
}

fn rotation_to(r: &Rotation) -> [f64; 9] {
    let m = r.matrix();
    std::array::from_fn(|k| m[(k / 3, k % 3)])
}

fn state_from(s: &JpcmState) -> Result<QuadState, Failure> {
    Ok(QuadState {
        position: Vector3::from(s.position),
        rotation: rotation_from(&s.rotation)?,
        velocity: Vector3::from(s.velocity),
        angular_velocity: Vector3::from(s.angular_velocity),
    })
}

fn state_to(x: &QuadState) -> JpcmState {
    JpcmState {
        position: x.position.into(),
        rotation: rotation_to(&x.rotation),
        velocity: x.velocity.into(),
        angular_velocity: x.angular_velocity.into(),
    }
}

fn rel_pose_from(r: &JpcmRelPose) -> Result<RelPoseMeas, Failure> {
    let i = usize::try_from(r.i).map_err(|_| invalid("epoch index out of range"))?;
    let j = usize::try_from(r.j).map_err(|_| invalid("epoch index out of range"))?;
    let pose = Pose {
        rotation: rotation_from(&r.rotation)?,
        translation: Vector3::from(r.translation),
    };
    Ok(RelPoseMeas::new(i, j, pose, DMatrix::from_row_slice(6, 6, &r.covariance))?)
}

fn step_to(out: &StepOutput) -> JpcmStepResult {
    JpcmStepResult {
        rotors: out.rotors.0.into(),
        wrench: out.wrench.as_vector().into(),
        estimate: state_to(&out.estimate),
        iterations: out.diagnostics.iterations.try_into().unwrap_or(u32::MAX),
        final_error: out.diagnostics.final_error,
        fallback: out.diagnostics.fallback.into(),
        cold_start: out.diagnostics.cold_start.into(),
    }
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn jpcm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn jpcm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a scenario from TOML text.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jpcm_scenario_from_toml(toml: *const c_char, out: *mut *mut JpcmScenario) -> JpcmStatus {
    guard(|| {
        let out = non_null_mut(out, "out")?;
        *out = ptr::null_mut();
        let s = Scenario::from_toml_str(c_str(toml, "toml")?)?;
        *out = boxed(JpcmScenario(s));
        Ok(())
    })
}

/// Loads one of the shipped scenarios by name.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jpcm_scenario_builtin(name: *const c_char, out: *mut *mut JpcmScenario) -> JpcmStatus {
    guard(|| {
        let out = non_null_mut(out, "out")?;
        *out = ptr::null_mut();
        *out = boxed(JpcmScenario(harness::builtin(c_str(name, "name")?)?));
        Ok(())
    })
}

/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn jpcm_scenario_set_seed(scenario: *mut JpcmScenario, seed: u64) -> JpcmStatus {
    guard(|| {
        non_null_mut(scenario, "scenario")?.0.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn jpcm_scenario_set_duration(scenario: *mut JpcmScenario, seconds: f64) -> JpcmStatus {
    guard(|| {
        let s = &mut non_null_mut(scenario, "scenario")?.0;
        let previous = s.duration;
        s.duration = seconds;
        if let Err(e) = s.validate() {
            s.duration = previous;
            return Err(e.into());
        }
        Ok(())
    })
}

/// Reference state at time `t` of the scenario's trajectory.
///
/// # Safety
/// `scenario` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jpcm_scenario_reference_state(
    scenario: *const JpcmScenario,
    t: f64,
    out: *mut JpcmState,
) -> JpcmStatus {
    guard(|| {
        let s = &non_null(scenario, "scenario")?.0;
        let out = non_null_mut(out, "out")?;
        *out = state_to(&s.reference.initial_state(t));
        Ok(())
    })
}

/// Releases a scenario. Null is ignored.
///
/// # Safety
/// `scenario` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn jpcm_scenario_free(scenario: *mut JpcmScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Simulates the scenario in closed loop. A run that stops early still
/// returns `JPCM_STATUS_OK`; see [`jpcm_run_log_failed`].
///
/// # Safety
/// `scenario` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jpcm_run_scenario(scenario: *const JpcmScenario, out: *mut *mut JpcmRunLog) -> JpcmStatus {
    guard(|| {
        let out = non_null_mut(out, "out")?;
        *out = ptr::null_mut();
        let log = harness::run_scenario(&non_null(scenario, "scenario")?.0)?;
        *out = boxed(JpcmRunLog(log));
        Ok(())
    })
}

/// Number of recorded control steps; zero for null.
///
/// # Safety
/// `log` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn jpcm_run_log_len(log: *const JpcmRunLog) -> u64 {
    log.as_ref().map_or(0, |l| l.0.records.len() as u64)
}

/// Non-zero when the run stopped before its duration.
///
/// # Safety
/// `log` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn jpcm_run_log_failed(log: *const JpcmRunLog) -> u8 {
    log.as_ref().map_or(0, |l| l.0.failure.is_some().into())
}

/// Tracking RMSE over samples with `t >= transient`.
///
/// # Safety
/// `log` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jpcm_run_log_rmse(log: *const JpcmRunLog, transient: f64, out: *mut JpcmRmse) -> JpcmStatus {
    guard(|| {
        let r = harness::compute_rmse(&non_null(log, "log")?.0, transient)?;
        *non_null_mut(out, "out")? = JpcmRmse {
            position: r.position,
            rotation: r.rotation,
            samples: r.samples as u64,
        };
        Ok(())
    })
}

/// Writes the run log as CSV without wall-clock timings.
///
/// # Safety
/// `log` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn jpcm_run_log_write_csv(log: *const JpcmRunLog, path: *const c_char) -> JpcmStatus {
    guard(|| {
        let log = &non_null(log, "log")?.0;
        harness::emit_csv(log, Path::new(c_str(path, "path")?), false)?;
        Ok(())
    })
}

/// # Safety
/// `log` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn jpcm_run_log_free(log: *mut JpcmRunLog) {
    if !log.is_null() {
        drop(Box::from_raw(log));
    }
}

/// Controller configured like the scenario (mode, weights, airframe and
/// reference).
///
/// # Safety
/// `scenario` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jpcm_controller_new(
    scenario: *const JpcmScenario,
    out: *mut *mut JpcmController,
) -> JpcmStatus {
    guard(|| {
        let out = non_null_mut(out, "out")?;
        *out = ptr::null_mut();
        let s = &non_null(scenario, "scenario")?.0;
        let c = Controller::new(s.mode, s.control.clone(), s.params, s.reference)?;
        *out = boxed(JpcmController(c));
        Ok(())
    })
}

/// One control step from a positioning measurement and an optional relative
/// pose (null when absent).
///
/// # Safety
/// `controller` must be a live handle, `measurement` and `out` valid
/// pointers and `rel_pose` null or valid.
#[no_mangle]
pub unsafe extern "C" fn jpcm_controller_step(
    controller: *mut JpcmController,
    measurement: *const JpcmState,
    rel_pose: *const JpcmRelPose,
    out: *mut JpcmStepResult,
) -> JpcmStatus {
    guard(|| {
        let c = &mut non_null_mut(controller, "controller")?.0;
        let meas = state_from(non_null(measurement, "measurement")?)?;
        let rel = rel_pose.as_ref().map(rel_pose_from).transpose()?;
        let out = non_null_mut(out, "out")?;
        *out = step_to(&c.step(&meas, rel)?);
        Ok(())
    })
}

/// # Safety
/// `controller` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn jpcm_controller_free(controller: *mut JpcmController) {
    if !controller.is_null() {
        drop(Box::from_raw(controller));
    }
}
