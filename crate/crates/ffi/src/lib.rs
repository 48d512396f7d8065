//! C ABI over `cdpr-core`.
//!
//! A model is an opaque handle created from scenario JSON (or one of the
//! built-in canonical scenarios) and released with `cdpr_model_free`.
//! Every other call returns a `CdprStatus`; on failure a human-readable
//! message is kept per thread and can be copied out with
//! `cdpr_last_error_message`.
//!
//! Configurations cross the boundary as eight doubles
//! `x y z rx ry rz q1 q2`: reference-body position (m), orientation as a
//! rotation vector (rad), and the two internal coordinates.  Matrices are
//! row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cdpr_core::kinematics::{
    condition_number, forward_kinematics, inverse_kinematics, jacobian, CableLengths, FkOptions,
};
use cdpr_core::model::{Configuration, Pose, Variant, Vec8};
use cdpr_core::scenario::Scenario;
use cdpr_core::statics::static_tensions;
use cdpr_core::{canonical, Error};
use nalgebra::{UnitQuaternion, Vector3};

/// Length of a configuration or cable-length array.
pub const CDPR_DOF: usize = 8;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdprStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Scenario JSON could not be parsed.
    Parse = 3,
    /// Scenario parsed but violates an invariant.
    InvalidScenario = 4,
    OutOfStroke = 5,
    Singular = 6,
    NoConvergence = 7,
    /// Any other numerical failure (coil bind, infeasible statics, …).
    Numerical = 8,
    /// A Rust panic was caught at the boundary.  The handle may be reused.
    Internal = 9,
}

/// Built-in canonical scenarios.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdprVariant {
    AScrew = 0,
    AWinder = 1,
    BGripper = 2,
    CRotatableGripper = 3,
}

/// Opaque model handle.
pub struct CdprModel {
    scenario: Scenario,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
}

fn status_of(e: &Error) -> CdprStatus {
    match e {
        Error::Parse { .. } | Error::Json(_) => CdprStatus::Parse,
        Error::InvalidScenario(_) => CdprStatus::InvalidScenario,
        Error::OutOfStroke { .. } => CdprStatus::OutOfStroke,
        Error::Singular { .. } => CdprStatus::Singular,
        Error::NoConvergence { .. } => CdprStatus::NoConvergence,
        e if e.is_numerical() => CdprStatus::Numerical,
        _ => CdprStatus::InvalidArgument,
    }
}

/// Runs `f`, turning errors and panics into a status plus the thread's
/// last-error message.
fn guard(f: impl FnOnce() -> Result<(), CdprStatusError>) -> CdprStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            CdprStatus::Ok
        }
        Ok(Err(CdprStatusError(status, message))) => {
            set_error(message);
            status
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {message}"));
            CdprStatus::Internal
        }
    }
}

struct CdprStatusError(CdprStatus, String);

impl From<Error> for CdprStatusError {
    fn from(e: Error) -> Self {
        CdprStatusError(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> CdprStatusError {
    CdprStatusError(CdprStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn model_ref<'a>(model: *const CdprModel) -> Result<&'a CdprModel, CdprStatusError> {
    model.as_ref().ok_or_else(|| null("model"))
}

unsafe fn read8<'a>(p: *const f64, what: &str) -> Result<&'a [f64; CDPR_DOF], CdprStatusError> {
    (p as *const [f64; CDPR_DOF]).as_ref().ok_or_else(|| null(what))
}

unsafe fn write_slice<'a>(p: *mut f64, n: usize, what: &str) -> Result<&'a mut [f64], CdprStatusError> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, n))
}

fn configuration(c: &[f64; CDPR_DOF]) -> Result<Configuration, CdprStatusError> {
    if c.iter().any(|v| !v.is_finite()) {
        return Err(CdprStatusError(CdprStatus::InvalidArgument, "configuration is not finite".into()));
    }
    let pose =
        Pose::new(Vector3::new(c[0], c[1], c[2]), UnitQuaternion::from_scaled_axis(Vector3::new(c[3], c[4], c[5])));
    Ok(Configuration::new(pose, [c[6], c[7]]))
}

fn coordinates(q: &Configuration) -> [f64; CDPR_DOF] {
    let p = q.base_pose.position;
    let r = q.base_pose.orientation.scaled_axis();
    [p.x, p.y, p.z, r.x, r.y, r.z, q.internal[0], q.internal[1]]
}

fn boxed(scenario: Scenario, out: *mut *mut CdprModel) {
    // SAFETY: callers check `out` for null first.
    unsafe { *out = Box::into_raw(Box::new(CdprModel { scenario })) };
}

/// Creates a model from a NUL-terminated scenario JSON document.
///
/// # Safety
/// `json` must be a valid C string; `out` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn cdpr_model_from_json(json: *const c_char, out: *mut *mut CdprModel) -> CdprStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| CdprStatusError(CdprStatus::Parse, format!("scenario is not UTF-8: {e}")))?;
        boxed(Scenario::from_json_str(text)?, out);
        Ok(())
    })
}

/// Creates a model from one of the built-in canonical scenarios; `variant`
/// is a `CdprVariant` value.
///
/// # Safety
/// `out` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn cdpr_model_canonical(variant: u32, out: *mut *mut CdprModel) -> CdprStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        // taken as an integer: an out-of-range enum from C would be undefined
        let v = match variant {
            x if x == CdprVariant::AScrew as u32 => Variant::AScrew,
            x if x == CdprVariant::AWinder as u32 => Variant::AWinder,
            x if x == CdprVariant::BGripper as u32 => Variant::BGripper,
            x if x == CdprVariant::CRotatableGripper as u32 => Variant::CRotatableGripper,
            other => return Err(CdprStatusError(CdprStatus::InvalidArgument, format!("unknown variant {other}"))),
        };
        boxed(canonical::scenario(v), out);
        Ok(())
    })
}

/// Releases a model.  Null is accepted and ignored.
///
/// # Safety
/// `model` must come from a `cdpr_model_*` constructor and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn cdpr_model_free(model: *mut CdprModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Copies the calling thread's last error message (NUL-terminated,
/// truncated to fit) into `buf` and returns the full message length in
/// bytes, excluding the terminator.  Pass a null `buf` to query the length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn cdpr_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Cable lengths (m) of configuration `q`.
///
/// # Safety
/// `q` and `lengths_out` must each point to 8 doubles.
#[no_mangle]
pub unsafe extern "C" fn cdpr_ik(model: *const CdprModel, q: *const f64, lengths_out: *mut f64) -> CdprStatus {
    guard(|| {
        let sc = &model_ref(model)?.scenario;
        let q = configuration(read8(q, "q")?)?;
        let out = write_slice(lengths_out, CDPR_DOF, "lengths_out")?;
        let l = inverse_kinematics(&sc.geometry, &sc.design, &q)?;
        out.copy_from_slice(l.0.as_slice());
        Ok(())
    })
}

/// Configuration with the given cable lengths, searched from `guess` with
/// the default damped-Newton options.  `iterations_out` may be null.
///
/// # Safety
/// `lengths`, `guess` and `q_out` must each point to 8 doubles;
/// `iterations_out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn cdpr_fk(
    model: *const CdprModel,
    lengths: *const f64,
    guess: *const f64,
    q_out: *mut f64,
    iterations_out: *mut u32,
) -> CdprStatus {
    guard(|| {
        let sc = &model_ref(model)?.scenario;
        let l = CableLengths(Vec8::from(*read8(lengths, "lengths")?));
        let q0 = configuration(read8(guess, "guess")?)?;
        let out = write_slice(q_out, CDPR_DOF, "q_out")?;
        let sol = forward_kinematics(&sc.geometry, &sc.design, &l, &q0, &FkOptions::default())?;
        out.copy_from_slice(&coordinates(&sol.configuration));
        if let Some(it) = iterations_out.as_mut() {
            *it = sol.iterations as u32;
        }
        Ok(())
    })
}

/// 8×8 cable-length Jacobian, row-major (row = cable), and optionally its
/// condition number with rotational columns scaled by the scenario's
/// characteristic length.  `condition_out` may be null.
///
/// # Safety
/// `q` must point to 8 doubles, `jacobian_out` to 64; `condition_out` must
/// be null or writable.
#[no_mangle]
pub unsafe extern "C" fn cdpr_jacobian(
    model: *const CdprModel,
    q: *const f64,
    jacobian_out: *mut f64,
    condition_out: *mut f64,
) -> CdprStatus {
    guard(|| {
        let sc = &model_ref(model)?.scenario;
        let q = configuration(read8(q, "q")?)?;
        let out = write_slice(jacobian_out, CDPR_DOF * CDPR_DOF, "jacobian_out")?;
        let j = jacobian(&sc.geometry, &sc.design, &q)?;
        for (r, row) in out.chunks_exact_mut(CDPR_DOF).enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = j.matrix[(r, c)];
            }
        }
        if let Some(cond) = condition_out.as_mut() {
            *cond = condition_number(&j, sc.simulation.characteristic_length);
        }
        Ok(())
    })
}

/// Unique static cable tensions (N) holding configuration `q` against
/// gravity and the mechanism springs.  `feasible_out` (may be null) is set
/// to 1 when every tension lies within the scenario's bounds, else 0; the
/// tensions are written either way.
///
/// # Safety
/// `q` and `tensions_out` must each point to 8 doubles; `feasible_out`
/// must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn cdpr_solve_tensions(
    model: *const CdprModel,
    q: *const f64,
    tensions_out: *mut f64,
    feasible_out: *mut i32,
) -> CdprStatus {
    guard(|| {
        let sc = &model_ref(model)?.scenario;
        let q = configuration(read8(q, "q")?)?;
        let out = write_slice(tensions_out, CDPR_DOF, "tensions_out")?;
        let sol = static_tensions(&sc.geometry, &sc.design, &q)?;
        out.copy_from_slice(sol.tensions.0.as_slice());
        if let Some(f) = feasible_out.as_mut() {
            *f = sol.verdict.is_feasible() as i32;
        }
        Ok(())
    })
}
