//! C ABI over `csrl-core`.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_from_*`
//! and released with the matching `*_free`. Every fallible call returns a
//! [`CsrlStatus`]; on failure the message is available from
//! [`csrl_last_error`] on the same thread. Strings returned to the caller are
//! owned by the caller and released with [`csrl_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use csrl_core::constraints::{build_recsys_set, RecsysShape, RestrictionSetDoc};
use csrl_core::harness::{Experiment, ExperimentConfig};
use csrl_core::mdp::{ActionId, RestrictionSet, StateId};
use csrl_core::recsys::{gen_default_params, RecsysEnv, RecsysParams};
use csrl_core::CsrlError;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsrlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    Construction = 4,
    Verification = 5,
    Config = 6,
    Load = 7,
    Invariant = 8,
    Io = 9,
    Json = 10,
    OutOfRange = 11,
    BufferTooSmall = 12,
    Panic = 13,
}

impl From<&CsrlError> for CsrlStatus {
    fn from(e: &CsrlError) -> Self {
        match e {
            CsrlError::InvalidInput(_) => CsrlStatus::InvalidInput,
            CsrlError::Construction(_) => CsrlStatus::Construction,
            CsrlError::Verification(_) => CsrlStatus::Verification,
            CsrlError::Config(_) => CsrlStatus::Config,
            CsrlError::Load { .. } => CsrlStatus::Load,
            CsrlError::Invariant(_) => CsrlStatus::Invariant,
            CsrlError::Io { .. } => CsrlStatus::Io,
            CsrlError::Json(_) => CsrlStatus::Json,
        }
    }
}

/// Recommendation environment handle.
pub struct CsrlRecsysEnv(RecsysEnv);

/// Verified restriction set handle.
pub struct CsrlRestrictionSet(RestrictionSet);

/// Built experiment handle.
pub struct CsrlExperiment(Experiment);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(CsrlStatus, String);

impl From<CsrlError> for Failure {
    fn from(e: CsrlError) -> Self {
        Failure(CsrlStatus::from(&e), e.to_string())
    }
}

type FfiResult<T> = Result<T, Failure>;

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> FfiResult<()>) -> CsrlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CsrlStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            CsrlStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(CsrlStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|e| Failure(CsrlStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or_else(|| null(what))
}

fn into_c_string(s: String) -> FfiResult<*mut c_char> {
    CString::new(s).map(CString::into_raw).map_err(|e| Failure(CsrlStatus::InvalidInput, e.to_string()))
}

/// Message of the last failed call on this thread, or NULL if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn csrl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Crate version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn csrl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must come from this library and not have been freed. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn csrl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Environment from the seeded default parameters.
///
/// # Safety
/// `out_env` must be a valid pointer to write the handle to.
#[no_mangle]
pub unsafe extern "C" fn csrl_recsys_env_new_default(seed: u64, out_env: *mut *mut CsrlRecsysEnv) -> CsrlStatus {
    guard(|| {
        let slot = out(out_env, "out_env")?;
        let env = RecsysEnv::new(gen_default_params(seed))?;
        *slot = Box::into_raw(Box::new(CsrlRecsysEnv(env)));
        Ok(())
    })
}

/// Environment from a JSON parameter document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out_env` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn csrl_recsys_env_from_json(json: *const c_char, out_env: *mut *mut CsrlRecsysEnv) -> CsrlStatus {
    guard(|| {
        let slot = out(out_env, "out_env")?;
        let params = RecsysParams::from_json(str_arg(json, "json")?)?;
        *slot = Box::into_raw(Box::new(CsrlRecsysEnv(RecsysEnv::new(params)?)));
        Ok(())
    })
}

/// # Safety
/// `env` must come from a `csrl_recsys_env_*` constructor and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn csrl_recsys_env_free(env: *mut CsrlRecsysEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// # Safety
/// `env` must be a live handle; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn csrl_recsys_env_shape(
    env: *const CsrlRecsysEnv,
    out_states: *mut usize,
    out_actions: *mut usize,
) -> CsrlStatus {
    guard(|| {
        let env = &handle(env, "env")?.0;
        *out(out_states, "out_states")? = env.params().num_states();
        *out(out_actions, "out_actions")? = env.params().num_actions;
        Ok(())
    })
}

fn check_pair(env: &RecsysEnv, s: usize, a: usize) -> FfiResult<()> {
    if s >= env.params().num_states() || a >= env.params().num_actions {
        return Err(Failure(CsrlStatus::OutOfRange, format!("pair ({s}, {a}) outside the state-action space")));
    }
    Ok(())
}

/// Immediate reward and termination probability of (state, action).
///
/// # Safety
/// `env` must be a live handle; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn csrl_recsys_env_pair(
    env: *const CsrlRecsysEnv,
    state: usize,
    action: usize,
    out_reward: *mut f64,
    out_termination: *mut f64,
) -> CsrlStatus {
    guard(|| {
        let env = &handle(env, "env")?.0;
        check_pair(env, state, action)?;
        *out(out_reward, "out_reward")? = env.reward_at(StateId(state), ActionId(action));
        *out(out_termination, "out_termination")? = env.termination_at(StateId(state), ActionId(action));
        Ok(())
    })
}

/// The 13-member variability set for `env`, verified.
///
/// # Safety
/// `env` must be a live handle; `out_set` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn csrl_restriction_set_recsys_default(
    env: *const CsrlRecsysEnv,
    out_set: *mut *mut CsrlRestrictionSet,
) -> CsrlStatus {
    guard(|| {
        let env = &handle(env, "env")?.0;
        let slot = out(out_set, "out_set")?;
        let set = build_recsys_set(&RecsysShape::from_env(env))?;
        *slot = Box::into_raw(Box::new(CsrlRestrictionSet(set)));
        Ok(())
    })
}

/// Builds and verifies a restriction-set document. `env` may be NULL when the
/// document has no variability entries.
///
/// # Safety
/// `json` must be a NUL-terminated string; `env` NULL or a live handle;
/// `out_set` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn csrl_restriction_set_from_json(
    json: *const c_char,
    num_states: usize,
    num_actions: usize,
    env: *const CsrlRecsysEnv,
    out_set: *mut *mut CsrlRestrictionSet,
) -> CsrlStatus {
    guard(|| {
        let slot = out(out_set, "out_set")?;
        let doc = RestrictionSetDoc::from_json(str_arg(json, "json")?)?;
        let shape = env.as_ref().map(|e| RecsysShape::from_env(&e.0));
        let set = doc.build(num_states, num_actions, shape.as_ref())?;
        *slot = Box::into_raw(Box::new(CsrlRestrictionSet(set)));
        Ok(())
    })
}

/// # Safety
/// `set` must come from a `csrl_restriction_set_*` constructor and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn csrl_restriction_set_free(set: *mut CsrlRestrictionSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// # Safety
/// `set` must be a live handle; `out_len` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn csrl_restriction_set_len(set: *const CsrlRestrictionSet, out_len: *mut usize) -> CsrlStatus {
    guard(|| {
        *out(out_len, "out_len")? = handle(set, "set")?.0.len();
        Ok(())
    })
}

fn check_member(set: &RestrictionSet, k: usize) -> FfiResult<()> {
    if k >= set.len() {
        return Err(Failure(CsrlStatus::OutOfRange, format!("member {k} out of range (set has {})", set.len())));
    }
    Ok(())
}

/// Id of member `k`; free the result with [`csrl_string_free`].
///
/// # Safety
/// `set` must be a live handle; `out_id` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn csrl_restriction_set_id(
    set: *const CsrlRestrictionSet,
    k: usize,
    out_id: *mut *mut c_char,
) -> CsrlStatus {
    guard(|| {
        let set = &handle(set, "set")?.0;
        let slot = out(out_id, "out_id")?;
        check_member(set, k)?;
        *slot = into_c_string(set.get(k).id().to_string())?;
        Ok(())
    })
}

/// Whether member `k` allows `action` in `state`.
///
/// # Safety
/// `set` must be a live handle; `out_allowed` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn csrl_restriction_set_allows(
    set: *const CsrlRestrictionSet,
    k: usize,
    state: usize,
    action: usize,
    out_allowed: *mut bool,
) -> CsrlStatus {
    guard(|| {
        let set = &handle(set, "set")?.0;
        let slot = out(out_allowed, "out_allowed")?;
        check_member(set, k)?;
        let r = set.get(k);
        if state >= r.num_states() || action >= r.num_actions() {
            return Err(Failure(CsrlStatus::OutOfRange, format!("pair ({state}, {action}) outside the mask")));
        }
        *slot = r.allows(StateId(state), ActionId(action));
        Ok(())
    })
}

/// Whether member `j` is declared strictly less restricted than member `k`.
///
/// # Safety
/// `set` must be a live handle; `out_looser` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn csrl_restriction_set_is_looser(
    set: *const CsrlRestrictionSet,
    j: usize,
    k: usize,
    out_looser: *mut bool,
) -> CsrlStatus {
    guard(|| {
        let set = &handle(set, "set")?.0;
        let slot = out(out_looser, "out_looser")?;
        check_member(set, j)?;
        check_member(set, k)?;
        *slot = set.is_looser(j, k);
        Ok(())
    })
}

/// Experiment from a JSON config; relative paths resolve against the working directory.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out_exp` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn csrl_experiment_from_json(json: *const c_char, out_exp: *mut *mut CsrlExperiment) -> CsrlStatus {
    guard(|| {
        let slot = out(out_exp, "out_exp")?;
        let cfg = ExperimentConfig::from_json(str_arg(json, "json")?)?;
        *slot = Box::into_raw(Box::new(CsrlExperiment(Experiment::new(cfg)?)));
        Ok(())
    })
}

/// Experiment from a JSON config file; relative paths resolve against its directory.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out_exp` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn csrl_experiment_load(path: *const c_char, out_exp: *mut *mut CsrlExperiment) -> CsrlStatus {
    guard(|| {
        let slot = out(out_exp, "out_exp")?;
        let cfg = ExperimentConfig::load(str_arg(path, "path")?)?;
        *slot = Box::into_raw(Box::new(CsrlExperiment(Experiment::new(cfg)?)));
        Ok(())
    })
}

/// # Safety
/// `exp` must come from a `csrl_experiment_*` constructor and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn csrl_experiment_free(exp: *mut CsrlExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}

/// Number of episodes per seed.
///
/// # Safety
/// `exp` must be a live handle; `out_episodes` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn csrl_experiment_episodes(exp: *const CsrlExperiment, out_episodes: *mut usize) -> CsrlStatus {
    guard(|| {
        *out(out_episodes, "out_episodes")? = handle(exp, "exp")?.0.config().episodes;
        Ok(())
    })
}

/// Runs one seed and writes each episode's raw return into `returns`, which
/// must hold at least `capacity` values. `out_len` receives the episode count
/// even when the buffer is too small.
///
/// # Safety
/// `exp` must be a live handle; `returns` must point to `capacity` writable
/// doubles (it may be NULL when `capacity` is 0); `out_len` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn csrl_experiment_run_seed(
    exp: *const CsrlExperiment,
    seed: u64,
    returns: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> CsrlStatus {
    guard(|| {
        let exp = &handle(exp, "exp")?.0;
        let len_slot = out(out_len, "out_len")?;
        let episodes = exp.config().episodes;
        *len_slot = episodes;
        if capacity < episodes {
            return Err(Failure(
                CsrlStatus::BufferTooSmall,
                format!("buffer holds {capacity} values, {episodes} needed"),
            ));
        }
        if returns.is_null() {
            return Err(null("returns"));
        }
        let records = exp.run_seed(seed)?;
        let buf = std::slice::from_raw_parts_mut(returns, episodes);
        for (slot, r) in buf.iter_mut().zip(&records) {
            *slot = r.raw_return;
        }
        Ok(())
    })
}

/// Runs every configured seed, writes `records.csv`, `summary.json` and
/// `config.json` under `out_dir`, and returns the summary as JSON (free with
/// [`csrl_string_free`]). Pass NULL for `out_summary` to skip it.
///
/// # Safety
/// `exp` must be a live handle; `out_dir` a NUL-terminated string;
/// `out_summary` NULL or a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn csrl_experiment_run(
    exp: *const CsrlExperiment,
    out_dir: *const c_char,
    out_summary: *mut *mut c_char,
) -> CsrlStatus {
    guard(|| {
        let exp = &handle(exp, "exp")?.0;
        let dir = str_arg(out_dir, "out_dir")?;
        let summary = exp.run_and_write(Path::new(dir))?;
        if let Some(slot) = out_summary.as_mut() {
            *slot = into_c_string(serde_json::to_string(&summary).map_err(CsrlError::from)?)?;
        }
        Ok(())
    })
}
