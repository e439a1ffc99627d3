//! C ABI over `knowsearch`.
//!
//! Conventions:
//! * every fallible function returns a [`KsStatus`] and writes its result
//!   through an out-pointer;
//! * on failure a human-readable message is kept per thread and can be read
//!   with [`ks_last_error_message`];
//! * worlds and policies are opaque handles released with their `_free`
//!   function; strings returned by the library are released with
//!   [`ks_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use knowsearch::eval::evaluate;
use knowsearch::grpo::{train, TrainConfig};
use knowsearch::reward::{compute_reward, RewardBranch, RewardConfig};
use knowsearch::scoring::token_f1;
use knowsearch::simenv::{gen_world, PolicyParams, SimConfig, World};
use knowsearch::store;
use knowsearch::trajectory::parse;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidArgument = 4,
    Io = 5,
    Internal = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KsRewardBranch {
    ZeroInvalid = 0,
    DirectAnswer = 1,
    SearchAnswer = 2,
    ZeroNoBranch = 3,
}

impl From<RewardBranch> for KsRewardBranch {
    fn from(b: RewardBranch) -> Self {
        match b {
            RewardBranch::ZeroInvalid => KsRewardBranch::ZeroInvalid,
            RewardBranch::DirectAnswer => KsRewardBranch::DirectAnswer,
            RewardBranch::SearchAnswer => KsRewardBranch::SearchAnswer,
            RewardBranch::ZeroNoBranch => KsRewardBranch::ZeroNoBranch,
        }
    }
}

/// Reward with its structure flags. `f1_a1` / `f1_a2` are only meaningful
/// when the matching `has_` field is true.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsRewardBreakdown {
    pub reward: f64,
    pub f: bool,
    pub s: bool,
    pub t: bool,
    pub u: bool,
    pub has_f1_a1: bool,
    pub f1_a1: f64,
    pub has_f1_a2: bool,
    pub f1_a2: f64,
    pub branch: KsRewardBranch,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsMetrics {
    pub em: f64,
    pub mean_f1: f64,
    pub sr: f64,
    pub sr_known: f64,
    pub sr_unknown: f64,
    pub n: usize,
}

/// Opaque simulated world.
pub struct KsWorld {
    world: World,
}

/// Opaque policy weights.
pub struct KsPolicy {
    params: PolicyParams,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: KsStatus,
    message: String,
}

impl Failure {
    fn new(status: KsStatus, message: impl ToString) -> Self {
        Failure {
            status,
            message: message.to_string(),
        }
    }
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> KsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            KsStatus::Ok
        }
        Ok(Err(fail)) => {
            set_last_error(&fail.message);
            fail.status
        }
        Err(_) => {
            set_last_error("internal panic");
            KsStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(
            KsStatus::NullPointer,
            format!("{name} is null"),
        ));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(KsStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure::new(KsStatus::NullPointer, format!("{name} is null")))
}

fn out_arg<T>(p: *mut T, name: &str) -> Result<*mut T, Failure> {
    if p.is_null() {
        Err(Failure::new(
            KsStatus::NullPointer,
            format!("{name} is null"),
        ))
    } else {
        Ok(p)
    }
}

fn store_failure(e: store::StoreError) -> Failure {
    match e {
        store::StoreError::Io { .. } => Failure::new(KsStatus::Io, e),
        store::StoreError::Sim(_) => Failure::new(KsStatus::InvalidArgument, e),
        _ => Failure::new(KsStatus::Parse, e),
    }
}

/// Message for the last failed call on this thread, or null after a
/// success. Valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn ks_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static, NUL-terminated version string.
#[no_mangle]
pub extern "C" fn ks_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn ks_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `pred` and `gold` must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ks_token_f1(
    pred: *const c_char,
    gold: *const c_char,
    out: *mut f64,
) -> KsStatus {
    guard(|| {
        let pred = str_arg(pred, "pred")?;
        let gold = str_arg(gold, "gold")?;
        *out_arg(out, "out")? = token_f1(pred, gold);
        Ok(())
    })
}

/// Parses a tagged trajectory and scores it against `n_golds` gold answers.
///
/// # Safety
/// `text` must be a NUL-terminated string, `golds` an array of `n_golds`
/// NUL-terminated strings, and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ks_score_trajectory(
    text: *const c_char,
    golds: *const *const c_char,
    n_golds: usize,
    tau: f64,
    out: *mut KsRewardBreakdown,
) -> KsStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        let out = out_arg(out, "out")?;
        if n_golds == 0 {
            return Err(Failure::new(
                KsStatus::InvalidArgument,
                "at least one gold answer is required",
            ));
        }
        if golds.is_null() {
            return Err(Failure::new(KsStatus::NullPointer, "golds is null"));
        }
        let golds = std::slice::from_raw_parts(golds, n_golds)
            .iter()
            .map(|&g| str_arg(g, "gold"))
            .collect::<Result<Vec<_>, _>>()?;
        let cfg = RewardConfig::new(tau).map_err(|e| Failure::new(KsStatus::InvalidArgument, e))?;
        let traj = parse(text).map_err(|e| Failure::new(KsStatus::Parse, e))?;
        let r = compute_reward(&traj, &golds, &cfg)
            .map_err(|e| Failure::new(KsStatus::InvalidArgument, e))?;
        *out = KsRewardBreakdown {
            reward: r.reward,
            f: r.flags.f,
            s: r.flags.s,
            t: r.flags.t,
            u: r.flags.u,
            has_f1_a1: r.f1_a1.is_some(),
            f1_a1: r.f1_a1.unwrap_or(0.0),
            has_f1_a2: r.f1_a2.is_some(),
            f1_a2: r.f1_a2.unwrap_or(0.0),
            branch: r.branch.into(),
        };
        Ok(())
    })
}

/// Generates a world in memory.
///
/// # Safety
/// `out` must be writable. On success `*out` owns a handle to release with
/// [`ks_world_free`].
#[no_mangle]
pub unsafe extern "C" fn ks_world_generate(
    n_known: usize,
    n_unknown: usize,
    seed: u64,
    label_noise: f64,
    fault_rate: f64,
    top_k: usize,
    out: *mut *mut KsWorld,
) -> KsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let sim = SimConfig {
            label_noise,
            fault_rate,
            top_k,
        };
        let world = gen_world(n_known, n_unknown, seed)
            .and_then(|g| g.into_world(sim))
            .map_err(|e| Failure::new(KsStatus::InvalidArgument, e))?;
        *out = Box::into_raw(Box::new(KsWorld { world }));
        Ok(())
    })
}

/// Loads a world directory written by `knowsearch gen-data`.
///
/// # Safety
/// `dir` must be a NUL-terminated path and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ks_world_load(dir: *const c_char, out: *mut *mut KsWorld) -> KsStatus {
    guard(|| {
        let dir = str_arg(dir, "dir")?;
        let out = out_arg(out, "out")?;
        let world = store::read_world(Path::new(dir)).map_err(store_failure)?;
        *out = Box::into_raw(Box::new(KsWorld { world }));
        Ok(())
    })
}

/// Number of questions, or 0 for a null handle.
///
/// # Safety
/// `world` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ks_world_len(world: *const KsWorld) -> usize {
    world.as_ref().map_or(0, |w| w.world.questions().len())
}

/// # Safety
/// `world` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ks_world_free(world: *mut KsWorld) {
    if !world.is_null() {
        drop(Box::from_raw(world));
    }
}

/// Trains from zero weights. `config` is flat `key = value` text; null or
/// empty means defaults.
///
/// # Safety
/// `world` must be a live handle, `config` null or NUL-terminated, `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ks_train(
    world: *const KsWorld,
    config: *const c_char,
    out: *mut *mut KsPolicy,
) -> KsStatus {
    guard(|| {
        let world = ref_arg(world, "world")?;
        let out = out_arg(out, "out")?;
        let cfg = if config.is_null() {
            TrainConfig::default()
        } else {
            TrainConfig::from_kv_text(str_arg(config, "config")?)
                .map_err(|e| Failure::new(KsStatus::Parse, e))?
        };
        let (params, _) =
            train(&world.world, &cfg).map_err(|e| Failure::new(KsStatus::InvalidArgument, e))?;
        *out = Box::into_raw(Box::new(KsPolicy { params }));
        Ok(())
    })
}

/// Builds a policy from a weight vector.
///
/// # Safety
/// `weights` must point to `len` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn ks_policy_new(
    weights: *const f64,
    len: usize,
    out: *mut *mut KsPolicy,
) -> KsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if weights.is_null() {
            return Err(Failure::new(KsStatus::NullPointer, "weights is null"));
        }
        let params = PolicyParams::new(std::slice::from_raw_parts(weights, len).to_vec())
            .map_err(|e| Failure::new(KsStatus::InvalidArgument, e))?;
        *out = Box::into_raw(Box::new(KsPolicy { params }));
        Ok(())
    })
}

/// Loads a `params.json` file written by `knowsearch train`.
///
/// # Safety
/// `path` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ks_policy_load(path: *const c_char, out: *mut *mut KsPolicy) -> KsStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        let params = store::read_params(Path::new(path)).map_err(store_failure)?;
        *out = Box::into_raw(Box::new(KsPolicy { params }));
        Ok(())
    })
}

/// Copies up to `len` weights into `buf` and stores the full count in
/// `needed`. Pass a null `buf` to query the size.
///
/// # Safety
/// `policy` must be a live handle, `buf` null or writable for `len` doubles,
/// `needed` writable.
#[no_mangle]
pub unsafe extern "C" fn ks_policy_weights(
    policy: *const KsPolicy,
    buf: *mut f64,
    len: usize,
    needed: *mut usize,
) -> KsStatus {
    guard(|| {
        let policy = ref_arg(policy, "policy")?;
        let needed = out_arg(needed, "needed")?;
        let w = &policy.params.weights;
        *needed = w.len();
        if !buf.is_null() {
            let n = len.min(w.len());
            ptr::copy_nonoverlapping(w.as_ptr(), buf, n);
        }
        Ok(())
    })
}

/// Serializes the policy in the `params.json` format. Release the result
/// with [`ks_string_free`].
///
/// # Safety
/// `policy` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ks_policy_to_json(
    policy: *const KsPolicy,
    out: *mut *mut c_char,
) -> KsStatus {
    guard(|| {
        let policy = ref_arg(policy, "policy")?;
        let out = out_arg(out, "out")?;
        let json = store::params_to_json(&policy.params);
        *out = CString::new(json)
            .map_err(|e| Failure::new(KsStatus::Internal, e))?
            .into_raw();
        Ok(())
    })
}

/// # Safety
/// `policy` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ks_policy_free(policy: *mut KsPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Greedy evaluation of `policy` on every question of `world`.
///
/// # Safety
/// Both handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ks_evaluate(
    policy: *const KsPolicy,
    world: *const KsWorld,
    out: *mut KsMetrics,
) -> KsStatus {
    guard(|| {
        let policy = ref_arg(policy, "policy")?;
        let world = ref_arg(world, "world")?;
        let out = out_arg(out, "out")?;
        let m = evaluate(&policy.params, &world.world)
            .map_err(|e| Failure::new(KsStatus::InvalidArgument, e))?;
        *out = KsMetrics {
            em: m.em,
            mean_f1: m.mean_f1,
            sr: m.sr,
            sr_known: m.sr_known,
            sr_unknown: m.sr_unknown,
            n: m.n,
        };
        Ok(())
    })
}
