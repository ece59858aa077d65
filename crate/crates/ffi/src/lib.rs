//! C ABI over the dataloop library.
//!
//! Conventions: every fallible function returns a [`DlStatus`]; outputs go
//! through pointer arguments that are written only on success. Strings
//! returned to the caller are heap-allocated and must be released with
//! [`dl_string_free`]. Handles are opaque and released with their `_free`
//! function. After a failure, [`dl_last_error`] describes it on the calling
//! thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dataloop::eval::{self, AblationMode, AblationScenario};
use dataloop::knowledge::{cosine_similarity, HashEmbedder, KnowledgeBase, DEFAULT_THRESHOLD};
use dataloop::llm::{count_tokens, ApproxTokenCounter};
use dataloop::profiler::{ingest_csv, profile, render_profile_text, DatasetProfile, IngestOptions, Table};
use dataloop::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DlStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    NotFound = 3,
    Conflict = 4,
    Precondition = 5,
    Domain = 6,
    Dimension = 7,
    DegenerateVector = 8,
    Ingest = 9,
    Embed = 10,
    Io = 11,
    Internal = 12,
    Panic = 13,
}

/// Run mode for [`dl_run_ablation`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DlAblationMode {
    ProgrammerOnly = 0,
    ProgrammerPlusInspector = 1,
}

/// A dataset profile.
pub struct DlProfile {
    inner: DatasetProfile,
}

/// A knowledge base with a hashing embedder.
pub struct DlKnowledgeBase {
    inner: KnowledgeBase,
    embedder: HashEmbedder,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let c = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> DlStatus {
    match e {
        Error::NotFound(_) => DlStatus::NotFound,
        Error::Conflict(_) => DlStatus::Conflict,
        Error::Precondition(_) | Error::EmptyHistory => DlStatus::Precondition,
        Error::Domain(_) | Error::Config(_) => DlStatus::Domain,
        Error::Dimension { .. } => DlStatus::Dimension,
        Error::DegenerateVector => DlStatus::DegenerateVector,
        Error::Ingest(_) | Error::IngestLine { .. } | Error::Profile(_) => DlStatus::Ingest,
        Error::Embed(_) => DlStatus::Embed,
        Error::Io(_) => DlStatus::Io,
        _ => DlStatus::Internal,
    }
}

struct Fail(DlStatus);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        set_error(e.to_string());
        Fail(status_of(&e))
    }
}

fn fail(status: DlStatus, msg: &str) -> Fail {
    set_error(msg);
    Fail(status)
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            DlStatus::Ok
        }
        Ok(Err(Fail(s))) => s,
        Err(_) => {
            set_error("panic inside dataloop");
            DlStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(fail(DlStatus::NullArgument, "null string argument"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(DlStatus::InvalidUtf8, "string argument is not UTF-8"))
}

unsafe fn out_ptr<'a, T>(p: *mut T) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| fail(DlStatus::NullArgument, "null output pointer"))
}

unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| fail(DlStatus::NullArgument, "null handle"))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(DlStatus::NullArgument, "null array argument"));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn into_c(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).unwrap_or_default().into_raw()
}

fn json<T: serde::Serialize>(v: &T) -> Result<*mut c_char, Fail> {
    serde_json::to_string(v).map(into_c).map_err(|e| fail(DlStatus::Internal, &e.to_string()))
}

/// Library version, a static string; do not free.
#[no_mangle]
pub extern "C" fn dl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL. Valid until
/// the next call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn dl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn dl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Profiles a CSV file.
///
/// # Safety
/// `path` is a NUL-terminated string; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dl_profile_open(path: *const c_char, out: *mut *mut DlProfile) -> DlStatus {
    guard(|| {
        let path = str_arg(path)?;
        let out = out_ptr(out)?;
        let inner = profile(&ingest_csv(path, &IngestOptions::default())?)?;
        *out = Box::into_raw(Box::new(DlProfile { inner }));
        Ok(())
    })
}

/// Profiles CSV bytes held in memory. `name` labels the dataset.
///
/// # Safety
/// `name` is a NUL-terminated string; `data` points to `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn dl_profile_from_bytes(
    name: *const c_char,
    data: *const u8,
    len: usize,
    out: *mut *mut DlProfile,
) -> DlStatus {
    guard(|| {
        let name = str_arg(name)?;
        let out = out_ptr(out)?;
        if data.is_null() && len > 0 {
            return Err(fail(DlStatus::NullArgument, "null data"));
        }
        let bytes = if len == 0 { &[][..] } else { std::slice::from_raw_parts(data, len) };
        let inner = profile(&Table::from_bytes(name, bytes, None)?)?;
        *out = Box::into_raw(Box::new(DlProfile { inner }));
        Ok(())
    })
}

/// # Safety
/// `p` is a handle from this library or NULL.
#[no_mangle]
pub unsafe extern "C" fn dl_profile_n_rows(p: *const DlProfile) -> usize {
    p.as_ref().map_or(0, |p| p.inner.n_rows)
}

/// # Safety
/// `p` is a handle from this library or NULL.
#[no_mangle]
pub unsafe extern "C" fn dl_profile_n_cols(p: *const DlProfile) -> usize {
    p.as_ref().map_or(0, |p| p.inner.n_cols)
}

/// The profile as JSON.
///
/// # Safety
/// `p` is a valid handle; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dl_profile_to_json(p: *const DlProfile, out: *mut *mut c_char) -> DlStatus {
    guard(|| {
        let p = handle(p)?;
        let out = out_ptr(out)?;
        *out = json(&p.inner)?;
        Ok(())
    })
}

/// The profile as the plain-text block used in prompts.
///
/// # Safety
/// `p` is a valid handle; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dl_profile_render_text(p: *const DlProfile, out: *mut *mut c_char) -> DlStatus {
    guard(|| {
        let p = handle(p)?;
        let out = out_ptr(out)?;
        *out = into_c(render_profile_text(&p.inner));
        Ok(())
    })
}

/// # Safety
/// `p` is a handle from this library (or NULL) and is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dl_profile_free(p: *mut DlProfile) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Opens (creating if needed) a knowledge directory.
///
/// # Safety
/// `dir` is a NUL-terminated string; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dl_kb_open(dir: *const c_char, out: *mut *mut DlKnowledgeBase) -> DlStatus {
    guard(|| {
        let dir = str_arg(dir)?;
        let out = out_ptr(out)?;
        let inner = KnowledgeBase::open_dir(dir)?;
        *out = Box::into_raw(Box::new(DlKnowledgeBase { inner, embedder: HashEmbedder::default() }));
        Ok(())
    })
}

/// A knowledge base that lives only in memory.
///
/// # Safety
/// `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dl_kb_new_in_memory(out: *mut *mut DlKnowledgeBase) -> DlStatus {
    guard(|| {
        let out = out_ptr(out)?;
        *out = Box::into_raw(Box::new(DlKnowledgeBase {
            inner: KnowledgeBase::in_memory(),
            embedder: HashEmbedder::default(),
        }));
        Ok(())
    })
}

/// Adds an entry and returns its id.
///
/// # Safety
/// `kb` is a valid handle; strings are NUL-terminated; `out_id` is valid.
#[no_mangle]
pub unsafe extern "C" fn dl_kb_add(
    kb: *const DlKnowledgeBase,
    description: *const c_char,
    code: *const c_char,
    out_id: *mut *mut c_char,
) -> DlStatus {
    guard(|| {
        let kb = handle(kb)?;
        let (description, code) = (str_arg(description)?, str_arg(code)?);
        let out = out_ptr(out_id)?;
        *out = into_c(kb.inner.add_entry(description, code)?);
        Ok(())
    })
}

/// # Safety
/// `kb` is a valid handle; `id` is NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn dl_kb_remove(kb: *const DlKnowledgeBase, id: *const c_char) -> DlStatus {
    guard(|| {
        let kb = handle(kb)?;
        kb.inner.remove_entry(str_arg(id)?)?;
        Ok(())
    })
}

/// # Safety
/// `kb` is a handle from this library or NULL.
#[no_mangle]
pub unsafe extern "C" fn dl_kb_len(kb: *const DlKnowledgeBase) -> usize {
    kb.as_ref().map_or(0, |kb| kb.inner.len())
}

/// All entries as a JSON array.
///
/// # Safety
/// `kb` is a valid handle; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dl_kb_list_json(kb: *const DlKnowledgeBase, out: *mut *mut c_char) -> DlStatus {
    guard(|| {
        let kb = handle(kb)?;
        let out = out_ptr(out)?;
        *out = json(&kb.inner.list_entries())?;
        Ok(())
    })
}

/// Matches an instruction; the JSON result holds `matched` (or null) and
/// `all_scores`. A NaN `theta` selects the default threshold.
///
/// # Safety
/// `kb` is a valid handle; `instruction` is NUL-terminated; `out` is valid.
#[no_mangle]
pub unsafe extern "C" fn dl_kb_match(
    kb: *const DlKnowledgeBase,
    instruction: *const c_char,
    theta: f64,
    out_json: *mut *mut c_char,
) -> DlStatus {
    guard(|| {
        let kb = handle(kb)?;
        let instruction = str_arg(instruction)?;
        let out = out_ptr(out_json)?;
        let theta = if theta.is_nan() { DEFAULT_THRESHOLD } else { theta };
        let m = kb.inner.match_instruction(instruction, theta, &kb.embedder)?;
        *out = json(&m)?;
        Ok(())
    })
}

/// # Safety
/// `kb` is a handle from this library (or NULL) and is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dl_kb_free(kb: *mut DlKnowledgeBase) {
    if !kb.is_null() {
        drop(Box::from_raw(kb));
    }
}

/// # Safety
/// `a` and `b` point to `len` doubles; `out` is valid.
#[no_mangle]
pub unsafe extern "C" fn dl_cosine_similarity(a: *const f64, b: *const f64, len: usize, out: *mut f64) -> DlStatus {
    guard(|| {
        let (a, b) = (slice_arg(a, len)?, slice_arg(b, len)?);
        *out_ptr(out)? = cosine_similarity(a, b)?;
        Ok(())
    })
}

/// # Safety
/// `out` is valid.
#[no_mangle]
pub unsafe extern "C" fn dl_accuracy(tp: u64, tn: u64, fp: u64, fn_: u64, out: *mut f64) -> DlStatus {
    guard(|| {
        *out_ptr(out)? = eval::accuracy(tp, tn, fp, fn_)?;
        Ok(())
    })
}

/// # Safety
/// `y` points to `len_y` doubles, `y_hat` to `len_hat`; `out` is valid.
#[no_mangle]
pub unsafe extern "C" fn dl_mse(y: *const f64, len_y: usize, y_hat: *const f64, len_hat: usize, out: *mut f64) -> DlStatus {
    guard(|| {
        *out_ptr(out)? = eval::mse(slice_arg(y, len_y)?, slice_arg(y_hat, len_hat)?)?;
        Ok(())
    })
}

/// # Safety
/// `out` is valid.
#[no_mangle]
pub unsafe extern "C" fn dl_estimate_api_capacity(context_tokens: u64, reserved_tokens: u64, avg_api_tokens: u64, out: *mut u64) -> DlStatus {
    guard(|| {
        *out_ptr(out)? = eval::estimate_api_capacity(context_tokens, reserved_tokens, avg_api_tokens)?;
        Ok(())
    })
}

/// Approximate token count of a string.
///
/// # Safety
/// `text` is NUL-terminated; `out` is valid.
#[no_mangle]
pub unsafe extern "C" fn dl_count_tokens(text: *const c_char, out: *mut usize) -> DlStatus {
    guard(|| {
        let text = str_arg(text)?;
        *out_ptr(out)? = count_tokens(&ApproxTokenCounter::default(), text);
        Ok(())
    })
}

/// Seeded pass-rate simulation; writes the number of passing instructions.
///
/// # Safety
/// `out_passed` is valid.
#[no_mangle]
pub unsafe extern "C" fn dl_run_ablation(
    n_instructions: usize,
    first_attempt_success_rate: f64,
    repair_success_rate: f64,
    seed: u64,
    mode: DlAblationMode,
    max_attempts: u32,
    out_passed: *mut usize,
) -> DlStatus {
    guard(|| {
        let out = out_ptr(out_passed)?;
        let scenario = AblationScenario {
            n_instructions,
            first_attempt_success_rate,
            repair_success_rate,
            seed,
            agents_mode: match mode {
                DlAblationMode::ProgrammerOnly => AblationMode::ProgrammerOnly,
                DlAblationMode::ProgrammerPlusInspector => AblationMode::ProgrammerPlusInspector,
            },
            max_attempts,
        };
        *out = eval::run_ablation(&scenario)?.passed;
        Ok(())
    })
}
