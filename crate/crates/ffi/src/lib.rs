//! C ABI over `digit_forensics`.
//!
//! Conventions shared by every function:
//!
//! * The return value is a [`DfStatus`]; results go through out-pointers, which are
//!   left untouched on failure.
//! * After a non-`DF_STATUS_OK` return, [`df_last_error_message`] describes the failure.
//!   The message is per thread and stays valid until the next call on that thread.
//! * Strings are NUL-terminated UTF-8. Arrays are `(pointer, length)` pairs; a null
//!   pointer is accepted only with length 0.
//! * Panics never cross the boundary; they surface as `DF_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use digit_forensics::benford::{empirical_first_digit_model, second_digit_model, standard_first_digit_model};
use digit_forensics::report::candidate_first_digits;
use digit_forensics::scatter_sim::parity_oracle_7a;
use digit_forensics::stat_tests::{self, CorrectionMethod};
use digit_forensics::vote_data::{self, VoteTable};
use digit_forensics::Error;

/// Outcome of a call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Io = 4,
    UnknownLabel = 5,
    Undefined = 6,
    Internal = 7,
}

/// Multiple-comparison correction.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DfCorrection {
    /// `min(m·p, 1)`
    Multiply = 0,
    /// `1 − (1 − p)^m`
    Sidak = 1,
}

/// Opaque per-area vote table.
pub struct DfVoteTable {
    inner: VoteTable,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(DfStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Parse { .. } | Error::RecordCountMismatch { .. } => DfStatus::Parse,
            Error::Io { .. } => DfStatus::Io,
            Error::UnknownLabel(_) => DfStatus::UnknownLabel,
            Error::InvalidArgument(_) => DfStatus::InvalidArgument,
            Error::Undefined(_) => DfStatus::Undefined,
            _ => DfStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(DfStatus::NullPointer, format!("`{what}` is null"))
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> DfStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_last_error("");
            DfStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            DfStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(DfStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn table_arg<'a>(p: *const DfVoteTable) -> Result<&'a VoteTable, Failure> {
    p.as_ref().map(|t| &t.inner).ok_or_else(|| null("table"))
}

/// Null `labels` means `A,R,K,M`.
unsafe fn labels_arg(p: *const c_char) -> Result<Vec<String>, Failure> {
    if p.is_null() {
        return Ok(vote_data::DEFAULT_LABELS.iter().map(|s| s.to_string()).collect());
    }
    Ok(str_arg(p, "labels")?.split(',').map(|s| s.trim().to_string()).collect())
}

fn store_table(out: *mut *mut DfVoteTable, table: VoteTable) -> Result<(), Failure> {
    // SAFETY: checked non-null by the callers
    unsafe { *out = Box::into_raw(Box::new(DfVoteTable { inner: table })) };
    Ok(())
}

/// Message for the last failed call on this thread; empty after a success. Never null.
#[no_mangle]
pub extern "C" fn df_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn df_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a table from in-memory sources. `labels` is a comma-separated list or null.
/// On success `*out` owns a table to release with [`df_vote_table_free`].
///
/// # Safety
/// String arguments must be valid NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_vote_table_parse(
    totals_text: *const c_char,
    cands_text: *const c_char,
    labels: *const c_char,
    out: *mut *mut DfVoteTable,
) -> DfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let totals = str_arg(totals_text, "totals_text")?;
        let cands = str_arg(cands_text, "cands_text")?;
        let labels = labels_arg(labels)?;
        let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
        store_table(
            out,
            vote_data::parse_vote_table(totals.as_bytes(), cands.as_bytes(), &refs)?,
        )
    })
}

/// Reads a table from two files; see [`df_vote_table_parse`].
///
/// # Safety
/// As for [`df_vote_table_parse`].
#[no_mangle]
pub unsafe extern "C" fn df_vote_table_load(
    totals_path: *const c_char,
    cands_path: *const c_char,
    labels: *const c_char,
    out: *mut *mut DfVoteTable,
) -> DfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let t = str_arg(totals_path, "totals_path")?;
        let c = str_arg(cands_path, "cands_path")?;
        let labels = labels_arg(labels)?;
        let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
        store_table(out, vote_data::load_vote_table(Path::new(t), Path::new(c), &refs)?)
    })
}

/// Releases a table. Null is a no-op.
///
/// # Safety
/// `table` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn df_vote_table_free(table: *mut DfVoteTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// # Safety
/// `table` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn df_vote_table_n_areas(table: *const DfVoteTable, out: *mut usize) -> DfStatus {
    guard(|| {
        *out_arg(out, "out")? = table_arg(table)?.len();
        Ok(())
    })
}

/// # Safety
/// `table` must be a live handle, `label` a valid string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn df_vote_table_national_sum(
    table: *const DfVoteTable,
    label: *const c_char,
    out: *mut u64,
) -> DfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = table_arg(table)?.national_sum(str_arg(label, "label")?)?;
        Ok(())
    })
}

/// # Safety
/// As for [`df_vote_table_national_sum`].
#[no_mangle]
pub unsafe extern "C" fn df_vote_table_global_fraction(
    table: *const DfVoteTable,
    label: *const c_char,
    out: *mut f64,
) -> DfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = vote_data::global_fraction(table_arg(table)?, str_arg(label, "label")?)?;
        Ok(())
    })
}

/// First-digit counts of a candidate's nonzero counts; `out[d]` is the count for digit `d`, `out[0]` is 0.
///
/// # Safety
/// `out` must point to 10 writable values.
#[no_mangle]
pub unsafe extern "C" fn df_vote_table_first_digit_counts(
    table: *const DfVoteTable,
    label: *const c_char,
    out: *mut u64,
) -> DfStatus {
    guard(|| {
        let table = table_arg(table)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let hist = candidate_first_digits(table, str_arg(label, "label")?)?;
        std::slice::from_raw_parts_mut(out, 10).copy_from_slice(&hist.counts);
        Ok(())
    })
}

unsafe fn write_pmf(out: *mut f64, pmf: &[f64; 10]) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    std::slice::from_raw_parts_mut(out, 10).copy_from_slice(pmf);
    Ok(())
}

/// Standard first-digit probabilities; `out[0]` is 0.
///
/// # Safety
/// `out` must point to 10 writable values.
#[no_mangle]
pub unsafe extern "C" fn df_standard_first_digit_pmf(out: *mut f64) -> DfStatus {
    guard(|| write_pmf(out, &standard_first_digit_model().pmf))
}

/// Second-digit probabilities for digits 0 to 9.
///
/// # Safety
/// `out` must point to 10 writable values.
#[no_mangle]
pub unsafe extern "C" fn df_second_digit_pmf(out: *mut f64) -> DfStatus {
    guard(|| write_pmf(out, &second_digit_model().pmf))
}

/// First-digit probabilities of the totals scaled by the candidate's national share.
///
/// # Safety
/// `table` must be a live handle and `out` point to 10 writable values.
#[no_mangle]
pub unsafe extern "C" fn df_empirical_first_digit_pmf(
    table: *const DfVoteTable,
    label: *const c_char,
    out: *mut f64,
) -> DfStatus {
    guard(|| {
        let table = table_arg(table)?;
        let alpha = vote_data::global_fraction(table, str_arg(label, "label")?)?;
        write_pmf(out, &empirical_first_digit_model(&table.totals(), alpha)?.pmf)
    })
}

/// `P(X > k)` for `X ~ Poisson(lambda)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_poisson_tail(k: u64, lambda: f64, out: *mut f64) -> DfStatus {
    guard(|| {
        *out_arg(out, "out")? = stat_tests::poisson_tail(k, lambda)?;
        Ok(())
    })
}

/// Upper tail of the chi-square distribution.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_chi_square_upper_tail(statistic: f64, dof: u32, out: *mut f64) -> DfStatus {
    guard(|| {
        *out_arg(out, "out")? = stat_tests::chi_square_upper_tail(statistic, dof)?;
        Ok(())
    })
}

/// Exact two-sample KS test; writes `D` and the two-sided p-value.
///
/// # Safety
/// `a` and `b` must hold `na` and `nb` values; `statistic` and `p_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_ks_two_sample_exact(
    a: *const f64,
    na: usize,
    b: *const f64,
    nb: usize,
    statistic: *mut f64,
    p_value: *mut f64,
) -> DfStatus {
    guard(|| {
        let r = stat_tests::ks_two_sample_exact(slice_arg(a, na, "a")?, slice_arg(b, nb, "b")?)?;
        let (s, p) = (out_arg(statistic, "statistic")?, out_arg(p_value, "p_value")?);
        *s = r.statistic;
        *p = r.p_value;
        Ok(())
    })
}

/// Spearman's ρ with average ranks; `normalized` is ρ over its null standard error.
///
/// # Safety
/// `x` and `y` must hold `n` values; the out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_spearman(
    x: *const f64,
    y: *const f64,
    n: usize,
    rho: *mut f64,
    normalized: *mut f64,
) -> DfStatus {
    guard(|| {
        let r = stat_tests::spearman_rho(slice_arg(x, n, "x")?, slice_arg(y, n, "y")?)?;
        let (a, b) = (out_arg(rho, "rho")?, out_arg(normalized, "normalized")?);
        *a = r.rho;
        *b = r.normalized;
        Ok(())
    })
}

/// Skewness of `log10` of positive values; `normalized` is γ₁ over `sqrt(6 / n)`.
///
/// # Safety
/// `values` must hold `n` values; the out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_log_skewness(
    values: *const f64,
    n: usize,
    gamma1: *mut f64,
    normalized: *mut f64,
) -> DfStatus {
    guard(|| {
        let r = stat_tests::log_skewness(slice_arg(values, n, "values")?)?;
        let (a, b) = (out_arg(gamma1, "gamma1")?, out_arg(normalized, "normalized")?);
        *a = r.gamma1;
        *b = r.normalized;
        Ok(())
    })
}

/// Corrects `p` for `m` tests.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_multi_test_correction(p: f64, m: u32, method: DfCorrection, out: *mut f64) -> DfStatus {
    guard(|| {
        if !(0.0..=1.0).contains(&p) || m == 0 {
            return Err(Failure(DfStatus::InvalidArgument, "need 0 <= p <= 1 and m >= 1".into()));
        }
        let method = match method {
            DfCorrection::Multiply => CorrectionMethod::Multiply,
            DfCorrection::Sidak => CorrectionMethod::Sidak,
        };
        *out_arg(out, "out")? = stat_tests::multi_test_correction(p, m, method);
        Ok(())
    })
}

/// Chance that `k` independent second digits are all equal.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_identical_second_digit_prob(k: u32, out: *mut f64) -> DfStatus {
    guard(|| {
        if k == 0 {
            return Err(Failure(DfStatus::InvalidArgument, "k must be at least 1".into()));
        }
        *out_arg(out, "out")? = stat_tests::identical_second_digit_prob(k);
        Ok(())
    })
}

/// Monte Carlo estimate that 20 log-uniform draws on [70, 80) hold each even value exactly once.
///
/// # Safety
/// `hits` and `p_hat` must be writable.
#[no_mangle]
pub unsafe extern "C" fn df_parity_oracle(trials: u64, seed: u64, hits: *mut u64, p_hat: *mut f64) -> DfStatus {
    guard(|| {
        let est = parity_oracle_7a(trials, seed)?;
        let (h, p) = (out_arg(hits, "hits")?, out_arg(p_hat, "p_hat")?);
        *h = est.hits;
        *p = est.p_hat;
        Ok(())
    })
}
