//! C ABI over the specbench engine.
//!
//! Handles are opaque and owned by the caller once returned; each has a
//! matching `*_free`. Every function returns an [`SbStatus`]; on failure
//! [`sb_last_error_message`] describes the error for the calling thread.
//! Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use specbench::chem::{mces_smiles, McesConfig};
use specbench::metrics::{
    roc_auc, tally_metrics, welch_t_test_one_tailed, Alternative, IdentificationTally, LabeledScore,
};
use specbench::similarity::{modified_cosine, CosineConfig, Tolerance};
use specbench::{
    io, Error, IndexConfig, Peak, Polarity, ReferenceLibrary, RetrievalResult, SearchIndex,
    Spectrum,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Io = 4,
    Invalid = 5,
    Capacity = 6,
    Panic = 7,
}

/// Opaque reference library.
pub struct SbLibrary(ReferenceLibrary);

/// Opaque search index. Keeps its own copy of the library.
pub struct SbIndex {
    index: SearchIndex,
}

/// Opaque batch of search results.
pub struct SbResults {
    results: Vec<RetrievalResult>,
    failed: Vec<bool>,
    query_ids: Vec<CString>,
    keys: Vec<Vec<CString>>,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SbHit {
    pub score: f64,
    /// Owned by the results handle; valid until it is freed.
    pub analyte_key: *const c_char,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SbTallyMetrics {
    pub precision: f64,
    pub true_hit_rate: f64,
    pub f1: f64,
    pub degenerate: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SbWelchResult {
    pub t: f64,
    pub dof: f64,
    pub p: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbAlternative {
    AGreater = 0,
    BGreater = 1,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Fail(SbStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => SbStatus::Io,
            Error::Capacity { .. } => SbStatus::Capacity,
            Error::Mgf { .. }
            | Error::Manifest { .. }
            | Error::Smiles { .. }
            | Error::Json(_)
            | Error::Csv(_)
            | Error::EmbeddingFormat(_)
            | Error::InvalidInchiKey(_) => SbStatus::Parse,
            _ => SbStatus::Invalid,
        };
        Fail(status, e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(SbStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SbStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {msg}"));
            SbStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(SbStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Message for the last failed call on this thread; empty after a
/// success. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn sb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a JSONL library manifest from `path`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn sb_library_load_manifest(
    path: *const c_char,
    out: *mut *mut SbLibrary,
) -> SbStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let lib = io::read_library(str_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(SbLibrary(lib)));
        Ok(())
    })
}

/// Parses a JSONL library manifest held in memory.
///
/// # Safety
/// `data` must point to `len` readable bytes; `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn sb_library_parse_manifest(
    data: *const u8,
    len: usize,
    out: *mut *mut SbLibrary,
) -> SbStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let lib = io::parse_library_manifest(slice_arg(data, len, "data")?)?;
        *out = Box::into_raw(Box::new(SbLibrary(lib)));
        Ok(())
    })
}

/// # Safety
/// `lib` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sb_library_n_analytes(lib: *const SbLibrary) -> usize {
    lib.as_ref().map_or(0, |l| l.0.n_analytes())
}

/// # Safety
/// `lib` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sb_library_n_spectra(lib: *const SbLibrary) -> usize {
    lib.as_ref().map_or(0, |l| l.0.n_spectra())
}

/// # Safety
/// `lib` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sb_library_free(lib: *mut SbLibrary) {
    if !lib.is_null() {
        drop(Box::from_raw(lib));
    }
}

/// Builds a modified-cosine index. `fragment_tol` is in Th.
///
/// # Safety
/// `lib` must be a live library handle; `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn sb_index_build(
    lib: *const SbLibrary,
    ppm_tol: f64,
    top_k: usize,
    fragment_tol: f64,
    out: *mut *mut SbIndex,
) -> SbStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let lib = lib.as_ref().ok_or_else(|| null("lib"))?;
        let cfg = IndexConfig {
            ppm_tol,
            top_k,
            scorer: specbench::retrieval::ScorerConfig::ModifiedCosine(CosineConfig {
                tolerance: Tolerance::Absolute(fragment_tol),
                ..CosineConfig::default()
            }),
            ..IndexConfig::default()
        };
        let index = SearchIndex::build(&lib.0, cfg, None)?;
        *out = Box::into_raw(Box::new(SbIndex { index }));
        Ok(())
    })
}

/// # Safety
/// `index` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sb_index_free(index: *mut SbIndex) {
    if !index.is_null() {
        drop(Box::from_raw(index));
    }
}

/// Searches every spectrum of an in-memory MGF document. Queries that
/// cannot be scored yield no hits and are flagged as failed.
///
/// # Safety
/// `index` must be a live handle; `mgf` must point to `len` readable bytes;
/// `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn sb_index_search_mgf(
    index: *const SbIndex,
    mgf: *const u8,
    len: usize,
    out: *mut *mut SbResults,
) -> SbStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let index = index.as_ref().ok_or_else(|| null("index"))?;
        let queries = io::parse_mgf(slice_arg(mgf, len, "mgf")?)?;
        let mut results = Vec::with_capacity(queries.len());
        let mut failed = Vec::with_capacity(queries.len());
        for (q, r) in queries.iter().zip(index.index.batch_search(&queries, None)) {
            failed.push(r.is_err());
            results.push(r.unwrap_or_else(|_| RetrievalResult {
                query_id: q.id.clone(),
                hits: Vec::new(),
                candidate_count: 0,
            }));
        }
        let cstr = |s: &str| CString::new(s.replace('\0', " ")).unwrap_or_default();
        let query_ids = results.iter().map(|r| cstr(&r.query_id)).collect();
        let keys = results
            .iter()
            .map(|r| r.hits.iter().map(|h| cstr(&h.analyte_key)).collect())
            .collect();
        *out = Box::into_raw(Box::new(SbResults {
            results,
            failed,
            query_ids,
            keys,
        }));
        Ok(())
    })
}

/// # Safety
/// `res` must be null or a live results handle.
#[no_mangle]
pub unsafe extern "C" fn sb_results_query_count(res: *const SbResults) -> usize {
    res.as_ref().map_or(0, |r| r.results.len())
}

/// Query id, or null when out of range. Owned by `res`.
///
/// # Safety
/// `res` must be null or a live results handle.
#[no_mangle]
pub unsafe extern "C" fn sb_results_query_id(res: *const SbResults, query: usize) -> *const c_char {
    res.as_ref()
        .and_then(|r| r.query_ids.get(query))
        .map_or(ptr::null(), |s| s.as_ptr())
}

/// # Safety
/// `res` must be null or a live results handle.
#[no_mangle]
pub unsafe extern "C" fn sb_results_query_failed(res: *const SbResults, query: usize) -> bool {
    res.as_ref()
        .and_then(|r| r.failed.get(query).copied())
        .unwrap_or(false)
}

/// # Safety
/// `res` must be null or a live results handle.
#[no_mangle]
pub unsafe extern "C" fn sb_results_hit_count(res: *const SbResults, query: usize) -> usize {
    res.as_ref()
        .and_then(|r| r.results.get(query))
        .map_or(0, |r| r.hits.len())
}

/// Hit at zero-based `rank` of `query`.
///
/// # Safety
/// `res` must be a live results handle; `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn sb_results_hit(
    res: *const SbResults,
    query: usize,
    rank: usize,
    out: *mut SbHit,
) -> SbStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let res = res.as_ref().ok_or_else(|| null("res"))?;
        let range = || {
            Fail(
                SbStatus::Invalid,
                format!("no hit {rank} for query {query}"),
            )
        };
        let hit = res
            .results
            .get(query)
            .and_then(|r| r.hits.get(rank))
            .ok_or_else(range)?;
        *out = SbHit {
            score: hit.score,
            analyte_key: res.keys[query][rank].as_ptr(),
        };
        Ok(())
    })
}

/// # Safety
/// `res` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sb_results_free(res: *mut SbResults) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

unsafe fn spectrum_arg(
    id: &str,
    precursor: f64,
    mz: *const f64,
    intensity: *const f64,
    n: usize,
) -> Result<Spectrum, Fail> {
    let mz = slice_arg(mz, n, "mz")?;
    let it = slice_arg(intensity, n, "intensity")?;
    let peaks = mz.iter().zip(it).map(|(&m, &i)| Peak::new(m, i)).collect();
    Ok(Spectrum::new(id, precursor, Polarity::Unknown, peaks)?)
}

/// Modified cosine between two spectra given as parallel m/z and
/// intensity arrays. `fragment_tol` is in Th.
///
/// # Safety
/// Each array must hold its stated number of values; outputs must be
/// writable (`matched_out` may be null).
#[no_mangle]
pub unsafe extern "C" fn sb_modified_cosine(
    precursor_a: f64,
    mz_a: *const f64,
    intensity_a: *const f64,
    n_a: usize,
    precursor_b: f64,
    mz_b: *const f64,
    intensity_b: *const f64,
    n_b: usize,
    fragment_tol: f64,
    score_out: *mut f64,
    matched_out: *mut usize,
) -> SbStatus {
    guard(|| {
        let score_out = out_arg(score_out, "score_out")?;
        let a = spectrum_arg("a", precursor_a, mz_a, intensity_a, n_a)?;
        let b = spectrum_arg("b", precursor_b, mz_b, intensity_b, n_b)?;
        let cfg = CosineConfig {
            tolerance: Tolerance::Absolute(fragment_tol),
            ..CosineConfig::default()
        };
        let s = modified_cosine(&a, &b, &cfg)?;
        *score_out = s.score;
        if let Some(m) = matched_out.as_mut() {
            *m = s.n_matched;
        }
        Ok(())
    })
}

/// MCES distance between two SMILES. Above `threshold` the distance is a
/// lower bound and `exact_out` is false.
///
/// # Safety
/// Strings must be NUL-terminated; outputs writable (`exact_out` may be
/// null).
#[no_mangle]
pub unsafe extern "C" fn sb_mces_distance(
    smiles_a: *const c_char,
    smiles_b: *const c_char,
    threshold: usize,
    distance_out: *mut usize,
    exact_out: *mut bool,
) -> SbStatus {
    guard(|| {
        let d = out_arg(distance_out, "distance_out")?;
        let cfg = McesConfig {
            threshold,
            ..McesConfig::default()
        };
        let r = mces_smiles(
            str_arg(smiles_a, "smiles_a")?,
            str_arg(smiles_b, "smiles_b")?,
            &cfg,
        )?;
        *d = r.distance;
        if let Some(e) = exact_out.as_mut() {
            *e = r.exact;
        }
        Ok(())
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_tally_metrics(
    tp: usize,
    fp: usize,
    detectable: usize,
    out: *mut SbTallyMetrics,
) -> SbStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let m = tally_metrics(IdentificationTally { tp, fp, detectable });
        *out = SbTallyMetrics {
            precision: m.precision,
            true_hit_rate: m.true_hit_rate,
            f1: m.f1,
            degenerate: m.degenerate,
        };
        Ok(())
    })
}

/// AUC of scores with nonzero `labels` marking positives.
///
/// # Safety
/// `scores` and `labels` must hold `n` values; `auc_out` writable.
#[no_mangle]
pub unsafe extern "C" fn sb_roc_auc(
    scores: *const f64,
    labels: *const u8,
    n: usize,
    auc_out: *mut f64,
) -> SbStatus {
    guard(|| {
        let out = out_arg(auc_out, "auc_out")?;
        let s = slice_arg(scores, n, "scores")?;
        let l = slice_arg(labels, n, "labels")?;
        let scored: Vec<LabeledScore> = s
            .iter()
            .zip(l)
            .map(|(&x, &y)| LabeledScore::new(x, y != 0))
            .collect();
        *out = roc_auc(&scored)?.auc;
        Ok(())
    })
}

/// One-tailed Welch test.
///
/// # Safety
/// `a` and `b` must hold `n_a` and `n_b` values; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sb_welch_t_test(
    a: *const f64,
    n_a: usize,
    b: *const f64,
    n_b: usize,
    alternative: SbAlternative,
    out: *mut SbWelchResult,
) -> SbStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let alt = match alternative {
            SbAlternative::AGreater => Alternative::AGreater,
            SbAlternative::BGreater => Alternative::BGreater,
        };
        let w = welch_t_test_one_tailed(slice_arg(a, n_a, "a")?, slice_arg(b, n_b, "b")?, alt)?;
        *out = SbWelchResult {
            t: w.t,
            dof: w.dof,
            p: w.p,
        };
        Ok(())
    })
}
