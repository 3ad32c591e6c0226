//! C ABI over the emkit library.
//!
//! Conventions:
//! - every fallible function returns an [`EmkitStatus`]; on failure the
//!   message is available from [`emkit_last_error_message`] on the same thread
//! - results come back through out-pointers, which are written only on success
//! - strings are NUL-terminated UTF-8; strings returned by the library are
//!   released with [`emkit_string_free`]
//! - handles are opaque and released with their own `*_free` function;
//!   passing NULL to a free function is a no-op
//! - panics never cross the boundary; they surface as `EMKIT_STATUS_INTERNAL`

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::time::Duration;

use emkit::corpus::{chunk_text, mask_pii, ChunkerConfig, CorpusError};
use emkit::embed::{EmbedError, HttpEmbedder, StubEmbedder, TextEmbedder};
use emkit::evalkit::{evaluate_run, EvalError};
use emkit::http::HttpSettings;
use emkit::jsonl::{read_jsonl, JsonlError};
use emkit::qagen::{load_qrels_tsv, QagenError};
use emkit::retrieval::{build_dense_index, dense_search, maxsim_score, read_trec_run, DenseIndex, RankedList, RetrievalError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmkitStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Provider = 5,
    Internal = 6,
}

/// A text embedder.
pub struct EmkitEmbedder {
    inner: Box<dyn TextEmbedder>,
}

/// An exact dense index over chunk vectors.
pub struct EmkitDenseIndex {
    inner: DenseIndex,
}

/// One ranked result list with NUL-terminated copies of the chunk ids.
pub struct EmkitRankedList {
    ids: Vec<CString>,
    scores: Vec<f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: EmkitStatus,
    message: String,
}

impl Failure {
    fn new(status: EmkitStatus, message: impl Into<String>) -> Self {
        Failure {
            status,
            message: message.into(),
        }
    }
}

impl From<EmbedError> for Failure {
    fn from(e: EmbedError) -> Self {
        let status = match e {
            EmbedError::Io { .. } => EmkitStatus::Io,
            EmbedError::InvalidConfig(_) | EmbedError::Malformed { .. } => EmkitStatus::InvalidArgument,
            _ => EmkitStatus::Provider,
        };
        Failure::new(status, e.to_string())
    }
}

impl From<RetrievalError> for Failure {
    fn from(e: RetrievalError) -> Self {
        match e {
            RetrievalError::Embed(inner) => inner.into(),
            RetrievalError::Io { .. } => Failure::new(EmkitStatus::Io, e.to_string()),
            _ => Failure::new(EmkitStatus::InvalidArgument, e.to_string()),
        }
    }
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        Failure::new(EmkitStatus::InvalidArgument, e.to_string())
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        Failure::new(EmkitStatus::InvalidArgument, e.to_string())
    }
}

impl From<QagenError> for Failure {
    fn from(e: QagenError) -> Self {
        let status = match e {
            QagenError::Io { .. } => EmkitStatus::Io,
            _ => EmkitStatus::InvalidArgument,
        };
        Failure::new(status, e.to_string())
    }
}

impl From<JsonlError> for Failure {
    fn from(e: JsonlError) -> Self {
        let status = match e {
            JsonlError::Io { .. } => EmkitStatus::Io,
            _ => EmkitStatus::InvalidArgument,
        };
        Failure::new(status, e.to_string())
    }
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Runs `f`, records any failure or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> EmkitStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EmkitStatus::Ok,
        Ok(Err(fail)) => {
            set_last_error(&fail.message);
            fail.status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .map(String::as_str)
                .or_else(|| panic.downcast_ref::<&str>().copied())
                .unwrap_or("panic");
            set_last_error(&format!("internal error: {msg}"));
            EmkitStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(EmkitStatus::NullPointer, format!("{name} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure::new(EmkitStatus::InvalidUtf8, format!("{name}: {e}")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure::new(EmkitStatus::NullPointer, format!("{name} is NULL")))
}

fn out_arg<T>(p: *mut T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(Failure::new(EmkitStatus::NullPointer, format!("{name} is NULL")));
    }
    Ok(())
}

fn to_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure::new(EmkitStatus::Internal, "result contains a NUL byte"))
}

/// Message for the most recent failure on this thread, or NULL if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn emkit_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn emkit_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be NULL or a pointer previously returned by this library and not
/// yet freed.
#[no_mangle]
pub unsafe extern "C" fn emkit_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Creates the deterministic offline embedder.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn emkit_embedder_stub_new(seed: u64, dims: usize, out: *mut *mut EmkitEmbedder) -> EmkitStatus {
    guard(|| {
        out_arg(out, "out")?;
        let e = StubEmbedder::new(seed, dims)?;
        *out = Box::into_raw(Box::new(EmkitEmbedder { inner: Box::new(e) }));
        Ok(())
    })
}

/// Creates an embedder that POSTs to `{base_url}/embed`. `model` may be NULL.
/// `timeout_ms` of 0 keeps the default timeout.
///
/// # Safety
/// String arguments must be NULL or valid NUL-terminated strings; `out` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn emkit_embedder_http_new(
    base_url: *const c_char,
    model: *const c_char,
    batch_size: usize,
    timeout_ms: u64,
    out: *mut *mut EmkitEmbedder,
) -> EmkitStatus {
    guard(|| {
        out_arg(out, "out")?;
        let url = str_arg(base_url, "base_url")?;
        let model = if model.is_null() { "" } else { str_arg(model, "model")? };
        let mut settings = HttpSettings::default();
        if timeout_ms > 0 {
            settings.timeout = Duration::from_millis(timeout_ms);
        }
        let e = HttpEmbedder::new(url, model, batch_size, None, settings)?;
        *out = Box::into_raw(Box::new(EmkitEmbedder { inner: Box::new(e) }));
        Ok(())
    })
}

/// Vector width of the embedder, or 0 for NULL.
///
/// # Safety
/// `embedder` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn emkit_embedder_dims(embedder: *const EmkitEmbedder) -> usize {
    embedder.as_ref().map_or(0, |e| e.inner.dims())
}

/// # Safety
/// `embedder` must be NULL or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn emkit_embedder_free(embedder: *mut EmkitEmbedder) {
    if !embedder.is_null() {
        drop(Box::from_raw(embedder));
    }
}

/// Embeds every chunk of a chunks JSONL file into a new index.
///
/// # Safety
/// `chunks_path` must be a valid string, `embedder` a live handle and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn emkit_dense_index_build(
    chunks_path: *const c_char,
    embedder: *const EmkitEmbedder,
    out: *mut *mut EmkitDenseIndex,
) -> EmkitStatus {
    guard(|| {
        out_arg(out, "out")?;
        let path = str_arg(chunks_path, "chunks_path")?;
        let embedder = ref_arg(embedder, "embedder")?;
        let chunks = read_jsonl(Path::new(path))?;
        let index = build_dense_index(&chunks, embedder.inner.as_ref())?;
        *out = Box::into_raw(Box::new(EmkitDenseIndex { inner: index }));
        Ok(())
    })
}

/// Loads an index written by [`emkit_dense_index_save`] or `emkit index build`.
///
/// # Safety
/// `path` must be a valid string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn emkit_dense_index_load(path: *const c_char, out: *mut *mut EmkitDenseIndex) -> EmkitStatus {
    guard(|| {
        out_arg(out, "out")?;
        let path = str_arg(path, "path")?;
        let index = DenseIndex::load(Path::new(path))?;
        *out = Box::into_raw(Box::new(EmkitDenseIndex { inner: index }));
        Ok(())
    })
}

/// # Safety
/// `index` must be a live handle and `path` a valid string.
#[no_mangle]
pub unsafe extern "C" fn emkit_dense_index_save(index: *const EmkitDenseIndex, path: *const c_char) -> EmkitStatus {
    guard(|| {
        let index = ref_arg(index, "index")?;
        let path = str_arg(path, "path")?;
        index.inner.save(Path::new(path))?;
        Ok(())
    })
}

/// Number of indexed chunks, or 0 for NULL.
///
/// # Safety
/// `index` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn emkit_dense_index_len(index: *const EmkitDenseIndex) -> usize {
    index.as_ref().map_or(0, |i| i.inner.len())
}

/// # Safety
/// `index` must be NULL or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn emkit_dense_index_free(index: *mut EmkitDenseIndex) {
    if !index.is_null() {
        drop(Box::from_raw(index));
    }
}

/// Exact top-`k` cosine search. Ties are broken by ascending chunk id.
///
/// # Safety
/// Handles must be live, `query` a valid string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn emkit_dense_search(
    index: *const EmkitDenseIndex,
    embedder: *const EmkitEmbedder,
    query: *const c_char,
    k: usize,
    out: *mut *mut EmkitRankedList,
) -> EmkitStatus {
    guard(|| {
        out_arg(out, "out")?;
        let index = ref_arg(index, "index")?;
        let embedder = ref_arg(embedder, "embedder")?;
        let query = str_arg(query, "query")?;
        let list = dense_search(&index.inner, "q", query, embedder.inner.as_ref(), k, "ffi")?;
        *out = Box::into_raw(Box::new(ranked_to_ffi(&list)?));
        Ok(())
    })
}

fn ranked_to_ffi(list: &RankedList) -> Result<EmkitRankedList, Failure> {
    let ids = list
        .entries
        .iter()
        .map(|e| CString::new(e.chunk_id.as_str()).map_err(|_| Failure::new(EmkitStatus::Internal, "chunk id contains NUL")))
        .collect::<Result<_, _>>()?;
    Ok(EmkitRankedList {
        ids,
        scores: list.entries.iter().map(|e| e.score).collect(),
    })
}

/// Number of results, or 0 for NULL.
///
/// # Safety
/// `list` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn emkit_ranked_list_len(list: *const EmkitRankedList) -> usize {
    list.as_ref().map_or(0, |l| l.ids.len())
}

/// Reads result `i` (0 = best). `chunk_id` borrows from the list and stays
/// valid until the list is freed. Either out-pointer may be NULL.
///
/// # Safety
/// `list` must be a live handle; non-NULL out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn emkit_ranked_list_get(
    list: *const EmkitRankedList,
    i: usize,
    chunk_id: *mut *const c_char,
    score: *mut f64,
) -> EmkitStatus {
    guard(|| {
        let list = ref_arg(list, "list")?;
        if i >= list.ids.len() {
            return Err(Failure::new(
                EmkitStatus::InvalidArgument,
                format!("index {i} out of range for {} results", list.ids.len()),
            ));
        }
        if !chunk_id.is_null() {
            *chunk_id = list.ids[i].as_ptr();
        }
        if !score.is_null() {
            *score = list.scores[i];
        }
        Ok(())
    })
}

/// # Safety
/// `list` must be NULL or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn emkit_ranked_list_free(list: *mut EmkitRankedList) {
    if !list.is_null() {
        drop(Box::from_raw(list));
    }
}

/// Chunks `text` and writes the chunks as a JSON array.
///
/// # Safety
/// `doc_id` and `text` must be valid strings and `out_json` writable. Free
/// the result with [`emkit_string_free`].
#[no_mangle]
pub unsafe extern "C" fn emkit_chunk_text_json(
    doc_id: *const c_char,
    text: *const c_char,
    max_tokens: usize,
    overlap_tokens: usize,
    out_json: *mut *mut c_char,
) -> EmkitStatus {
    guard(|| {
        out_arg(out_json, "out_json")?;
        let doc_id = str_arg(doc_id, "doc_id")?;
        let text = str_arg(text, "text")?;
        let chunks = chunk_text(doc_id, text, &ChunkerConfig::new(max_tokens, overlap_tokens))?;
        let json = serde_json::to_string(&chunks).map_err(|e| Failure::new(EmkitStatus::Internal, e.to_string()))?;
        *out_json = to_c_string(json)?;
        Ok(())
    })
}

/// Masks PII in `text`; the output has the same byte length as the input.
/// `names` is an array of `n_names` dictionary surfaces and may be NULL when
/// `n_names` is 0. `n_spans`, when non-NULL, receives the number of masked spans.
///
/// # Safety
/// Strings must be valid, `names` must hold `n_names` valid strings and
/// `out_masked` must be writable. Free the result with [`emkit_string_free`].
#[no_mangle]
pub unsafe extern "C" fn emkit_mask_pii(
    text: *const c_char,
    names: *const *const c_char,
    n_names: usize,
    out_masked: *mut *mut c_char,
    n_spans: *mut usize,
) -> EmkitStatus {
    guard(|| {
        out_arg(out_masked, "out_masked")?;
        let text = str_arg(text, "text")?;
        let mut dictionary = Vec::with_capacity(n_names);
        if n_names > 0 {
            if names.is_null() {
                return Err(Failure::new(EmkitStatus::NullPointer, "names is NULL"));
            }
            for i in 0..n_names {
                dictionary.push(str_arg(*names.add(i), "names[i]")?.to_string());
            }
        }
        let (masked, spans) = mask_pii(text, &dictionary);
        *out_masked = to_c_string(masked)?;
        if !n_spans.is_null() {
            *n_spans = spans.len();
        }
        Ok(())
    })
}

/// MaxSim of two row-major multivectors: for each query row, the best dot
/// product against any document row, summed. Inputs are used as given.
///
/// # Safety
/// `q` must hold `q_tokens * dims` floats and `d` `d_tokens * dims` floats;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn emkit_maxsim(
    q: *const f32,
    q_tokens: usize,
    d: *const f32,
    d_tokens: usize,
    dims: usize,
    out: *mut f64,
) -> EmkitStatus {
    guard(|| {
        out_arg(out, "out")?;
        if dims == 0 {
            return Err(Failure::new(EmkitStatus::InvalidArgument, "dims must be positive"));
        }
        let rows = |p: *const f32, n: usize, name: &str| -> Result<Vec<Vec<f32>>, Failure> {
            if n == 0 {
                return Ok(Vec::new());
            }
            if p.is_null() {
                return Err(Failure::new(EmkitStatus::NullPointer, format!("{name} is NULL")));
            }
            Ok(std::slice::from_raw_parts(p, n * dims).chunks(dims).map(<[f32]>::to_vec).collect())
        };
        let q = rows(q, q_tokens, "q")?;
        let d = rows(d, d_tokens, "d")?;
        *out = maxsim_score(&q, &d)?;
        Ok(())
    })
}

/// Scores a six-column TREC run file against a qrels file (three or four
/// columns) at the given cutoffs and writes the metric table as JSON.
///
/// # Safety
/// Paths must be valid strings, `ks` must hold `n_ks` values and `out_json`
/// must be writable. Free the result with [`emkit_string_free`].
#[no_mangle]
pub unsafe extern "C" fn emkit_evaluate_trec(
    run_path: *const c_char,
    qrels_path: *const c_char,
    ks: *const usize,
    n_ks: usize,
    out_json: *mut *mut c_char,
) -> EmkitStatus {
    guard(|| {
        out_arg(out_json, "out_json")?;
        let run_path = str_arg(run_path, "run_path")?;
        let qrels_path = str_arg(qrels_path, "qrels_path")?;
        if ks.is_null() || n_ks == 0 {
            return Err(Failure::new(EmkitStatus::InvalidArgument, "at least one k is required"));
        }
        let ks = std::slice::from_raw_parts(ks, n_ks);
        let runs = read_trec_run(Path::new(run_path))?;
        let qrels = load_qrels_tsv(Path::new(qrels_path))?;
        let table = evaluate_run(&runs, &qrels, ks)?;
        let json = serde_json::to_string(&table).map_err(|e| Failure::new(EmkitStatus::Internal, e.to_string()))?;
        *out_json = to_c_string(json)?;
        Ok(())
    })
}
