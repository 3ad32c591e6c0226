use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::path::Path;
use std::ptr;

use emkit_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = emkit_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn take_string(p: *mut c_char) -> String {
    let s = CStr::from_ptr(p).to_str().unwrap().to_string();
    emkit_string_free(p);
    s
}

fn fixture_chunks() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures/mini/chunks.jsonl")
        .display()
        .to_string()
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(emkit_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn build_search_save_load() {
    unsafe {
        let mut emb = ptr::null_mut();
        assert_eq!(emkit_embedder_stub_new(7, 32, &mut emb), EmkitStatus::Ok);
        assert_eq!(emkit_embedder_dims(emb), 32);

        let mut idx = ptr::null_mut();
        let chunks = c(&fixture_chunks());
        assert_eq!(emkit_dense_index_build(chunks.as_ptr(), emb, &mut idx), EmkitStatus::Ok);
        assert!(emkit_dense_index_len(idx) >= 50);

        let q = c("how are card disputes handled");
        let mut list = ptr::null_mut();
        assert_eq!(emkit_dense_search(idx, emb, q.as_ptr(), 5, &mut list), EmkitStatus::Ok);
        assert_eq!(emkit_ranked_list_len(list), 5);
        let mut first = Vec::new();
        let mut prev = f64::INFINITY;
        for i in 0..5 {
            let mut id: *const c_char = ptr::null();
            let mut score = 0.0;
            assert_eq!(emkit_ranked_list_get(list, i, &mut id, &mut score), EmkitStatus::Ok);
            assert!(score <= prev);
            prev = score;
            first.push(CStr::from_ptr(id).to_str().unwrap().to_string());
        }
        assert_eq!(emkit_ranked_list_get(list, 5, ptr::null_mut(), ptr::null_mut()), EmkitStatus::InvalidArgument);
        assert!(last_error().contains("out of range"));

        let dir = tempfile::tempdir().unwrap();
        let path = c(&dir.path().join("x.index").display().to_string());
        assert_eq!(emkit_dense_index_save(idx, path.as_ptr()), EmkitStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(emkit_dense_index_load(path.as_ptr(), &mut loaded), EmkitStatus::Ok);
        let mut again = ptr::null_mut();
        assert_eq!(emkit_dense_search(loaded, emb, q.as_ptr(), 5, &mut again), EmkitStatus::Ok);
        for (i, want) in first.iter().enumerate() {
            let mut id: *const c_char = ptr::null();
            emkit_ranked_list_get(again, i, &mut id, ptr::null_mut());
            assert_eq!(CStr::from_ptr(id).to_str().unwrap(), want);
        }

        emkit_ranked_list_free(list);
        emkit_ranked_list_free(again);
        emkit_dense_index_free(idx);
        emkit_dense_index_free(loaded);
        emkit_embedder_free(emb);
    }
}

#[test]
fn error_codes() {
    unsafe {
        let mut emb = ptr::null_mut();
        assert_eq!(emkit_embedder_stub_new(1, 0, &mut emb), EmkitStatus::InvalidArgument);
        assert!(emb.is_null());
        assert_eq!(emkit_embedder_stub_new(1, 8, ptr::null_mut()), EmkitStatus::NullPointer);
        assert!(last_error().contains("out"));

        assert_eq!(emkit_embedder_stub_new(1, 8, &mut emb), EmkitStatus::Ok);
        let mut idx = ptr::null_mut();
        let missing = c("/nonexistent/chunks.jsonl");
        assert_eq!(emkit_dense_index_build(missing.as_ptr(), emb, &mut idx), EmkitStatus::Io);
        assert_eq!(emkit_dense_index_build(ptr::null(), emb, &mut idx), EmkitStatus::NullPointer);

        let bad = [0xffu8, 0xfe, 0];
        let mut out = ptr::null_mut();
        assert_eq!(
            emkit_chunk_text_json(bad.as_ptr().cast(), bad.as_ptr().cast(), 10, 2, &mut out),
            EmkitStatus::InvalidUtf8
        );

        let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let url = c(&format!("http://127.0.0.1:{port}"));
        let mut remote = ptr::null_mut();
        assert_eq!(emkit_embedder_http_new(url.as_ptr(), ptr::null(), 8, 500, &mut remote), EmkitStatus::Ok);
        let chunks = c(&fixture_chunks());
        assert_eq!(emkit_dense_index_build(chunks.as_ptr(), remote, &mut idx), EmkitStatus::Provider);
        emkit_embedder_free(remote);
        emkit_embedder_free(emb);

        // frees accept NULL
        emkit_embedder_free(ptr::null_mut());
        emkit_dense_index_free(ptr::null_mut());
        emkit_ranked_list_free(ptr::null_mut());
        emkit_string_free(ptr::null_mut());
    }
}

#[test]
fn chunk_and_mask() {
    unsafe {
        let text: String = (0..300).map(|i| format!("w{i} ")).collect();
        let (id, t) = (c("doc"), c(&text));
        let mut out = ptr::null_mut();
        assert_eq!(emkit_chunk_text_json(id.as_ptr(), t.as_ptr(), 100, 40, &mut out), EmkitStatus::Ok);
        let chunks: serde_json::Value = serde_json::from_str(&take_string(out)).unwrap();
        let chunks = chunks.as_array().unwrap();
        assert!(chunks.len() > 1);
        assert_eq!(chunks[0]["id"], "doc#0");
        assert_eq!(chunks[1]["overlap_prefix_tokens"], 40);
        assert_eq!(
            emkit_chunk_text_json(id.as_ptr(), t.as_ptr(), 10, 10, &mut out),
            EmkitStatus::InvalidArgument
        );

        let text = c("Mail Ada Byron at ada@example.org or call +1 415-555-0132.");
        let names = [c("Ada Byron")];
        let name_ptrs: Vec<*const c_char> = names.iter().map(|n| n.as_ptr()).collect();
        let mut spans = 0usize;
        assert_eq!(emkit_mask_pii(text.as_ptr(), name_ptrs.as_ptr(), 1, &mut out, &mut spans), EmkitStatus::Ok);
        let masked = take_string(out);
        assert_eq!(masked.len(), text.as_bytes().len());
        assert_eq!(spans, 3);
        assert!(!masked.contains("Ada") && !masked.contains("example.org") && !masked.contains("555"));
        assert_eq!(emkit_mask_pii(text.as_ptr(), ptr::null(), 2, &mut out, ptr::null_mut()), EmkitStatus::NullPointer);
    }
}

#[test]
fn maxsim_matches_hand_computation() {
    let q = [1.0f32, 0.0, 0.0, 1.0];
    let d = [0.5f32, 0.5, 0.0, 2.0, -1.0, 0.0];
    let mut out = 0.0;
    unsafe {
        assert_eq!(emkit_maxsim(q.as_ptr(), 2, d.as_ptr(), 3, 2, &mut out), EmkitStatus::Ok);
        assert_eq!(out, 0.5 + 2.0);
        assert_eq!(emkit_maxsim(q.as_ptr(), 2, d.as_ptr(), 3, 0, &mut out), EmkitStatus::InvalidArgument);
        assert_eq!(emkit_maxsim(ptr::null(), 2, d.as_ptr(), 3, 2, &mut out), EmkitStatus::NullPointer);
    }
}

#[test]
fn evaluate_trec_files() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run.trec");
    let qrels = dir.path().join("qrels.tsv");
    std::fs::write(&run, "q1 Q0 miss 1 0.9 sys\nq1 Q0 hit 2 0.8 sys\nq1 Q0 other 3 0.1 sys\n").unwrap();
    std::fs::write(&qrels, "q1\thit\t1\n").unwrap();
    let (r, q) = (c(&run.display().to_string()), c(&qrels.display().to_string()));
    let ks = [1usize, 3];
    let mut out = ptr::null_mut();
    unsafe {
        assert_eq!(emkit_evaluate_trec(r.as_ptr(), q.as_ptr(), ks.as_ptr(), 2, &mut out), EmkitStatus::Ok);
        let t: serde_json::Value = serde_json::from_str(&take_string(out)).unwrap();
        assert_eq!(t["map"][1], 0.5);
        assert_eq!(t["precision"][0], 0.0);
        assert!((t["ndcg"][1].as_f64().unwrap() - 0.6309).abs() < 1e-4);
        assert_eq!(emkit_evaluate_trec(r.as_ptr(), q.as_ptr(), ks.as_ptr(), 0, &mut out), EmkitStatus::InvalidArgument);
    }
}

#[test]
fn errors_are_per_thread() {
    unsafe {
        emkit_embedder_stub_new(1, 0, &mut ptr::null_mut());
    }
    let here = last_error();
    let other = std::thread::spawn(|| emkit_last_error_message().is_null()).join().unwrap();
    assert!(other);
    assert!(!here.is_empty());
}
