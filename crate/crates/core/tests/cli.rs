use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini").join(name)
}

fn emkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emkit"))
        .args(args)
        .env_remove("EMKIT_CONFIG")
        .output()
        .expect("spawn emkit")
}

/// Exit code plus the parsed JSON error line from stderr.
fn failure(out: &Output) -> (i32, Value) {
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().expect("stderr line");
    (out.status.code().unwrap(), serde_json::from_str(line).expect(line))
}

fn table2() -> String {
    fixture("table2.toml").display().to_string()
}

#[test]
fn search_prints_rank_id_score_lines() {
    let out = emkit(&["--config", &table2(), "search", "--query", "how are card disputes handled", "--pipeline", "exp9", "-k", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 3);
    let mut prev = f64::INFINITY;
    for (i, l) in lines.iter().enumerate() {
        let cols: Vec<&str> = l.split('\t').collect();
        assert_eq!(cols.len(), 3, "{l}");
        assert_eq!(cols[0], (i + 1).to_string());
        assert!(cols[1].contains('#'), "{l}");
        let score: f64 = cols[2].parse().unwrap();
        assert!(score <= prev);
        prev = score;
    }
}

#[test]
fn histogram_counts_every_chunk() {
    let out = emkit(&["--config", &table2(), "histogram", "--bin-width", "16"]);
    assert!(out.status.success());
    let total: usize = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| l.split('\t').nth(1).unwrap().parse::<usize>().unwrap())
        .sum();
    let chunks = fs::read_to_string(fixture("chunks.jsonl")).unwrap();
    assert_eq!(total, chunks.lines().filter(|l| !l.trim().is_empty()).count());
}

#[test]
fn config_errors_carry_file_line_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "seed = 1\n\n[chunker]\nmax_tokens = 8\noverlap_tokens = 8\n").unwrap();
    let (code, err) = failure(&emkit(&["--config", cfg.to_str().unwrap(), "histogram"]));
    assert_eq!(code, 2);
    assert_eq!(err["error"], "config");
    assert_eq!(err["code"], 2);
    let msg = err["message"].as_str().unwrap();
    assert!(msg.contains("bad.toml:"), "{msg}");

    fs::write(&cfg, "seed = 1\nbogus_key = 3\n").unwrap();
    let (code, err) = failure(&emkit(&["--config", cfg.to_str().unwrap(), "histogram"]));
    assert_eq!(code, 2);
    assert!(err["message"].as_str().unwrap().contains("bad.toml:2:"), "{err}");
}

#[test]
fn unknown_pipeline_is_a_config_error() {
    let (code, err) = failure(&emkit(&["--config", &table2(), "search", "--query", "x", "--pipeline", "nope"]));
    assert_eq!(code, 2, "{err}");
}

#[test]
fn missing_input_is_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.jsonl");
    let (code, err) = failure(&emkit(&[
        "--out",
        out.to_str().unwrap(),
        "chunk",
        "--in",
        dir.path().join("absent.jsonl").to_str().unwrap(),
    ]));
    assert_eq!(code, 3);
    assert_eq!(err["error"], "input");
}

#[test]
fn malformed_jsonl_is_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("chunks.jsonl");
    fs::write(&bad, "{not json}\n").unwrap();
    let (code, _) = failure(&emkit(&["histogram", "--in", bad.to_str().unwrap()]));
    assert_eq!(code, 3);
}

#[test]
fn unreachable_provider_is_exit_4() {
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("remote.toml");
    fs::write(
        &cfg,
        format!(
            "[corpus]\nchunks = {:?}\n\n[providers.remote]\nrole = \"text\"\ntype = \"http\"\nbase_url = \"http://127.0.0.1:{port}\"\nretries = 0\ntimeout_secs = 2\n",
            fixture("chunks.jsonl").display().to_string()
        ),
    )
    .unwrap();
    let out = dir.path().join("remote.index");
    let (code, err) = failure(&emkit(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "index",
        "build",
        "--provider",
        "remote",
    ]));
    assert_eq!(code, 4, "{err}");
    assert_eq!(err["error"], "provider");
}

#[test]
fn index_build_then_search() {
    let dir = tempfile::tempdir().unwrap();
    let idx = dir.path().join("e5.index");
    let out = emkit(&["--config", &table2(), "--out", idx.to_str().unwrap(), "index", "build", "--provider", "e5_pretrained"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = emkit(&[
        "--config",
        &table2(),
        "index",
        "search",
        "--index",
        idx.to_str().unwrap(),
        "--provider",
        "e5_pretrained",
        "--query",
        "branch opening hours",
        "-k",
        "5",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 5);
}

#[test]
fn evaluate_pipeline_emits_metric_table() {
    let out = emkit(&["--config", &table2(), "evaluate", "--pipeline", "exp1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let text = v.to_string();
    assert!(text.contains("NDCG") || text.contains("ndcg"), "{text}");
}

#[test]
fn seed_flag_overrides_config() {
    let render = |seed: &str| {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("c.jsonl");
        let o = emkit(&[
            "--config",
            &table2(),
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
            "qgen",
            "generate",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(out).unwrap()
    };
    assert_eq!(render("1"), render("1"));
}
