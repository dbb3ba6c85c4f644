use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;

const Q7: &str = "plasma <acts-on diluted >using (?<reagent> [entity=B-Reagent] [entity=I-Reagent]*)";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_procsearch"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A fixture corpus and its index inside a temp dir.
struct Workspace {
    _dir: tempfile::TempDir,
    corpus: PathBuf,
    index: PathBuf,
}

fn workspace(seed: u64, count: usize) -> Workspace {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    let index = dir.path().join("index");
    let o = run(&["gen-fixtures", "--seed", &seed.to_string(), "--count", &count.to_string(), "--out", p(&corpus)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = run(&["index", "--corpus", p(&corpus), "--out", p(&index)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    Workspace {
        _dir: dir,
        corpus,
        index,
    }
}

#[test]
fn gen_fixtures_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    let o = run(&["gen-fixtures", "--seed", "1", "--count", "300", "--out", p(&a)]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("wrote 300 procedures, "));
    run(&["gen-fixtures", "--seed", "1", "--count", "300", "--out", p(&b)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let o = run(&["validate", "--corpus", p(&a)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn empty_corpus_is_valid() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("empty.jsonl");
    let o = run(&["gen-fixtures", "--seed", "1", "--count", "0", "--out", p(&c)]);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read(&c).unwrap(), b"");
    assert_eq!(code(&run(&["validate", "--corpus", p(&c)])), 0);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&run(&["gen-fixtures", "--seed", "1", "--count", "5"])), 2);
    assert_eq!(code(&run(&["gen-fixtures", "--seed", "x", "--count", "5", "--out", "/tmp/x"])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&[])), 2);
}

#[test]
fn index_reports_bad_line_and_refuses_existing_dir() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    run(&["gen-fixtures", "--seed", "4", "--count", "12", "--out", p(&corpus)]);
    let text = std::fs::read_to_string(&corpus).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[6] = lines[6].replacen("\"label\":\"", "\"label\":\"bogus-", 1);
    std::fs::write(&corpus, lines.join("\n") + "\n").unwrap();

    let out = dir.path().join("idx");
    let o = run(&["index", "--corpus", p(&corpus), "--out", p(&out)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line 7"), "{}", stderr(&o));
    assert_eq!(code(&run(&["validate", "--corpus", p(&corpus)])), 1);

    lines[6] = text.lines().nth(6).unwrap().to_string();
    std::fs::write(&corpus, lines.join("\n") + "\n").unwrap();
    std::fs::create_dir(&out).unwrap();
    std::fs::write(out.join("keep"), "x").unwrap();
    let o = run(&["index", "--corpus", p(&corpus), "--out", p(&out)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("already exists"));
    assert_eq!(std::fs::read_to_string(out.join("keep")).unwrap(), "x");
}

#[test]
fn index_force_rebuilds() {
    let ws = workspace(5, 50);
    let o = run(&["index", "--corpus", p(&ws.corpus), "--out", p(&ws.index), "--force"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("50 procedures"));
    assert!(stdout(&o).contains("postings"));
}

#[test]
fn q7_query_matches_oracle_bytes() {
    let ws = workspace(1, 1000);
    let indexed = run(&["query", "--index", p(&ws.index), "--graph", Q7]);
    assert_eq!(code(&indexed), 0, "{}", stderr(&indexed));
    let oracle = run(&["query", "--index", p(&ws.index), "--graph", Q7, "--oracle", "--corpus", p(&ws.corpus)]);
    assert_eq!(code(&oracle), 0, "{}", stderr(&oracle));
    assert!(!indexed.stdout.is_empty());
    assert_eq!(indexed.stdout, oracle.stdout);
    for line in stdout(&indexed).lines() {
        let m: Value = serde_json::from_str(line).unwrap();
        assert!(m["captures"]["reagent"]["text"].is_string());
    }
    // byte-stable across runs
    assert_eq!(run(&["query", "--index", p(&ws.index), "--graph", Q7]).stdout, indexed.stdout);
}

#[test]
fn q1_slot_query_and_aggregation() {
    let ws = workspace(1, 1000);
    let slots = r#"{"reagent":"triphosgene","solvent":"?"}"#;
    let o = run(&["query", "--index", p(&ws.index), "--slots", slots]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let lines: Vec<Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(!lines.is_empty());
    assert!(lines.iter().all(|m| m["captures"]["solvent"]["text"].is_string()));

    let agg = run(&["query", "--index", p(&ws.index), "--slots", slots, "--agg", "solvent"]);
    assert_eq!(code(&agg), 0);
    let table: Value = serde_json::from_str(stdout(&agg).trim()).unwrap();
    assert_eq!(table["matches"], lines.len());
    let oracle = run(&[
        "query", "--slots", slots, "--agg", "solvent", "--oracle", "--corpus", p(&ws.corpus),
    ]);
    assert_eq!(oracle.stdout, agg.stdout);

    let sampled = run(&[
        "query", "--index", p(&ws.index), "--graph", Q7, "--agg", "reagent", "--sample", "50", "--seed", "9",
    ]);
    assert_eq!(code(&sampled), 0);
    let t: Value = serde_json::from_str(stdout(&sampled).trim()).unwrap();
    assert_eq!(t["sample"].as_array().unwrap().len(), t["distinct"].as_u64().unwrap().min(50) as usize);

    let pretty = run(&["query", "--index", p(&ws.index), "--slots", slots, "--agg", "solvent", "--pretty"]);
    let back: Value = serde_json::from_str(&stdout(&pretty)).unwrap();
    assert_eq!(back, table);
}

#[test]
fn query_errors() {
    let ws = workspace(2, 20);
    let o = run(&["query", "--index", p(&ws.index), "--graph", "(?<x ["]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("at byte"), "{}", stderr(&o));
    assert!(stderr(&o).contains('^'));
    assert_eq!(code(&run(&["query", "--index", p(&ws.index)])), 2);
    assert_eq!(code(&run(&["query", "--index", p(&ws.index), "--slots", "[1]"])), 2);
    assert_eq!(code(&run(&["query", "--index", p(&ws.index), "--slots", r#"{"catalyst":"?"}"#])), 2);
    assert_eq!(code(&run(&["query", "--index", p(&ws.index), "--graph", "DMF", "--agg", "nope"])), 2);
    assert_eq!(code(&run(&["query", "--index", p(&ws.index), "--graph", "DMF", "--sample", "3"])), 2);
    assert_eq!(code(&run(&["query", "--index", "/nonexistent/index", "--graph", "DMF"])), 1);
}

#[test]
fn regression_passes_on_fresh_fixtures() {
    let ws = workspace(1, 1000);
    let o = run(&["regression", "--index", p(&ws.index), "--corpus", p(&ws.corpus)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.lines().next().unwrap().contains("# Proc."));
    assert!(out.contains("# Ans."));
    for id in ["Q1", "Q5", "Q10"] {
        assert!(out.lines().any(|l| l.starts_with(id)), "{out}");
    }
    assert!(out.contains("random queries checked: 50, divergences: 0"));
}

#[test]
fn regression_reports_mismatch() {
    let ws = workspace(1, 200);
    let other = workspace(2, 200);
    let o = run(&["regression", "--index", p(&ws.index), "--corpus", p(&other.corpus)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("divergence on"));
    assert!(stderr(&o).contains("indexed:"));
}

#[test]
fn regression_on_empty_corpus_is_all_zero() {
    let ws = workspace(1, 0);
    let o = run(&["regression", "--index", p(&ws.index), "--corpus", p(&ws.corpus)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().filter(|l| l.starts_with('Q')).collect();
    assert_eq!(rows.len(), 10);
    for row in rows {
        let nums: Vec<&str> = row.split_whitespace().skip(1).take(3).collect();
        assert_eq!(nums, ["0", "0", "0"], "{row}");
    }
}

fn http_get(addr: &str, path: &str) -> String {
    let mut s = TcpStream::connect(addr).unwrap();
    write!(s, "GET {path} HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n").unwrap();
    let mut buf = String::new();
    s.read_to_string(&mut buf).unwrap();
    buf
}

#[cfg(unix)]
#[test]
fn serve_answers_and_stops_on_sigterm() {
    let ws = workspace(3, 30);
    let mut child = bin()
        .args(["serve", "--index", p(&ws.index), "--bind", "127.0.0.1:0"])
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on http://").unwrap().to_string();
    let resp = http_get(&addr, "/healthz");
    assert!(resp.starts_with("HTTP/1.1 200"));
    assert!(resp.ends_with("ok"));
    assert!(http_get(&addr, "/api/schema").contains("\"procedures\":30"));

    let status = Command::new("kill").args(["-TERM", &child.id().to_string()]).status().unwrap();
    assert!(status.success());
    assert_eq!(child.wait().unwrap().code(), Some(0));
}

#[test]
fn serve_startup_failures() {
    let o = run(&["serve", "--index", "/nonexistent/index", "--bind", "127.0.0.1:0"]);
    assert_eq!(code(&o), 1);
    let ws = workspace(3, 5);
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = taken.local_addr().unwrap().to_string();
    let o = run(&["serve", "--index", p(&ws.index), "--bind", &addr]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("binding"));
}
