use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use netlock::netlist::parse_bench;
use netlock::rewrite::{builtin_rules, replay, RewriteLog};
use netlock::sim::{bind_key, check_equivalence, check_equivalence_keyed};

const C17: &str = include_str!("../../core/circuits/c17.bench");

fn netlock(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netlock"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c17.bench"), C17).unwrap();
    dir
}

#[test]
fn lock_is_deterministic_and_sound() {
    let dir = setup();
    let p = dir.path();
    let args = ["lock", "--in", "c17.bench", "--bits", "4", "--heuristic", "rnd", "--seed", "1"];
    ok(&netlock(p, &[&args[..], &["--out", "a.bench"]].concat()));
    ok(&netlock(p, &[&args[..], &["--out", "b.bench", "--keys", "a.bench.keys.json.2"]].concat()));
    let a = fs::read_to_string(p.join("a.bench")).unwrap();
    let b = fs::read_to_string(p.join("b.bench")).unwrap();
    // Only the output path in the embedded config differs.
    assert_eq!(a.replace("a.bench", "b.bench"), b.replace("\"keys\":\"a.bench.keys.json.2\"", "\"keys\":null"));

    let locked = parse_bench(&a).unwrap();
    assert_eq!(locked.key_inputs().len(), 4);
    let keys = json(&p.join("a.bench.keys.json"));
    assert_eq!(keys["tool_version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(keys["config"]["seed"], 1);
    assert_eq!(keys["records"].as_array().unwrap().len(), 4);
    let key = netlock::lock::parse_key(keys["key"].as_str().unwrap()).unwrap();
    let original = parse_bench(C17).unwrap();
    assert!(check_equivalence(&original, &bind_key(&locked, &key).unwrap(), 1000).unwrap().equivalent);
}

#[test]
fn exit_codes() {
    let dir = setup();
    let p = dir.path();
    let r = netlock(p, &["lock", "--in", "c17.bench", "--out", "x.bench", "--bits", "9999"]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("insufficient"));
    assert_eq!(netlock(p, &["lock", "--in", "c17.bench", "--bits", "2"]).status.code(), Some(1));
    assert_eq!(netlock(p, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(netlock(p, &["lock", "--in", "missing.bench", "--out", "x", "--bits", "2"]).status.code(), Some(2));
    fs::write(p.join("bad.bench"), "INPUT(a)\nOUTPUT(y)\ny = FOO(a)\n").unwrap();
    assert_eq!(netlock(p, &["resynth", "--in", "bad.bench", "--out", "x"]).status.code(), Some(2));
    assert_eq!(netlock(p, &["--help"]).status.code(), Some(0));
}

#[test]
fn resynth_idempotent_and_replayable() {
    let dir = setup();
    let p = dir.path();
    fs::write(p.join("alu8.bench"), include_str!("../../core/circuits/alu8.bench")).unwrap();
    ok(&netlock(p, &["lock", "--in", "alu8.bench", "--out", "l.bench", "--bits", "12", "--seed", "3"]));
    ok(&netlock(p, &["resynth", "--in", "l.bench", "--out", "r.bench"]));
    ok(&netlock(p, &["resynth", "--in", "r.bench", "--out", "r2.bench"]));

    let locked = parse_bench(&fs::read_to_string(p.join("l.bench")).unwrap()).unwrap();
    let out = parse_bench(&fs::read_to_string(p.join("r.bench")).unwrap()).unwrap();
    let log = RewriteLog::read_jsonl(fs::read(p.join("r.bench.log.jsonl")).unwrap().as_slice()).unwrap();
    assert!(!log.is_empty());
    assert_eq!(replay(&locked, &log, &builtin_rules()).unwrap(), out);
    assert!(check_equivalence_keyed(&locked, &out, 10_000).unwrap().equivalent);

    let again = RewriteLog::read_jsonl(fs::read(p.join("r2.bench.log.jsonl")).unwrap().as_slice()).unwrap();
    assert!(again.is_empty());
}

#[test]
fn staged_pipeline() {
    let dir = setup();
    let p = dir.path();
    fs::write(p.join("sec32.bench"), include_str!("../../core/circuits/sec32.bench")).unwrap();
    ok(&netlock(p, &["lock", "--in", "sec32.bench", "--out", "l.bench", "--bits", "8"]));
    ok(&netlock(p, &["resynth", "--in", "l.bench", "--out", "v.bench"]));
    ok(&netlock(p, &["dataset", "--in", "v.bench", "--out", "d.jsonl", "--instances", "2"]));
    let text = fs::read_to_string(p.join("d.jsonl")).unwrap();
    assert!(text.starts_with("# netlock "));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 16);
    ok(&netlock(p, &["train", "--dataset", "d.jsonl", "--out", "m.json", "--trees", "10", "--epochs", "20"]));
    let m = json(&p.join("m.json"));
    assert_eq!(m["config"]["forest"]["trees"], 10);
    assert_eq!(m["models"]["ensemble"]["members"].as_object().unwrap().len(), 8);
    ok(&netlock(p, &["attack", "--in", "v.bench", "--models", "m.json", "--out", "atk", "--boost"]));
    let a = json(&p.join("atk/attack.json"));
    let runs = a["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 1);
    assert_eq!(runs[0]["key"].as_str().unwrap().len(), 8);
    assert!(runs[0]["results"][0].get("diff").is_none());
    assert!(fs::read_to_string(p.join("atk/overlay.dot")).unwrap().starts_with("digraph"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = setup();
    let p = dir.path();
    fs::write(p.join("run.toml"), "seed = 5\nheuristics = [\"cs\"]\n[forest]\ntrees = 7\n").unwrap();
    ok(&netlock(p, &["--config", "run.toml", "lock", "--in", "c17.bench", "--out", "l.bench", "--bits", "2", "--seed", "9"]));
    let keys = json(&p.join("l.bench.keys.json"));
    assert_eq!(keys["config"]["seed"], 9);
    assert_eq!(keys["config"]["heuristics"][0], "cs");
    assert_eq!(keys["config"]["forest"]["trees"], 7);
    fs::write(p.join("bad.toml"), "sede = 5\n").unwrap();
    let r = netlock(p, &["--config", "bad.toml", "lock", "--in", "c17.bench", "--out", "l.bench", "--bits", "2"]);
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn attack_end_to_end_within_budget_and_worker_independent() {
    let dir = setup();
    let p = dir.path();
    fs::write(p.join("mult8.bench"), include_str!("../../core/circuits/mult8.bench")).unwrap();
    ok(&netlock(p, &["lock", "--in", "mult8.bench", "--out", "l.bench", "--bits", "32", "--seed", "2"]));
    ok(&netlock(p, &["resynth", "--in", "l.bench", "--out", "v.bench"]));
    let start = Instant::now();
    ok(&netlock(p, &["--workers", "1", "attack", "--in", "v.bench", "--out", "w1"]));
    assert!(start.elapsed() < Duration::from_secs(300));
    ok(&netlock(p, &["--workers", "2", "attack", "--in", "v.bench", "--out", "w2"]));
    let a = json(&p.join("w1/attack.json"));
    let b = json(&p.join("w2/attack.json"));
    assert_eq!(a["runs"], b["runs"]);
    assert_eq!(a["runs"].as_array().unwrap().len(), 2);
    assert_eq!(json(&p.join("w1/models.json"))["models"], json(&p.join("w2/models.json"))["models"]);
}

#[test]
fn key_ratio_sweep_report() {
    let dir = setup();
    let p = dir.path();
    let r = netlock(
        p,
        &[
            "attack", "--original", "add16", "--bits", "4", "--sweep", "key-ratio", "0.5,1,2,3",
            "--out", "ev", "--trees", "20", "--epochs", "30",
        ],
    );
    ok(&r);
    let report = json(&p.join("ev/report.json"));
    assert_eq!(report["schema"], "netlock-report/1");
    assert_eq!(report["config"]["key_ratios"].as_array().unwrap().len(), 4);
    let tables = report["tables"].as_array().unwrap();
    assert_eq!(tables.len(), 2);
    for t in tables {
        assert_eq!(t["rows"].as_array().unwrap().len(), 4);
    }
    let md = fs::read_to_string(p.join("ev/report.md")).unwrap();
    assert!(md.contains("### R by key ratio"));
    for k in ["0.5x", "1x", "2x", "3x"] {
        assert!(md.contains(k), "{k} missing");
    }
    let csv = fs::read_to_string(p.join("ev/report.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("circuit,anchors,ge0,ge1,ge2,r_metric,l1_rec")));

    ok(&netlock(p, &["report", "--in", "ev/report.json", "--out", "again.csv"]));
    let again = fs::read_to_string(p.join("again.csv")).unwrap();
    let rows = |s: &str| s.lines().filter(|l| !l.starts_with('#')).map(String::from).collect::<Vec<_>>();
    assert_eq!(rows(&again), rows(&csv));
    assert_eq!(netlock(p, &["report", "--in", "ev/report.json", "--format", "pdf"]).status.code(), Some(1));
}
