use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_intentrank"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("spawn intentrank")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A temp dir holding the demo assets under `demo/`.
fn demo_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["demo", "--dir", "demo"]);
    assert!(o.status.success(), "{}", stderr(&o));
    dir
}

fn demo_run(dir: &tempfile::TempDir, args: &[&str]) -> Output {
    run(&dir.path().join("demo"), args)
}

#[test]
fn demo_writes_assets_and_passes_its_suite() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["demo", "--dir", "demo"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("bvt: 10/10 passed"), "{out}");
    for f in ["engine.toml", "queries.jsonl", "judgments.jsonl", "bvt.jsonl", "tune.json", "corpus"] {
        assert!(dir.path().join("demo").join(f).exists(), "{f}");
    }
}

#[test]
fn search_is_deterministic() {
    let dir = demo_dir();
    let args = ["search", "avengers trailers", "--user", "alice", "--k", "4"];
    let a = demo_run(&dir, &args);
    let b = demo_run(&dir, &args);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let out = stdout(&a);
    let first = out.lines().find(|l| !l.starts_with('#')).unwrap();
    assert!(first.starts_with("1\tv_av_trailer1\t"), "{out}");
    assert_eq!(out.lines().filter(|l| !l.starts_with('#')).count(), 4);
}

#[test]
fn search_writes_out_and_trace() {
    let dir = demo_dir();
    let o = demo_run(
        &dir,
        &["search", "taylor swift", "--user", "alice", "--out", "res.txt", "--trace", "trace.jsonl"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
    let res = std::fs::read_to_string(dir.path().join("demo/res.txt")).unwrap();
    assert!(res.contains("pg_taylorswift"));
    let trace = std::fs::read_to_string(dir.path().join("demo/trace.jsonl")).unwrap();
    assert!(trace.lines().all(|l| serde_json::from_str::<serde_json::Value>(l).is_ok()));
    assert!(trace.contains("post_spam_ts"));
    assert!(!res.contains("post_spam_ts"));
}

#[test]
fn unknown_user_is_a_data_error() {
    let dir = demo_dir();
    let o = demo_run(&dir, &["search", "taylor swift", "--user", "nobody"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nobody"));
}

#[test]
fn missing_config_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["search", "x", "--user", "alice", "--config", "nowhere/engine.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nowhere/engine.toml"), "{}", stderr(&o));
}

#[test]
fn explain_reports_not_retrieved_and_filtered() {
    let dir = demo_dir();
    let o = demo_run(&dir, &["explain", "taylor swift", "--user", "alice", "--doc", "v_cooking"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("verdict: not retrieved"), "{}", stdout(&o));
    let o = demo_run(&dir, &["explain", "taylor swift", "--user", "alice", "--doc", "post_spam_ts"]);
    assert!(stdout(&o).contains("filtered: policy"), "{}", stdout(&o));
    let o = demo_run(&dir, &["explain", "taylor swift", "--user", "alice", "--doc", "pg_taylorswift"]);
    assert!(stdout(&o).contains("verdict: shown at rank"), "{}", stdout(&o));
}

#[test]
fn explain_unknown_doc_suggests_neighbours() {
    let dir = demo_dir();
    let o = demo_run(&dir, &["explain", "taylor swift", "--user", "alice", "--doc", "pg_taylorswif"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("pg_taylorswift"), "{}", stderr(&o));
}

#[test]
fn intents_show_publisher_capture() {
    let dir = demo_dir();
    let o = demo_run(&dir, &["intents", "avengers trailers", "--user", "alice"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("video_publisher="), "{out}");
    assert!(out.contains("capture: publisher=pg_avengers"), "{out}");
    assert!(out.contains("pattern: "), "{out}");
}

#[test]
fn bvt_passes_and_fails_with_distinct_codes() {
    let dir = demo_dir();
    let o = demo_run(&dir, &["bvt", "--suite", "bvt.jsonl", "--out", "report.jsonl"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = std::fs::read_to_string(dir.path().join("demo/report.jsonl")).unwrap();
    assert_eq!(report.lines().count(), 10);
    std::fs::write(
        dir.path().join("demo/bad.jsonl"),
        "{\"case_id\":\"never\",\"query_text\":\"taylor swift\",\"user_id\":\"alice\",\"expect\":[\"top1: id=v_cooking\"]}\n",
    )
    .unwrap();
    let o = demo_run(&dir, &["bvt", "--suite", "bad.jsonl"]);
    assert_eq!(o.status.code(), Some(2), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("0/1 passed"), "{}", stdout(&o));
}

#[test]
fn abtest_of_identical_arms_has_zero_deltas() {
    let dir = demo_dir();
    let o = demo_run(
        &dir,
        &["abtest", "--log", "queries.jsonl", "--judgments", "judgments.jsonl", "--suite", "bvt.jsonl", "--resamples", "200"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().filter(|l| !l.starts_with('#')).collect();
    assert!(!rows.is_empty());
    for row in rows {
        assert!(row.contains("delta=+0.0000"), "{row}");
    }
}

#[test]
fn tune_then_abtest_with_the_tuned_config() {
    let dir = demo_dir();
    let o = demo_run(
        &dir,
        &[
            "tune", "--spec", "tune.json", "--log", "queries.jsonl", "--judgments", "judgments.jsonl", "--suite",
            "bvt.jsonl", "--out", "best.json", "--trajectory", "traj.jsonl",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let best = std::fs::read_to_string(dir.path().join("demo/best.json")).unwrap();
    let again = demo_run(
        &dir,
        &["tune", "--spec", "tune.json", "--log", "queries.jsonl", "--judgments", "judgments.jsonl", "--suite", "bvt.jsonl"],
    );
    assert_eq!(stdout(&again), best);
    let o = demo_run(&dir, &["abtest", "--b", "best.json", "--log", "queries.jsonl", "--judgments", "judgments.jsonl"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = demo_run(&dir, &["search", "taylor swift", "--user", "alice", "--ranker", "best.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn train_writes_a_model() {
    let dir = demo_dir();
    let o = demo_run(&dir, &["train", "--log", "queries.jsonl", "--out", "model.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let model: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("demo/model.json")).unwrap()).unwrap();
    assert!(model["weights"].is_array(), "{model}");
}

#[test]
fn ingest_and_index() {
    let dir = demo_dir();
    let o = demo_run(&dir, &["ingest", "corpus"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["documents"], 23);
    let o = demo_run(&dir, &["index", "--out", "snap.idx", "--shards", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("demo/snap.idx").exists());
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["--help"]);
    assert_eq!(o.status.code(), Some(0));
    for cmd in ["ingest", "index", "search", "explain", "intents", "bvt", "tune", "abtest", "train", "serve", "demo"] {
        assert!(stdout(&o).contains(cmd), "{cmd}");
    }
    assert_eq!(run(dir.path(), &["--version"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["search", "x", "--user", "a", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["search", "x"]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["frobnicate"]).status.code(), Some(1));
    let demo = demo_dir();
    assert_eq!(demo_run(&demo, &["abtest", "--metrics", "bogus@3"]).status.code(), Some(1));
}
