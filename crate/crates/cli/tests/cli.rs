use std::path::Path;
use std::process::{Command, Output};

fn newsrank(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_newsrank"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = newsrank(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn help_lists_subcommands() {
    let help = ok(&["--help"]);
    for cmd in ["synth", "ingest", "series", "train", "evaluate", "serve"] {
        assert!(help.contains(cmd), "missing {cmd} in help");
    }
}

#[test]
fn synth_to_report() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    let store = dir.path().join("store");
    ok(&["synth", "--n", "600", "--span-days", "5", "--seed", "3", "--query-duplicates", "2", "--far-future", "1", "--out", p(&raw)]);
    assert!(raw.join("anomalies.json").exists());

    let stats: serde_json::Value = serde_json::from_str(&ok(&[
        "ingest",
        "--articles",
        p(&raw.join("articles.jsonl")),
        "--tweets",
        p(&raw.join("tweets.jsonl")),
        "--matchings",
        p(&raw.join("matchings.jsonl")),
        "--out",
        p(&store),
    ]))
    .unwrap();
    assert_eq!(stats["merged_away"], 2);
    assert_eq!(stats["out_of_window"], 1);
    assert_eq!(stats["articles"], 600);

    let hist: serde_json::Value = serde_json::from_str(&ok(&["series", "--store", p(&store), "--min-mentions", "1"])).unwrap();
    assert!(hist.as_object().is_some_and(|h| !h.is_empty()));

    let baseline = dir.path().join("baseline.json");
    let ar = dir.path().join("ar.json");
    ok(&["train", "--model", "baseline", "--store", p(&store), "--out", p(&baseline)]);
    ok(&["train", "--model", "linear-ar", "--order", "3", "--store", p(&store), "--out", p(&ar), "--seed", "1"]);

    let report_path = dir.path().join("report.json");
    ok(&[
        "evaluate", "--model", p(&baseline), "--model", p(&ar), "--store", p(&store), "--k", "10", "--bootstrap", "20",
        "--size", "40", "--start-times", "5,10", "--out", p(&report_path),
    ]);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(&report_path).unwrap()).unwrap();
    let names: Vec<&str> = report["models"].as_array().unwrap().iter().map(|m| m["model"].as_str().unwrap()).collect();
    assert_eq!(names, ["baseline(3)", "linear_ar(3)"]);
    assert_eq!(report["models"][0]["results"].as_array().unwrap().len(), 2);
}

#[test]
fn missing_store_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = newsrank(&["train", "--model", "rf", "--store", p(&dir.path().join("nope")), "--out", p(&dir.path().join("m.json"))]);
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
}

#[test]
fn unknown_model_kind_is_rejected() {
    let out = newsrank(&["train", "--model", "lstm", "--store", "s", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(2));
}
