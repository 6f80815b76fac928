use std::path::Path;
use std::process::{Command, Output};

fn quickstep(data: &Path, args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_quickstep"))
        .arg("--data")
        .arg(data)
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn a_day_from_the_command_line() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let ml = tmp.path().join("ml.txt");
    std::fs::write(&ml, "neural network gradient neural network gradient\n").unwrap();
    let db = tmp.path().join("db.txt");
    std::fs::write(&db, "relational query schema relational query schema\n").unwrap();

    quickstep(&data, &["init"]);
    quickstep(&data, &["add-user", "--user", "ann", "--group", "flat"]);
    for (topic, file, url) in [("machine-learning", &ml, "http://e.org/ml.pdf"), ("databases", &db, "http://e.org/db.pdf")] {
        let out = quickstep(&data, &["add-example", "--group", "flat", "--url", url, "--topic", topic, "--text", file.to_str().unwrap()]);
        assert!(stdout(&out).trim().starts_with('d'));
    }

    // The flat list grows; the ontology refuses without the override.
    let out = quickstep(&data, &["add-topic", "--group", "flat", "--label", "Semantic web"]);
    assert_eq!(stdout(&out).trim(), "semantic-web");
    let refused = Command::new(env!("CARGO_BIN_EXE_quickstep"))
        .args(["--data", data.to_str().unwrap(), "add-topic", "--group", "ontology", "--label", "Semantic web", "--parent", "information-systems"])
        .output()
        .unwrap();
    assert!(!refused.status.success());

    let log = tmp.path().join("browse.tsv");
    std::fs::write(&log, "2002-03-01T10:00:00Z\tann\thttp://e.org/ml.pdf\n2002-03-01T10:05:00Z\tann\thttp://e.org/index.html\n").unwrap();
    let out = quickstep(&data, &["ingest", log.to_str().unwrap()]);
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!((report["accepted"].as_u64(), report["filtered"].as_u64()), (Some(1), Some(1)));

    let out = quickstep(&data, &["run-cycle", "--phase", "nightly", "--as-of", "2002-03-02"]);
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["browsed_events"], 1);
    quickstep(&data, &["run-cycle", "--phase", "daily", "--as-of", "2002-03-02"]);

    let out = quickstep(&data, &["evaluate", "--until", "2002-03-02"]);
    assert!(stdout(&out).starts_with("date\tgroup\tmetric\tvalue\n"));
}

#[test]
fn simulate_writes_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("trial");
    let out = quickstep(tmp.path(), &["simulate", "--seed", "3", "--days", "4", "--pairs", "1", "--out", out_dir.to_str().unwrap()]);
    let text = stdout(&out);
    assert!(text.contains("good_topic_ratio"), "{text}");
    assert!(out_dir.join("metrics.tsv").exists());
}
