use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn knowsearch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_knowsearch"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = knowsearch(args);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn default_training_searches_on_unknown_questions() {
    let tmp = tempfile::tempdir().unwrap();
    let world = tmp.path().join("world");
    let run = tmp.path().join("run");
    ok(&[
        "gen-data",
        "--known",
        "200",
        "--unknown",
        "200",
        "--seed",
        "0",
        "--out",
        s(&world),
    ]);
    let summary = ok(&["train", "--world", s(&world), "--out", s(&run)]);
    assert!(summary.starts_with("trained 200 steps"), "{summary}");

    let metrics = ok(&[
        "eval",
        "--params",
        s(&run.join("params.json")),
        "--world",
        s(&world),
    ]);
    let m: serde_json::Value = serde_json::from_str(metrics.trim()).unwrap();
    for key in ["em", "mean_f1", "sr", "sr_known", "sr_unknown", "n"] {
        assert!(m.get(key).is_some(), "missing {key} in {metrics}");
    }
    assert_eq!(m["n"], 400);
    assert!(m["sr_unknown"].as_f64().unwrap() >= 0.9, "{metrics}");

    let curves = fs::read_to_string(run.join("curves.csv")).unwrap();
    assert!(curves.starts_with("step,mean_reward,mean_f1,sr_known,sr_unknown,weight_norm\n"));
    assert_eq!(curves.lines().count(), 201);
}

#[test]
fn gen_data_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        ok(&[
            "gen-data",
            "--known",
            "5",
            "--unknown",
            "7",
            "--seed",
            "9",
            "--out",
            s(dir),
        ]);
    }
    for file in [
        "dataset.jsonl",
        "corpus.jsonl",
        "knowledge.jsonl",
        "world.conf",
    ] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }
    let dataset = fs::read_to_string(a.join("dataset.jsonl")).unwrap();
    assert_eq!(dataset.lines().count(), 12);
}

#[test]
fn ingest_reports_stats_and_rejects_bad_corpora() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus.jsonl");
    fs::write(
        &corpus,
        "{\"id\":\"1\",\"title\":\"Owl\",\"text\":\"night bird\"}\n{\"id\":\"2\",\"title\":\"Fox\",\"text\":\"red\"}\n",
    )
    .unwrap();
    let stats = ok(&["ingest", "--corpus", s(&corpus)]);
    assert_eq!(stats, "documents: 2\navgdl: 2.5000\nterms: 5\n");

    fs::write(
        &corpus,
        "{\"id\":\"1\",\"title\":\"t\",\"text\":\"x\"}\n{oops\n",
    )
    .unwrap();
    assert_eq!(
        knowsearch(&["ingest", "--corpus", s(&corpus)])
            .status
            .code(),
        Some(2)
    );

    fs::write(
        &corpus,
        "{\"id\":\"1\",\"title\":\"t\",\"text\":\"x\"}\n{\"id\":\"1\",\"title\":\"u\",\"text\":\"y\"}\n",
    )
    .unwrap();
    assert_eq!(
        knowsearch(&["ingest", "--corpus", s(&corpus)])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn score_cases() {
    let tmp = tempfile::tempdir().unwrap();
    let traj = tmp.path().join("t.txt");
    let golds = tmp.path().join("g.json");
    fs::write(&golds, "[\"2\"]").unwrap();

    fs::write(&traj, "<answer>\\boxed{2}</answer>\n<think>done</think>").unwrap();
    let out = ok(&[
        "score",
        "--trajectory",
        s(&traj),
        "--golds",
        s(&golds),
        "--tau",
        "0.7",
    ]);
    let r: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(r["reward"], 0.0);
    assert_eq!(r["branch"], "ZeroInvalid");

    fs::write(&traj, "<think>open").unwrap();
    let out = knowsearch(&[
        "score",
        "--trajectory",
        s(&traj),
        "--golds",
        s(&golds),
        "--tau",
        "0.7",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!out.stderr.is_empty());
}

#[test]
fn usage_errors() {
    assert_eq!(knowsearch(&[]).status.code(), Some(64));
    assert_eq!(knowsearch(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(knowsearch(&["eval", "--params"]).status.code(), Some(64));
    assert_eq!(knowsearch(&["--help"]).status.code(), Some(0));
}

#[test]
fn report_writes_csv_and_svg() {
    let tmp = tempfile::tempdir().unwrap();
    let world = tmp.path().join("w");
    let run = tmp.path().join("r");
    let conf = tmp.path().join("train.conf");
    fs::write(&conf, "# short run\nsteps = 12\ngroup_size = 4\n").unwrap();
    ok(&[
        "gen-data",
        "--known",
        "6",
        "--unknown",
        "6",
        "--out",
        s(&world),
    ]);
    ok(&[
        "train",
        "--config",
        s(&conf),
        "--world",
        s(&world),
        "--out",
        s(&run),
    ]);
    let curves = run.join("curves.csv");

    let csv = tmp.path().join("smooth.csv");
    ok(&[
        "report",
        "--curves",
        s(&curves),
        "--out",
        s(&csv),
        "--window",
        "5",
    ]);
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("step,mean_reward_ma5,"));
    assert_eq!(text.lines().count(), 13);

    let svg = tmp.path().join("chart.svg");
    ok(&["report", "--curves", s(&curves), "--out", s(&svg)]);
    assert!(fs::read_to_string(&svg).unwrap().contains("<polyline"));

    fs::write(&conf, "steps = 0\n").unwrap();
    let out = knowsearch(&[
        "train",
        "--config",
        s(&conf),
        "--world",
        s(&world),
        "--out",
        s(&run),
    ]);
    assert_ne!(out.status.code(), Some(0));
}
