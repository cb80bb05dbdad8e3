use std::path::{Path, PathBuf};

use vqa_logic::cli::run_captured;
use vqa_logic::datagen::{read_jsonl, ComposedSample};

fn mini(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mini").join(name).display().to_string()
}

fn embeddings() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/embeddings-synthetic.txt").display().to_string()
}

fn run(args: &[&str]) -> (i32, String, String) {
    let mut argv = vec!["vqa-logic"];
    argv.extend(args);
    run_captured(argv)
}

fn compose_to(dir: &Path) -> PathBuf {
    let out = dir.join("compose.jsonl");
    let (code, _, err) = run(&[
        "compose",
        "--questions",
        &mini("questions.json"),
        "--annotations",
        &mini("annotations.json"),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    out
}

#[test]
fn help_for_every_subcommand() {
    for sub in ["compose", "supplement", "inductive", "parse", "eval", "fc-check", "antonym", "stats", "negate"] {
        let (code, out, _) = run(&[sub, "--help"]);
        assert_eq!(code, 0, "{sub}");
        assert!(out.contains("Usage"), "{sub}: {out}");
    }
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("fc-check"));
}

#[test]
fn usage_errors_exit_two() {
    for args in [&["bogus"][..], &["compose"], &["eval", "--dataset", "x", "--threshold", "high"], &["--jobs", "0", "stats", "--dataset", "x"]] {
        let (code, _, err) = run(args);
        assert_eq!(code, 2, "{args:?}");
        assert!(err.starts_with("error[E_USAGE]"), "{err}");
    }
}

#[test]
fn data_errors_exit_one() {
    let (code, _, err) = run(&["stats", "--dataset", "/definitely/missing.jsonl"]);
    assert_eq!(code, 1);
    assert!(err.starts_with("error[E_IO]"), "{err}");

    let (code, _, err) = run(&["negate", "What color is the car?"]);
    assert_eq!(code, 1);
    assert!(err.starts_with("error[E_TEXT]"), "{err}");

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"sample_id\": 3}\n").unwrap();
    let (code, _, err) = run(&["stats", "--dataset", bad.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.starts_with("error[E_FORMAT]"), "{err}");
}

#[test]
fn negate_prints_the_negation() {
    let (code, out, _) = run(&["negate", "Is there a chair?"]);
    assert_eq!(code, 0);
    assert_eq!(out, "Is there no chair?\n");
    let (_, out, _) = run(&["negate", "--all", "Is this an area near the city?"]);
    assert_eq!(out.lines().count(), 2);
}

#[test]
fn parse_prints_components() {
    let (code, out, _) = run(&["parse", "Is there beer and is the man not wearing shoes?"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["formula"], "AND(Q1,NOT(Q2))");
    assert_eq!(v["components"][1]["text"], "Is the man wearing shoes?");
}

#[test]
fn compose_then_eval_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let ds = compose_to(dir.path());
    let samples: Vec<ComposedSample> = read_jsonl(&ds).unwrap();
    assert_eq!(samples.len(), 64);

    let (code, out, err) = run(&["eval", "--dataset", ds.to_str().unwrap(), "--answerer", "recombine"]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["overall"]["accuracy"], 100.0);

    let (code, out, _) = run(&["eval", "--dataset", ds.to_str().unwrap(), "--answerer", "yes", "--report", "md"]);
    assert_eq!(code, 0);
    assert!(out.contains("| Q1 AND Q2 |"), "{out}");

    let (code, out, _) = run(&["stats", "--dataset", ds.to_str().unwrap()]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["total"], 64);
}

#[test]
fn eval_file_answerer_requires_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let ds = compose_to(dir.path());
    let (code, _, err) = run(&["eval", "--dataset", ds.to_str().unwrap(), "--answerer", "file"]);
    assert_ne!(code, 0);
    assert!(err.starts_with("error["), "{err}");
}

#[test]
fn supplement_with_embeddings() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("supp.jsonl");
    let (code, _, err) = run(&[
        "supplement",
        "--questions",
        &mini("questions.json"),
        "--annotations",
        &mini("annotations.json"),
        "--instances",
        &mini("instances.json"),
        "--captions",
        &mini("captions.json"),
        "--embeddings",
        &embeddings(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let samples: Vec<ComposedSample> = read_jsonl(&out).unwrap();
    assert_eq!(samples.len(), 160);
    assert!(samples.iter().any(|s| s.category == "Q AND anto(B)"));
}

#[test]
fn antonym_uses_fixture() {
    let (code, out, _) = run(&["antonym", "--present", "bottle", "--embeddings", &embeddings()]);
    assert_eq!(code, 0);
    assert_eq!(out.trim(), "wine glass");
}
