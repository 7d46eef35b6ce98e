use std::path::Path;
use std::process::{Command, Output};

use medcurate::eval::{QaLevel, QaSample, RatingRecord, RatingValue};
use medcurate::manifest::write_jsonl;

fn medcurate(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_medcurate"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .unwrap()
}

fn ratings_for(sample: &QaSample, level: QaLevel) -> Vec<RatingRecord> {
    sample
        .item_ids
        .iter()
        .map(|id| RatingRecord {
            session_id: "qa".into(),
            item_id: id.clone(),
            rater_id: "r".into(),
            value: RatingValue::StageQa { value: level },
            timestamp: 0,
        })
        .collect()
}

#[test]
fn ingest_run_sample_and_gate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(medcurate(d, &["--workspace", "ws", "ingest", "--synthetic", "20"]).status.success());
    let run = medcurate(d, &["--workspace", "ws", "run"]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(d.join("ws/run.json").exists());

    let out = medcurate(d, &["--workspace", "ws", "qa", "sample", "--input", "ws/stages/09_caption.jsonl", "--stage", "caption", "--output", "sample.json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sample: QaSample = serde_json::from_slice(&std::fs::read(d.join("sample.json")).unwrap()).unwrap();
    assert!(!sample.item_ids.is_empty());

    write_jsonl(d.join("clean.jsonl"), &ratings_for(&sample, QaLevel::Clean)).unwrap();
    write_jsonl(d.join("noisy.jsonl"), &ratings_for(&sample, QaLevel::Noisy)).unwrap();
    let pass = medcurate(d, &["qa", "gate", "--sample", "sample.json", "--ratings", "clean.jsonl"]);
    assert_eq!(pass.status.code(), Some(0));
    let fail = medcurate(d, &["qa", "gate", "--sample", "sample.json", "--ratings", "noisy.jsonl"]);
    assert_eq!(fail.status.code(), Some(2));

    let stats = medcurate(d, &["stats", "--clips", "ws/stages/09_caption.jsonl", "--videos", "ws/input/videos.jsonl"]);
    assert!(stats.status.success());
    let report: serde_json::Value = serde_json::from_slice(&stats.stdout).unwrap();
    assert!(report["clips"].as_u64().unwrap() > 0);
}

#[test]
fn bad_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "seed = \"x\"\n").unwrap();
    let out = medcurate(dir.path(), &["--config", "bad.toml", "run"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.toml"));
    let out = medcurate(dir.path(), &["segment", "--input", "missing.jsonl", "--output", "out.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
}
