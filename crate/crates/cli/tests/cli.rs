use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn barec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_barec")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn ingest_stats_split_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("corpus");
    let tsv = fixtures().join("corpus/barec_synthetic.tsv");
    let o = barec(&["ingest", "--adapter", "barec", "--sentences", tsv.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("40 documents, 500 sentences (0 errors, 3 warnings)"));

    let o = barec(&["stats", "--corpus", out.to_str().unwrap(), "--json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["total"]["words"], 5663);

    let o = barec(&["split", "--corpus", out.to_str().unwrap(), "--seed", "1"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("train  32"));
}

#[test]
fn strict_ingest_fails_on_errors() {
    let dir = tempfile::tempdir().unwrap();
    let docs = dir.path().join("d.jsonl");
    let sents = dir.path().join("s.jsonl");
    std::fs::write(&docs, "{\"id\":\"d1\",\"domain\":\"stem\",\"readership\":\"foundational\"}\n").unwrap();
    std::fs::write(&sents, "{\"id\":\"s1\",\"doc_id\":\"d1\",\"text\":\"كتب\",\"level\":25}\n").unwrap();
    let args = ["ingest", "--documents", docs.to_str().unwrap(), "--sentences", sents.to_str().unwrap()];
    let lenient = barec(&args);
    assert!(lenient.status.success());
    let mut strict = args.to_vec();
    strict.push("--strict");
    let o = barec(&strict);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("invalid level"));
}

#[test]
fn floor_reports_trace_and_violation() {
    let o = barec(&["floor", "--text", "سُلوكي مَسْؤولِيَّتي"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("floor: 6-waw"), "{text}");
    let o = barec(&["floor", "--text", "سُلوكي مَسْؤولِيَّتي", "--level", "2", "--json"]);
    assert_eq!(o.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["judgment"]["floor"], 6);
    assert_eq!(v["judgment"]["violations"][0]["kind"], "below_floor");
}

#[test]
fn floor_batch_modes_agree() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.tsv");
    std::fs::write(&input, "a\tكتب الولد الدرس\nb\tسُلوكي مَسْؤولِيَّتي\nc\t...\n").unwrap();
    let p = barec(&["floor", "--input", input.to_str().unwrap()]);
    let s = barec(&["floor", "--input", input.to_str().unwrap(), "--sequential"]);
    assert_eq!(p.stdout, s.stdout);
    assert_eq!(stdout(&p).lines().nth(2), Some("c\t0\t-"));
}

#[test]
fn score_matches_fixture() {
    let f = fixtures().join("scoring");
    let o = barec(&[
        "score",
        "--corpus", f.to_str().unwrap(),
        "--predictions", f.join("predictions.tsv").to_str().unwrap(),
        "--split", "dev",
        "--json",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let expected: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(f.join("expected.json")).unwrap()).unwrap();
    let got = v["report"]["acc19"].as_f64().unwrap();
    let want = expected["acc19"].as_f64().unwrap();
    assert!((got - want).abs() < 1e-9);
}

#[test]
fn iaa_text_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("iaa.jsonl");
    std::fs::write(
        &input,
        concat!(
            "{\"set\":\"s1\",\"phase\":\"p1\",\"sentence_id\":\"a\",\"labels\":{\"A1\":3,\"A2\":5},\"ul\":4}\n",
            "{\"set\":\"s1\",\"phase\":\"p1\",\"sentence_id\":\"b\",\"labels\":{\"A1\":10,\"A2\":12},\"ul\":12}\n",
        ),
    )
    .unwrap();
    let o = barec(&["iaa", "--input", input.to_str().unwrap(), "--min-mm", "2"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("p1 (macro)"));
    let o = barec(&["iaa", "--input", input.to_str().unwrap(), "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["sets"][0]["pairs"][0]["report"]["acc19"], 0.0);
    assert_eq!(v["unification"]["sentences"], 2);
}

#[test]
fn bad_arguments_fail() {
    assert!(!barec(&["floor"]).status.success());
    assert!(!barec(&["stats", "--corpus", "/nonexistent"]).status.success());
    assert!(!barec(&["split", "--corpus", "x", "--assign", "nodash"]).status.success());
}
