//! The bundled synthetic corpus and scoring fixture against values frozen
//! by fixtures/generate.py.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use barec_core::corpus::{
    ingest_barec, ingest_canonical, read_predictions, score_predictions, split_documents, stats,
    Domain, IssueKind, Split, SplitConfig,
};
use barec_core::level::Readership;
use barec_core::LevelScheme;
use serde_json::Value;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn expected(name: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(fixtures().join(name)).unwrap()).unwrap()
}

#[test]
fn synthetic_corpus_counts() {
    let exp = expected("corpus/expected.json");
    let file = fs::File::open(fixtures().join("corpus/barec_synthetic.tsv")).unwrap();
    let (corpus, report) = ingest_barec(file, b'\t').unwrap();

    let mismatched: Vec<&str> = report
        .issues
        .iter()
        .filter(|i| i.kind == IssueKind::WordCountMismatch)
        .map(|i| i.message.split('"').nth(1).unwrap())
        .collect();
    let want: Vec<&str> = exp["word_count_mismatches"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert_eq!(mismatched, want);
    assert!(!report.has_errors(), "{report}");

    let st = stats(&corpus);
    assert_eq!(st.total.sentences as u64, exp["sentences"].as_u64().unwrap());
    assert_eq!(st.total.documents as u64, exp["documents"].as_u64().unwrap());
    assert_eq!(st.total.words as u64, exp["words"].as_u64().unwrap());
    let levels: Vec<u64> = st.level_counts.iter().map(|&c| c as u64).collect();
    let want: Vec<u64> = serde_json::from_value(exp["level_counts"].clone()).unwrap();
    assert_eq!(levels, want);
    for split in Split::ASSIGNABLE {
        let name = split.as_str();
        assert_eq!(
            st.by_split[&split].sentences as u64,
            exp["split_sentences"][name].as_u64().unwrap(),
            "{name}"
        );
        let want: Vec<usize> =
            serde_json::from_value(exp["split_level_counts"][name].clone()).unwrap();
        assert_eq!(st.level_counts_by_split[&split], want);
    }
    let distributed = corpus.sentences().filter(|s| s.iaa_distributed).count();
    assert_eq!(distributed as u64, exp["iaa_distributed"].as_u64().unwrap());
    for (key, cell) in exp["cells"].as_object().unwrap() {
        let (d, r) = key.split_once('|').unwrap();
        let c = st.by_domain_readership[&(d.parse::<Domain>().unwrap(), r.parse::<Readership>().unwrap())];
        assert_eq!(c.documents as u64, cell["documents"].as_u64().unwrap(), "{key}");
        assert_eq!(c.sentences as u64, cell["sentences"].as_u64().unwrap(), "{key}");
        assert_eq!(c.words as u64, cell["words"].as_u64().unwrap(), "{key}");
    }
    let r = st.pearson_sentence.unwrap();
    assert!((r - exp["pearson_sentence"].as_f64().unwrap()).abs() < 1e-9);
    let r = st.pearson_level_means.unwrap();
    assert!((r - exp["pearson_level_means"].as_f64().unwrap()).abs() < 1e-9);
}

#[test]
fn shipped_assignments_survive_resplitting() {
    let file = fs::File::open(fixtures().join("corpus/barec_synthetic.tsv")).unwrap();
    let (corpus, _) = ingest_barec(file, b'\t').unwrap();
    let a = split_documents(&corpus, &SplitConfig::default(), &BTreeMap::new()).unwrap();
    for d in corpus.documents() {
        assert_eq!(a[&d.id], d.split);
    }
}

#[test]
fn fresh_split_is_near_target() {
    let file = fs::File::open(fixtures().join("corpus/barec_synthetic.tsv")).unwrap();
    let (mut corpus, _) = ingest_barec(file, b'\t').unwrap();
    // Forget the shipped assignment.
    let docs: Vec<_> = corpus
        .documents()
        .cloned()
        .map(|mut d| {
            d.preassigned_split = false;
            d.split = Split::Unassigned;
            d
        })
        .collect();
    let sentences: Vec<_> = corpus
        .sentences()
        .cloned()
        .map(|mut s| {
            s.iaa_distributed = false;
            s.split = None;
            s
        })
        .collect();
    corpus = barec_core::corpus::Corpus::from_records(docs, sentences).0;
    let a = split_documents(&corpus, &SplitConfig { seed: 3, ..Default::default() }, &BTreeMap::new())
        .unwrap();
    assert_eq!(a.len(), corpus.documents().len());
    corpus.apply_split(&a);
    let st = stats(&corpus);
    let total = st.total.words as f64;
    for (split, target) in Split::ASSIGNABLE.iter().zip([0.8, 0.1, 0.1]) {
        let share = st.by_split[split].words as f64 / total;
        // Documents are about 140 words of a 5,663-word corpus, so one
        // document moves the share by ~2.5 points.
        assert!((share - target).abs() < 0.03, "{split}: {share}");
    }
}

#[test]
fn scoring_fixture() {
    let dir = fixtures().join("scoring");
    let exp = expected("scoring/expected.json");
    let docs = fs::read(dir.join("documents.jsonl")).unwrap();
    let sents = fs::read(dir.join("sentences.jsonl")).unwrap();
    let (corpus, report) = ingest_canonical(&docs[..], &sents[..]).unwrap();
    assert!(report.is_empty(), "{report}");
    let preds = read_predictions(&fs::read(dir.join("predictions.tsv")).unwrap()[..]).unwrap();
    let out = score_predictions(&corpus, Some(Split::Dev), &preds, false, &LevelScheme::shipped())
        .unwrap();
    let r = serde_json::to_value(out.report).unwrap();
    for key in [
        "acc19",
        "acc7",
        "acc5",
        "acc3",
        "adjacent_acc19",
        "distance",
        "distance_relative",
        "qwk",
    ] {
        let got = r[key].as_f64().unwrap();
        let want = exp[key].as_f64().unwrap();
        assert!((got - want).abs() < 1e-9, "{key}: {got} vs {want}");
    }
    assert_eq!(out.report.n as u64, exp["n"].as_u64().unwrap());
}

#[test]
fn stats_roundtrip_through_json() {
    let file = fs::File::open(fixtures().join("corpus/barec_synthetic.tsv")).unwrap();
    let st = stats(&ingest_barec(file, b'\t').unwrap().0);
    let json = serde_json::to_string(&st).unwrap();
    let back: barec_core::corpus::CorpusStats = serde_json::from_str(&json).unwrap();
    assert_eq!(back.by_domain_readership, st.by_domain_readership);
    assert_eq!(back.level_counts_by_split, st.level_counts_by_split);
}
