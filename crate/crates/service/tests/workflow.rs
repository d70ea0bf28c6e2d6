use barec_core::corpus::{Flag, Split};
use barec_core::guidelines::Violation;
use barec_core::{GuidelineProfile, Level};
use barec_service::service::{CreateBatch, OpenRound, RecordUl, ValidateRequest};
use barec_service::{AnnotationEvent, ExportFilter, SentenceStatus, Service, ServiceError, StepClock, StatusFilter};

fn lv(n: u8) -> Level {
    Level::new(n).unwrap()
}

fn service_with(n: usize) -> Service {
    let s = Service::with_clock(GuidelineProfile::shipped(), Box::new(StepClock::new(1_000, 1)));
    for i in 0..n {
        s.register_sentence(&format!("s{i:04}"), "doc", "كتب الولد الدرس", Split::Train)
            .unwrap();
    }
    s
}

fn batch(s: &Service, annotators: &[&str], size: usize, seed: u64) -> barec_service::Batch {
    s.create_batch(&CreateBatch {
        annotators: annotators.iter().map(|a| a.to_string()).collect(),
        size: Some(size),
        seed,
        allow_partial: false,
    })
    .unwrap()
}

fn annotate(s: &Service, id: &str, who: &str, level: u8) {
    let version = s.sentence(id).unwrap().history.get(who).map_or(0, |h| h.len() as u64) + 1;
    s.submit_annotation(AnnotationEvent {
        sentence_id: id.into(),
        annotator: who.into(),
        level: Some(lv(level)),
        asserted_features: vec![],
        flags: vec![],
        note: String::new(),
        version,
    })
    .unwrap();
}

#[test]
fn default_batch_is_one_hundred_distinct_sentences() {
    let s = service_with(1000);
    let b = s
        .create_batch(&CreateBatch {
            annotators: vec!["A1".into()],
            size: None,
            seed: 1,
            allow_partial: false,
        })
        .unwrap();
    let mut ids = b.sentence_ids.clone();
    ids.dedup();
    assert_eq!(ids.len(), 100);
}

#[test]
fn empty_and_short_pools() {
    let s = service_with(0);
    let req = CreateBatch {
        annotators: vec!["A1".into()],
        size: None,
        seed: 0,
        allow_partial: true,
    };
    assert!(matches!(s.create_batch(&req), Err(ServiceError::InsufficientPool { available: 0, .. })));
    let s = service_with(30);
    let strict = CreateBatch { allow_partial: false, ..req.clone() };
    assert!(matches!(s.create_batch(&strict), Err(ServiceError::InsufficientPool { available: 30, .. })));
    assert_eq!(s.create_batch(&req).unwrap().sentence_ids.len(), 30);
}

#[test]
fn batches_are_disjoint_and_seeded() {
    let s = service_with(300);
    let a = batch(&s, &["A1"], 100, 9);
    let b = batch(&s, &["A2"], 100, 9);
    assert!(a.sentence_ids.iter().all(|id| !b.sentence_ids.contains(id)));

    let t = service_with(300);
    assert_eq!(batch(&t, &["A1"], 100, 9).sentence_ids, a.sentence_ids);
}

#[test]
fn worked_example_feedback() {
    let s = service_with(0);
    s.register_sentence("w", "doc", "سُلوكي مَسْؤولِيَّتي", Split::Dev).unwrap();
    batch(&s, &["A1"], 1, 0);
    let ok = s
        .submit_annotation(AnnotationEvent {
            sentence_id: "w".into(),
            annotator: "A1".into(),
            level: Some(lv(6)),
            asserted_features: vec![],
            flags: vec![],
            note: String::new(),
            version: 1,
        })
        .unwrap();
    assert_eq!(ok.word_count, 2);
    let j = ok.judgment.unwrap();
    assert_eq!(j.floor, lv(6));
    assert!(!j.is_below_floor());

    let low = s
        .submit_annotation(AnnotationEvent {
            sentence_id: "w".into(),
            annotator: "A1".into(),
            level: Some(lv(2)),
            asserted_features: vec![],
            flags: vec![],
            note: "second thoughts".into(),
            version: 2,
        })
        .unwrap();
    let j = low.judgment.unwrap();
    let cited = j.violations.iter().any(|v| match v {
        Violation::BelowFloor { rules, .. } => rules.iter().any(|r| r == "five_syllable_word"),
        _ => false,
    });
    assert!(cited, "{:?}", j.violations);
    // Stored despite the advisory.
    assert_eq!(s.sentence("w").unwrap().labels["A1"], lv(2));
}

#[test]
fn flag_only_marks_sentence_excluded() {
    let s = service_with(3);
    let b = batch(&s, &["A1"], 1, 0);
    let r = s
        .submit_annotation(AnnotationEvent {
            sentence_id: b.sentence_ids[0].clone(),
            annotator: "A1".into(),
            level: None,
            asserted_features: vec![],
            flags: vec![Flag::Colloquial],
            note: String::new(),
            version: 1,
        })
        .unwrap();
    assert!(r.judgment.is_none());
    assert_eq!(r.status, SentenceStatus::Excluded);
}

#[test]
fn conflicts_and_authorization() {
    let s = service_with(5);
    let b = batch(&s, &["A1"], 2, 0);
    let id = &b.sentence_ids[0];
    annotate(&s, id, "A1", 4);
    let stale = AnnotationEvent {
        sentence_id: id.clone(),
        annotator: "A1".into(),
        level: Some(lv(5)),
        asserted_features: vec![],
        flags: vec![],
        note: String::new(),
        version: 1,
    };
    match s.submit_annotation(stale.clone()) {
        Err(ServiceError::Conflict { expected, latest }) => {
            assert_eq!(expected, 2);
            assert_eq!(latest.unwrap().level, Some(lv(4)));
        }
        other => panic!("{other:?}"),
    }
    let intruder = AnnotationEvent { annotator: "A9".into(), ..stale.clone() };
    assert!(matches!(s.submit_annotation(intruder), Err(ServiceError::Unauthorized(_))));
    let bogus = AnnotationEvent { asserted_features: vec!["made_up".into()], version: 2, ..stale };
    assert!(matches!(s.submit_annotation(bogus), Err(ServiceError::Invalid(_))));
}

#[test]
fn unification_round() {
    let s = service_with(3);
    let annotators = ["A1", "A2", "A3", "A4", "A5"];
    let b = batch(&s, &annotators, 3, 0);
    let rows: [&[u8]; 3] = [&[2, 2, 2, 3, 3], &[9, 12, 5, 5, 5], &[5, 5, 5, 5, 5]];
    for (id, labels) in b.sentence_ids.iter().zip(rows) {
        for (a, l) in annotators.iter().zip(labels) {
            annotate(&s, id, a, *l);
        }
    }
    for a in annotators {
        s.submit_batch(&b.id, a).unwrap();
    }
    assert_eq!(s.sentence(&b.sentence_ids[0]).unwrap().status, SentenceStatus::NeedsUnification);

    let round = s
        .open_unification(&OpenRound {
            lead: "lead".into(),
            sentence_ids: b.sentence_ids.clone(),
            annotators: vec![],
        })
        .unwrap();
    let second = &round.sentences[1];
    assert_eq!(second.mm, 7);
    assert_eq!(second.al, lv(7));

    // The round holds the lock.
    assert!(matches!(
        s.open_unification(&OpenRound { lead: "other".into(), sentence_ids: vec![b.sentence_ids[0].clone()], annotators: vec![] }),
        Err(ServiceError::Locked(_))
    ));
    let rid = round.round.id.clone();
    let ul = |id: &str, ul: u8, rationale: &str, by: &str| {
        s.record_ul(&rid, &RecordUl { sentence_id: id.into(), ul: lv(ul), rationale: rationale.into(), by: by.into() })
    };
    let r = ul(&b.sentence_ids[0], 3, "", "lead").unwrap();
    assert!(r.record.within_range && r.record.matches_annotator);
    assert!(matches!(ul(&b.sentence_ids[1], 7, "", "intruder"), Err(ServiceError::Locked(_))));
    assert!(matches!(ul(&b.sentence_ids[2], 9, "", "lead"), Err(ServiceError::RationaleRequired(_))));
    let r = ul(&b.sentence_ids[2], 9, "context shows specialised usage", "lead").unwrap();
    assert!(!r.record.within_range);
    assert_eq!(r.warnings.len(), 2);
    assert!(matches!(ul("s-none", 3, "", "lead"), Err(ServiceError::Invalid(_))));

    // Only unified sentences reach the official export so far.
    let exported = String::from_utf8(s.export_bytes(&ExportFilter::default())).unwrap();
    assert_eq!(exported.lines().count(), 2);
    ul(&b.sentence_ids[1], 6, "", "lead").unwrap();
    assert_eq!(s.batch(&b.id).unwrap().status, barec_service::model::BatchStatus::Unified);
    s.close_round(&rid, "lead").unwrap();
    assert!(s.sentence(&b.sentence_ids[0]).unwrap().unified.is_some());
}

#[test]
fn single_pass_approval_and_export_filters() {
    let s = service_with(4);
    let b = batch(&s, &["A1"], 2, 3);
    for id in &b.sentence_ids {
        annotate(&s, id, "A1", 7);
    }
    assert!(s.export_bytes(&ExportFilter::default()).is_empty());
    s.submit_batch(&b.id, "A1").unwrap();
    let official = s.export_bytes(&ExportFilter::default());
    assert_eq!(official.iter().filter(|&&c| c == b'\n').count(), 2);
    let all = s.export_bytes(&ExportFilter { split: None, status: StatusFilter::All });
    assert_eq!(all.iter().filter(|&&c| c == b'\n').count(), 4);
    let dev = s.export_bytes(&ExportFilter { split: Some(Split::Dev), status: StatusFilter::All });
    assert!(dev.is_empty());
    let unannotated = s.export_bytes(&ExportFilter {
        split: None,
        status: "unannotated".parse().unwrap(),
    });
    assert_eq!(unannotated.iter().filter(|&&c| c == b'\n').count(), 2);
}

#[test]
fn validate_is_stateless() {
    let s = service_with(0);
    let text = vec!["كلمة"; 25].join(" ");
    let at = |level: u8| {
        s.validate(&ValidateRequest { text: text.clone(), level: lv(level), asserted_features: vec![] })
            .unwrap()
    };
    let j11 = at(11);
    assert_eq!(j11.word_count, 25);
    assert!(j11.judgment.violations.iter().any(|v| matches!(v, Violation::WordCountCeiling { .. })));
    let j12 = at(12);
    assert!(j12.judgment.violations.is_empty());
    assert_eq!(s.log().len(), 0);
}
