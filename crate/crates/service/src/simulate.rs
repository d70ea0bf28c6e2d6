//! Seeded synthetic workload: registers a pool, then drives batches,
//! annotations (with edits, flags and stale writes), submissions and
//! unification rounds until a target number of annotation events is stored.

use barec_core::corpus::{Flag, Split};
use barec_core::Level;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::ServiceError;
use crate::model::AnnotationEvent;
use crate::service::{CreateBatch, OpenRound, RecordUl, Service};

const WORDS: &[&str] = &["كتب", "الولد", "الدرس", "في", "المدرسة", "سُلوكي", "مَسْؤولِيَّتي", "العلم"];

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct Summary {
    pub annotations: usize,
    pub conflicts: usize,
    pub batches: usize,
    pub unified: usize,
}

/// Runs until `annotations` annotation events are stored.
pub fn run(service: &Service, seed: u64, annotations: usize) -> Result<Summary, ServiceError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool = annotations;
    for i in 0..pool {
        let n = rng.gen_range(1..12);
        let text: Vec<&str> = (0..n).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect();
        let split = Split::ASSIGNABLE[rng.gen_range(0..3)];
        service.register_sentence(&format!("syn{i:05}"), &format!("doc{:03}", i / 20), &text.join(" "), split)?;
    }
    let mut summary = Summary::default();
    let solo = ["A1", "A2", "A3"];
    while summary.annotations < annotations {
        let shared = rng.gen_bool(0.3);
        let annotators: Vec<String> = if shared {
            solo.iter().map(|a| a.to_string()).collect()
        } else {
            vec![solo[rng.gen_range(0..solo.len())].to_string()]
        };
        let batch = match service.create_batch(&CreateBatch {
            annotators: annotators.clone(),
            size: Some(rng.gen_range(3..10)),
            seed: rng.gen(),
            allow_partial: true,
        }) {
            Ok(b) => b,
            Err(ServiceError::InsufficientPool { .. }) => break,
            Err(e) => return Err(e),
        };
        summary.batches += 1;
        for id in &batch.sentence_ids {
            for a in &annotators {
                let edits = if rng.gen_bool(0.2) { 2 } else { 1 };
                for _ in 0..edits {
                    if summary.annotations >= annotations {
                        break;
                    }
                    let version = service.sentence(id)?.history.get(a).map_or(0, |h| h.len() as u64) + 1;
                    let flagged = !shared && rng.gen_bool(0.03);
                    let event = AnnotationEvent {
                        sentence_id: id.clone(),
                        annotator: a.clone(),
                        level: (!flagged).then(|| Level::new(rng.gen_range(1..=19)).expect("in range")),
                        asserted_features: if rng.gen_bool(0.1) { vec!["emotion_vocabulary".into()] } else { vec![] },
                        flags: if flagged { vec![Flag::Sensitive] } else { vec![] },
                        note: String::new(),
                        version,
                    };
                    if rng.gen_bool(0.05) && version > 1 {
                        // A stale write from a second tab.
                        let stale = AnnotationEvent { version: version - 1, ..event.clone() };
                        if let Err(ServiceError::Conflict { .. }) = service.submit_annotation(stale) {
                            summary.conflicts += 1;
                        }
                    }
                    service.submit_annotation(event)?;
                    summary.annotations += 1;
                }
            }
        }
        let complete = batch.sentence_ids.iter().all(|id| {
            service
                .sentence(id)
                .map(|s| annotators.iter().all(|a| s.history.contains_key(a)))
                .unwrap_or(false)
        });
        if !complete {
            break;
        }
        for a in &annotators {
            service.submit_batch(&batch.id, a)?;
        }
        if shared {
            let round = service.open_unification(&OpenRound {
                lead: "lead".into(),
                sentence_ids: batch.sentence_ids.clone(),
                annotators: vec![],
            })?;
            for s in &round.sentences {
                let ul = if rng.gen_bool(0.9) { s.al } else { Level::new(rng.gen_range(1..=19)).expect("in range") };
                service.record_ul(&round.round.id, &RecordUl {
                    sentence_id: s.sentence_id.clone(),
                    ul,
                    rationale: "group discussion".into(),
                    by: "lead".into(),
                })?;
                summary.unified += 1;
            }
            service.close_round(&round.round.id, "lead")?;
        }
    }
    Ok(summary)
}
