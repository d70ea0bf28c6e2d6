//! Service state as a pure fold over the event log.

use std::collections::BTreeMap;

use barec_core::corpus::{Flag, Split};
use barec_core::iaa::UnificationRecord;
use barec_core::text::count_words;
use barec_core::Level;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    AnnotationEvent, Batch, BatchStatus, Event, ExportRecord, LogEntry, Round, RoundStatus,
    SentenceStatus, UnifiedLabel,
};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("event {seq}: {message}")]
pub struct ReplayError {
    pub seq: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceState {
    pub id: String,
    pub doc_id: String,
    pub text: String,
    pub word_count: usize,
    pub split: Split,
    /// Batch currently holding the sentence.
    pub batch: Option<String>,
    /// Full annotation history per annotator, oldest first.
    pub history: BTreeMap<String, Vec<AnnotationEvent>>,
    /// Open unification round holding the sentence.
    pub round: Option<String>,
    pub unified: Option<UnifiedLabel>,
}

impl SentenceState {
    pub fn latest(&self, annotator: &str) -> Option<&AnnotationEvent> {
        self.history.get(annotator).and_then(|h| h.last())
    }

    pub fn version(&self, annotator: &str) -> u64 {
        self.latest(annotator).map_or(0, |a| a.version)
    }

    /// Latest level from each annotator that gave one.
    pub fn labels(&self) -> BTreeMap<String, Level> {
        self.history
            .iter()
            .filter_map(|(a, h)| Some((a.clone(), h.last()?.level?)))
            .collect()
    }

    /// Flags on the latest annotations.
    pub fn flags(&self) -> Vec<Flag> {
        let mut flags: Vec<Flag> = self
            .history
            .values()
            .filter_map(|h| h.last())
            .flat_map(|a| a.flags.iter().cloned())
            .collect();
        flags.sort();
        flags.dedup();
        flags
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct State {
    /// Sequence number of the last applied event, 0 when empty.
    pub seq: u64,
    pub sentences: BTreeMap<String, SentenceState>,
    pub batches: BTreeMap<String, Batch>,
    pub rounds: BTreeMap<String, Round>,
}

impl State {
    pub fn replay<'a>(entries: impl IntoIterator<Item = &'a LogEntry>) -> Result<Self, ReplayError> {
        let mut state = State::default();
        for e in entries {
            state.apply(e)?;
        }
        Ok(state)
    }

    /// Applies one entry. Entries must arrive in sequence order.
    pub fn apply(&mut self, entry: &LogEntry) -> Result<(), ReplayError> {
        let fail = |message: String| ReplayError {
            seq: entry.seq,
            message,
        };
        if entry.seq != self.seq + 1 {
            return Err(fail(format!("expected sequence {}", self.seq + 1)));
        }
        match &entry.event {
            Event::SentenceRegistered {
                sentence_id,
                doc_id,
                text,
                split,
            } => {
                if self.sentences.contains_key(sentence_id) {
                    return Err(fail(format!("sentence {sentence_id} registered twice")));
                }
                self.sentences.insert(
                    sentence_id.clone(),
                    SentenceState {
                        id: sentence_id.clone(),
                        doc_id: doc_id.clone(),
                        word_count: count_words(text),
                        text: text.clone(),
                        split: *split,
                        batch: None,
                        history: BTreeMap::new(),
                        round: None,
                        unified: None,
                    },
                );
            }
            Event::BatchCreated {
                batch_id,
                annotators,
                sentence_ids,
            } => {
                if self.batches.contains_key(batch_id) {
                    return Err(fail(format!("batch {batch_id} created twice")));
                }
                for id in sentence_ids {
                    let s = self
                        .sentences
                        .get(id)
                        .ok_or_else(|| fail(format!("unknown sentence {id}")))?;
                    if let Some(other) = &s.batch {
                        return Err(fail(format!("sentence {id} already in batch {other}")));
                    }
                }
                for id in sentence_ids {
                    self.sentences.get_mut(id).expect("checked").batch = Some(batch_id.clone());
                }
                self.batches.insert(
                    batch_id.clone(),
                    Batch {
                        id: batch_id.clone(),
                        annotators: annotators.clone(),
                        sentence_ids: sentence_ids.clone(),
                        status: BatchStatus::Open,
                        submitted_by: Vec::new(),
                        created_at: entry.at,
                        submitted_at: None,
                    },
                );
            }
            Event::AnnotationSubmitted { annotation } => {
                let s = self
                    .sentences
                    .get_mut(&annotation.sentence_id)
                    .ok_or_else(|| fail(format!("unknown sentence {}", annotation.sentence_id)))?;
                let expected = s.version(&annotation.annotator) + 1;
                if annotation.version != expected {
                    return Err(fail(format!(
                        "version {} for {}/{}, expected {expected}",
                        annotation.version, annotation.sentence_id, annotation.annotator
                    )));
                }
                s.history
                    .entry(annotation.annotator.clone())
                    .or_default()
                    .push(annotation.clone());
            }
            Event::BatchSubmitted {
                batch_id,
                annotator,
            } => {
                let b = self
                    .batches
                    .get_mut(batch_id)
                    .ok_or_else(|| fail(format!("unknown batch {batch_id}")))?;
                if !b.submitted_by.contains(annotator) {
                    b.submitted_by.push(annotator.clone());
                    b.submitted_by.sort();
                }
                if b.annotators.iter().all(|a| b.submitted_by.contains(a)) {
                    b.status = BatchStatus::Submitted;
                    b.submitted_at = Some(entry.at);
                }
            }
            Event::BatchReleased { batch_id } => {
                let b = self
                    .batches
                    .get_mut(batch_id)
                    .ok_or_else(|| fail(format!("unknown batch {batch_id}")))?;
                b.status = BatchStatus::Released;
                for id in &b.sentence_ids {
                    if let Some(s) = self.sentences.get_mut(id) {
                        if s.history.is_empty() {
                            s.batch = None;
                        }
                    }
                }
            }
            Event::UnificationOpened {
                round_id,
                lead,
                sentence_ids,
                annotators,
            } => {
                if let Some(id) = sentence_ids.iter().find(|id| !self.sentences.contains_key(*id)) {
                    return Err(fail(format!("unknown sentence {id}")));
                }
                for id in sentence_ids {
                    self.sentences.get_mut(id).expect("checked").round = Some(round_id.clone());
                }
                self.rounds.insert(
                    round_id.clone(),
                    Round {
                        id: round_id.clone(),
                        lead: lead.clone(),
                        sentence_ids: sentence_ids.clone(),
                        annotators: annotators.clone(),
                        status: RoundStatus::Open,
                        opened_at: entry.at,
                    },
                );
            }
            Event::UnifiedLabelRecorded {
                round_id,
                sentence_id,
                ul,
                rationale,
            } => {
                let round = self
                    .rounds
                    .get(round_id)
                    .ok_or_else(|| fail(format!("unknown round {round_id}")))?;
                let s = self
                    .sentences
                    .get_mut(sentence_id)
                    .ok_or_else(|| fail(format!("unknown sentence {sentence_id}")))?;
                let labels = round_labels(s, &round.annotators);
                let record =
                    UnificationRecord::new(labels, *ul).map_err(|e| fail(e.to_string()))?;
                s.unified = Some(UnifiedLabel {
                    round_id: round_id.clone(),
                    record,
                    rationale: rationale.clone(),
                    at: entry.at,
                });
                self.refresh_batch(sentence_id);
            }
            Event::UnificationClosed { round_id } => {
                let round = self
                    .rounds
                    .get_mut(round_id)
                    .ok_or_else(|| fail(format!("unknown round {round_id}")))?;
                round.status = RoundStatus::Closed;
                for id in &round.sentence_ids {
                    if let Some(s) = self.sentences.get_mut(id) {
                        s.round = None;
                    }
                }
            }
        }
        self.seq = entry.seq;
        Ok(())
    }

    /// Marks a batch unified once every sentence in it has a unified label.
    fn refresh_batch(&mut self, sentence_id: &str) {
        let Some(batch_id) = self.sentences[sentence_id].batch.clone() else {
            return;
        };
        if let Some(b) = self.batches.get_mut(&batch_id) {
            let all = b
                .sentence_ids
                .iter()
                .all(|id| self.sentences.get(id).is_some_and(|s| s.unified.is_some()));
            if all && b.status == BatchStatus::Submitted {
                b.status = BatchStatus::Unified;
            }
        }
    }

    pub fn status(&self, s: &SentenceState) -> SentenceStatus {
        if !s.flags().is_empty() {
            return SentenceStatus::Excluded;
        }
        if s.unified.is_some() {
            return SentenceStatus::Unified;
        }
        let labels = s.labels();
        if labels.is_empty() {
            return if s.history.is_empty() {
                SentenceStatus::Unannotated
            } else {
                SentenceStatus::InProgress
            };
        }
        let submitted = s
            .batch
            .as_ref()
            .and_then(|b| self.batches.get(b))
            .is_some_and(|b| labels.keys().all(|a| b.submitted_by.contains(a)));
        match (labels.len(), submitted) {
            (_, false) => SentenceStatus::InProgress,
            (1, true) => SentenceStatus::Approved,
            _ => SentenceStatus::NeedsUnification,
        }
    }

    /// Label the export would carry, for official statuses only.
    pub fn official_level(&self, s: &SentenceState) -> Option<Level> {
        match self.status(s) {
            SentenceStatus::Unified => s.unified.as_ref().map(|u| u.record.ul),
            SentenceStatus::Approved => s.labels().into_values().next(),
            _ => None,
        }
    }

    /// Export rows sorted by sentence id.
    pub fn export(&self, filter: &ExportFilter) -> Vec<ExportRecord> {
        self.sentences
            .values()
            .filter(|s| filter.split.is_none_or(|sp| sp == s.split))
            .filter_map(|s| {
                let status = self.status(s);
                let keep = match filter.status {
                    StatusFilter::Official => status.is_official(),
                    StatusFilter::All => true,
                    StatusFilter::Only(want) => status == want,
                };
                keep.then(|| ExportRecord {
                    id: s.id.clone(),
                    doc_id: s.doc_id.clone(),
                    text: s.text.clone(),
                    word_count: s.word_count,
                    level: self.official_level(s),
                    status,
                    split: s.split,
                    annotator_labels: s.labels(),
                })
            })
            .collect()
    }

    /// JSON lines for [`State::export`]; identical states give identical bytes.
    pub fn export_bytes(&self, filter: &ExportFilter) -> Vec<u8> {
        let mut out = Vec::new();
        for r in self.export(filter) {
            serde_json::to_writer(&mut out, &r).expect("export records serialize");
            out.push(b'\n');
        }
        out
    }
}

/// Latest labels from the round's annotators (all annotators when empty).
pub(crate) fn round_labels(s: &SentenceState, annotators: &[String]) -> BTreeMap<String, Level> {
    s.labels()
        .into_iter()
        .filter(|(a, _)| annotators.is_empty() || annotators.contains(a))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum StatusFilter {
    /// Unified or approved.
    #[default]
    Official,
    All,
    Only(SentenceStatus),
}

impl std::str::FromStr for StatusFilter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "" | "official" => StatusFilter::Official,
            "all" => StatusFilter::All,
            other => StatusFilter::Only(
                serde_json::from_value(serde_json::Value::String(other.to_string()))
                    .map_err(|_| format!("unknown status {other:?}"))?,
            ),
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExportFilter {
    pub split: Option<Split>,
    pub status: StatusFilter,
}
