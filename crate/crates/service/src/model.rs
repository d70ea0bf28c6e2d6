//! Records stored in the event log and exposed by the API.

use std::collections::BTreeMap;

use barec_core::corpus::{Flag, Split};
use barec_core::iaa::UnificationRecord;
use barec_core::Level;
use serde::{Deserialize, Serialize};

pub const DEFAULT_BATCH_SIZE: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BatchStatus {
    Open,
    Submitted,
    Released,
    Unified,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Batch {
    pub id: String,
    /// One annotator for regular batches, several for a shared (IAA) batch.
    pub annotators: Vec<String>,
    pub sentence_ids: Vec<String>,
    pub status: BatchStatus,
    /// Annotators who have submitted so far.
    #[serde(default)]
    pub submitted_by: Vec<String>,
    pub created_at: u64,
    pub submitted_at: Option<u64>,
}

/// One annotator's judgment on one sentence. `version` starts at 1 and
/// increases by one with every edit of the same (sentence, annotator).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationEvent {
    pub sentence_id: String,
    pub annotator: String,
    #[serde(default)]
    pub level: Option<Level>,
    #[serde(default)]
    pub asserted_features: Vec<String>,
    #[serde(default)]
    pub flags: Vec<Flag>,
    #[serde(default)]
    pub note: String,
    pub version: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnifiedLabel {
    pub round_id: String,
    pub record: UnificationRecord,
    #[serde(default)]
    pub rationale: String,
    pub at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoundStatus {
    Open,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Round {
    pub id: String,
    /// Holder of the round's advisory lock; only they record labels.
    pub lead: String,
    pub sentence_ids: Vec<String>,
    pub annotators: Vec<String>,
    pub status: RoundStatus,
    pub opened_at: u64,
}

/// Everything that can happen. State is a fold over these.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    SentenceRegistered {
        sentence_id: String,
        doc_id: String,
        text: String,
        #[serde(default)]
        split: Split,
    },
    BatchCreated {
        batch_id: String,
        annotators: Vec<String>,
        sentence_ids: Vec<String>,
    },
    AnnotationSubmitted {
        annotation: AnnotationEvent,
    },
    BatchSubmitted {
        batch_id: String,
        annotator: String,
    },
    BatchReleased {
        batch_id: String,
    },
    UnificationOpened {
        round_id: String,
        lead: String,
        sentence_ids: Vec<String>,
        annotators: Vec<String>,
    },
    UnifiedLabelRecorded {
        round_id: String,
        sentence_id: String,
        ul: Level,
        #[serde(default)]
        rationale: String,
    },
    UnificationClosed {
        round_id: String,
    },
}

/// A log entry: sequence number, timestamp and event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    pub at: u64,
    #[serde(flatten)]
    pub event: Event,
}

/// Lifecycle position of a sentence, as seen by export.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SentenceStatus {
    Unannotated,
    InProgress,
    /// Labeled by one annotator in a submitted batch.
    Approved,
    /// Labeled by several annotators, awaiting a unified label.
    NeedsUnification,
    Unified,
    /// Flagged; held out pending review.
    Excluded,
}

impl SentenceStatus {
    /// Statuses whose label may appear in the official export.
    pub fn is_official(self) -> bool {
        matches!(self, SentenceStatus::Approved | SentenceStatus::Unified)
    }
}

/// Row of the official export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportRecord {
    pub id: String,
    pub doc_id: String,
    pub text: String,
    pub word_count: usize,
    pub level: Option<Level>,
    pub status: SentenceStatus,
    pub split: Split,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub annotator_labels: BTreeMap<String, Level>,
}
