//! Commands and queries over the event-sourced state.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{RwLock, RwLockReadGuard, RwLockWriteGuard};

use barec_core::corpus::{Corpus, Split};
use barec_core::guidelines::{validate_choice, LevelJudgment};
use barec_core::iaa::{average_label, max_min_difference, UnificationRecord};
use barec_core::text::SentenceFeatures;
use barec_core::{GuidelineProfile, Level};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clock::{Clock, SystemClock};
use crate::error::ServiceError;
use crate::model::{
    AnnotationEvent, Batch, BatchStatus, Event, LogEntry, Round, RoundStatus, SentenceStatus,
    DEFAULT_BATCH_SIZE,
};
use crate::state::{round_labels, ExportFilter, State};
use crate::store::{read_snapshot, write_snapshot, EventStore};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreateBatch {
    /// More than one annotator makes a shared batch.
    pub annotators: Vec<String>,
    #[serde(default)]
    pub size: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Accept a smaller batch when the pool runs short.
    #[serde(default)]
    pub allow_partial: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationResponse {
    pub annotation: AnnotationEvent,
    pub word_count: usize,
    /// Guideline feedback for the chosen level; absent for flag-only events.
    pub judgment: Option<LevelJudgment>,
    pub status: SentenceStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidateRequest {
    pub text: String,
    pub level: Level,
    #[serde(default)]
    pub asserted_features: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateResponse {
    pub word_count: usize,
    pub features: SentenceFeatures,
    pub judgment: LevelJudgment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpenRound {
    pub lead: String,
    pub sentence_ids: Vec<String>,
    /// Annotators whose labels take part; all when empty.
    #[serde(default)]
    pub annotators: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundSentence {
    pub sentence_id: String,
    pub text: String,
    pub labels: BTreeMap<String, Level>,
    pub mm: u8,
    /// Rounded average, offered as a suggestion.
    pub al: Level,
    pub ul: Option<Level>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundView {
    pub round: Round,
    pub sentences: Vec<RoundSentence>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordUl {
    pub sentence_id: String,
    pub ul: Level,
    #[serde(default)]
    pub rationale: String,
    /// Must be the round's lead.
    pub by: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UlResponse {
    pub record: UnificationRecord,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceView {
    pub id: String,
    pub doc_id: String,
    pub text: String,
    pub word_count: usize,
    pub split: Split,
    pub status: SentenceStatus,
    pub batch: Option<String>,
    pub labels: BTreeMap<String, Level>,
    pub history: BTreeMap<String, Vec<AnnotationEvent>>,
    pub unified: Option<UnificationRecord>,
}

struct Inner {
    state: State,
    store: EventStore,
}

pub struct Service {
    inner: RwLock<Inner>,
    profile: GuidelineProfile,
    clock: Box<dyn Clock>,
    snapshot: Option<(PathBuf, u64)>,
}

impl Service {
    /// In-memory service with the wall clock.
    pub fn new(profile: GuidelineProfile) -> Self {
        Self::with_clock(profile, Box::new(SystemClock))
    }

    pub fn with_clock(profile: GuidelineProfile, clock: Box<dyn Clock>) -> Self {
        Self {
            inner: RwLock::new(Inner {
                state: State::default(),
                store: EventStore::in_memory(),
            }),
            profile,
            clock,
            snapshot: None,
        }
    }

    /// File-backed service. State comes from the snapshot (when present)
    /// plus the log entries after it.
    pub fn open(
        profile: GuidelineProfile,
        clock: Box<dyn Clock>,
        log: &Path,
        snapshot: Option<(&Path, u64)>,
    ) -> Result<Self, ServiceError> {
        let store = EventStore::open(log)?;
        let mut state = match snapshot {
            Some((p, _)) => read_snapshot(p)?.unwrap_or_default(),
            None => State::default(),
        };
        if state.seq as usize > store.entries().len() {
            return Err(ServiceError::Invalid(
                "snapshot is ahead of the event log".into(),
            ));
        }
        for e in &store.entries()[state.seq as usize..] {
            state.apply(e)?;
        }
        Ok(Self {
            inner: RwLock::new(Inner { state, store }),
            profile,
            clock,
            snapshot: snapshot.map(|(p, every)| (p.to_path_buf(), every.max(1))),
        })
    }

    pub fn profile(&self) -> &GuidelineProfile {
        &self.profile
    }

    fn read(&self) -> RwLockReadGuard<'_, Inner> {
        self.inner.read().unwrap_or_else(|e| e.into_inner())
    }

    fn write(&self) -> RwLockWriteGuard<'_, Inner> {
        self.inner.write().unwrap_or_else(|e| e.into_inner())
    }

    /// Applies and logs events one at a time. Commands validate first, so a
    /// rejected `apply` here is an internal error.
    fn commit(&self, inner: &mut Inner, events: Vec<Event>) -> Result<(), ServiceError> {
        for event in events {
            let entry = LogEntry {
                seq: inner.state.seq + 1,
                at: self.clock.now_ms(),
                event,
            };
            // `apply` checks before mutating, so a rejected event leaves the
            // state untouched.
            inner.state.apply(&entry)?;
            if let Err(e) = inner.store.append(entry) {
                inner.state = State::replay(inner.store.entries())?;
                return Err(e);
            }
            if let Some((path, every)) = &self.snapshot {
                if inner.state.seq.is_multiple_of(*every) {
                    write_snapshot(path, &inner.state)?;
                }
            }
        }
        Ok(())
    }

    /// Copy of the current state.
    pub fn state(&self) -> State {
        self.read().state.clone()
    }

    /// Copy of the log.
    pub fn log(&self) -> Vec<LogEntry> {
        self.read().store.entries().to_vec()
    }

    pub fn write_snapshot(&self, path: &Path) -> Result<(), ServiceError> {
        write_snapshot(path, &self.read().state)
    }

    /// Registers sentences without a gold level as the annotation pool.
    /// Already-registered ids are skipped. Returns how many were added.
    pub fn load_corpus(&self, corpus: &Corpus) -> Result<usize, ServiceError> {
        let mut inner = self.write();
        let events: Vec<Event> = corpus
            .sentences()
            .filter(|s| s.level.is_none() && !s.excluded)
            .filter(|s| !inner.state.sentences.contains_key(&s.id))
            .map(|s| Event::SentenceRegistered {
                sentence_id: s.id.clone(),
                doc_id: s.doc_id.clone(),
                text: s.text.clone(),
                split: corpus.split_of(s),
            })
            .collect();
        let n = events.len();
        self.commit(&mut inner, events)?;
        Ok(n)
    }

    pub fn register_sentence(
        &self,
        sentence_id: &str,
        doc_id: &str,
        text: &str,
        split: Split,
    ) -> Result<(), ServiceError> {
        let mut inner = self.write();
        if inner.state.sentences.contains_key(sentence_id) {
            return Err(ServiceError::Invalid(format!(
                "sentence {sentence_id} already registered"
            )));
        }
        self.commit(
            &mut inner,
            vec![Event::SentenceRegistered {
                sentence_id: sentence_id.into(),
                doc_id: doc_id.into(),
                text: text.into(),
                split,
            }],
        )
    }

    /// Draws sentences without replacement from the unreserved, unannotated
    /// pool. The draw depends only on the seed and the pool's ids.
    pub fn create_batch(&self, req: &CreateBatch) -> Result<Batch, ServiceError> {
        if req.annotators.is_empty() || req.annotators.iter().any(|a| a.trim().is_empty()) {
            return Err(ServiceError::Invalid("a batch needs annotator ids".into()));
        }
        let mut annotators = req.annotators.clone();
        annotators.sort();
        annotators.dedup();
        let size = req.size.unwrap_or(DEFAULT_BATCH_SIZE);
        if size == 0 {
            return Err(ServiceError::Invalid("batch size must be positive".into()));
        }
        let mut inner = self.write();
        let pool: Vec<&String> = inner
            .state
            .sentences
            .values()
            .filter(|s| s.batch.is_none() && s.history.is_empty())
            .map(|s| &s.id)
            .collect();
        if pool.is_empty() || (pool.len() < size && !req.allow_partial) {
            return Err(ServiceError::InsufficientPool {
                requested: size,
                available: pool.len(),
            });
        }
        let take = size.min(pool.len());
        let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
        let mut picked: Vec<String> = rand::seq::index::sample(&mut rng, pool.len(), take)
            .into_iter()
            .map(|i| pool[i].clone())
            .collect();
        picked.sort();
        let batch_id = format!("batch-{:05}", inner.state.batches.len() + 1);
        self.commit(
            &mut inner,
            vec![Event::BatchCreated {
                batch_id: batch_id.clone(),
                annotators,
                sentence_ids: picked,
            }],
        )?;
        Ok(inner.state.batches[&batch_id].clone())
    }

    pub fn batches_for(&self, annotator: &str) -> Vec<Batch> {
        self.read()
            .state
            .batches
            .values()
            .filter(|b| b.annotators.iter().any(|a| a == annotator))
            .cloned()
            .collect()
    }

    pub fn batch(&self, id: &str) -> Result<Batch, ServiceError> {
        self.read()
            .state
            .batches
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("batch {id}")))
    }

    fn features(
        &self,
        text: &str,
        asserted: &[String],
    ) -> Result<SentenceFeatures, ServiceError> {
        let mut features = self.profile.detect(text);
        for id in asserted {
            let dim = self
                .profile
                .asserted_features()
                .get(id)
                .ok_or_else(|| ServiceError::Invalid(format!("unknown asserted feature {id:?}")))?;
            features = features.with_asserted(id.clone(), *dim);
        }
        Ok(features)
    }

    /// Stateless check of a candidate level.
    pub fn validate(&self, req: &ValidateRequest) -> Result<ValidateResponse, ServiceError> {
        let features = self.features(&req.text, &req.asserted_features)?;
        Ok(ValidateResponse {
            word_count: features.word_count,
            judgment: validate_choice(req.level, &features, &self.profile),
            features,
        })
    }

    /// Stores an annotation. Validation feedback is advisory and never
    /// blocks the write.
    pub fn submit_annotation(
        &self,
        annotation: AnnotationEvent,
    ) -> Result<AnnotationResponse, ServiceError> {
        let mut inner = self.write();
        let s = inner
            .state
            .sentences
            .get(&annotation.sentence_id)
            .ok_or_else(|| ServiceError::NotFound(format!("sentence {}", annotation.sentence_id)))?;
        let open_batch = s
            .batch
            .as_ref()
            .and_then(|b| inner.state.batches.get(b))
            .filter(|b| {
                b.status == BatchStatus::Open
                    && b.annotators.contains(&annotation.annotator)
                    && !b.submitted_by.contains(&annotation.annotator)
            });
        if open_batch.is_none() {
            return Err(ServiceError::Unauthorized(format!(
                "sentence {} is not in an open batch of {}",
                annotation.sentence_id, annotation.annotator
            )));
        }
        let expected = s.version(&annotation.annotator) + 1;
        if annotation.version != expected {
            return Err(ServiceError::Conflict {
                expected,
                latest: s.latest(&annotation.annotator).cloned().map(Box::new),
            });
        }
        if annotation.level.is_none() && annotation.flags.is_empty() {
            return Err(ServiceError::Invalid(
                "an annotation needs a level or at least one flag".into(),
            ));
        }
        let features = self.features(&s.text, &annotation.asserted_features)?;
        let judgment = annotation
            .level
            .map(|l| validate_choice(l, &features, &self.profile));
        let sentence_id = annotation.sentence_id.clone();
        self.commit(
            &mut inner,
            vec![Event::AnnotationSubmitted {
                annotation: annotation.clone(),
            }],
        )?;
        let status = inner.state.status(&inner.state.sentences[&sentence_id]);
        Ok(AnnotationResponse {
            annotation,
            word_count: features.word_count,
            judgment,
            status,
        })
    }

    /// Closes the annotator's part of a batch. Every sentence must carry
    /// their annotation.
    pub fn submit_batch(&self, batch_id: &str, annotator: &str) -> Result<Batch, ServiceError> {
        let mut inner = self.write();
        let b = inner
            .state
            .batches
            .get(batch_id)
            .ok_or_else(|| ServiceError::NotFound(format!("batch {batch_id}")))?;
        if !b.annotators.iter().any(|a| a == annotator) {
            return Err(ServiceError::Unauthorized(format!(
                "{annotator} is not assigned batch {batch_id}"
            )));
        }
        if b.status != BatchStatus::Open || b.submitted_by.iter().any(|a| a == annotator) {
            return Err(ServiceError::Invalid(format!("batch {batch_id} is not open")));
        }
        let missing: Vec<&String> = b
            .sentence_ids
            .iter()
            .filter(|id| inner.state.sentences[*id].latest(annotator).is_none())
            .collect();
        if !missing.is_empty() {
            return Err(ServiceError::Invalid(format!(
                "{} sentence(s) not yet annotated, first {}",
                missing.len(),
                missing[0]
            )));
        }
        self.commit(
            &mut inner,
            vec![Event::BatchSubmitted {
                batch_id: batch_id.into(),
                annotator: annotator.into(),
            }],
        )?;
        Ok(inner.state.batches[batch_id].clone())
    }

    /// Returns an open batch's untouched sentences to the pool.
    pub fn release_batch(&self, batch_id: &str) -> Result<Batch, ServiceError> {
        let mut inner = self.write();
        let b = inner
            .state
            .batches
            .get(batch_id)
            .ok_or_else(|| ServiceError::NotFound(format!("batch {batch_id}")))?;
        if b.status != BatchStatus::Open {
            return Err(ServiceError::Invalid(format!("batch {batch_id} is not open")));
        }
        self.commit(
            &mut inner,
            vec![Event::BatchReleased {
                batch_id: batch_id.into(),
            }],
        )?;
        Ok(inner.state.batches[batch_id].clone())
    }

    pub fn sentence(&self, id: &str) -> Result<SentenceView, ServiceError> {
        let inner = self.read();
        let s = inner
            .state
            .sentences
            .get(id)
            .ok_or_else(|| ServiceError::NotFound(format!("sentence {id}")))?;
        Ok(SentenceView {
            id: s.id.clone(),
            doc_id: s.doc_id.clone(),
            text: s.text.clone(),
            word_count: s.word_count,
            split: s.split,
            status: inner.state.status(s),
            batch: s.batch.clone(),
            labels: s.labels(),
            history: s.history.clone(),
            unified: s.unified.as_ref().map(|u| u.record.clone()),
        })
    }

    /// Opens a round over sentences with at least two labels. The round's
    /// lead holds an advisory lock on those sentences until it closes.
    pub fn open_unification(&self, req: &OpenRound) -> Result<RoundView, ServiceError> {
        if req.sentence_ids.is_empty() {
            return Err(ServiceError::Invalid("a round needs sentences".into()));
        }
        let mut sentence_ids = req.sentence_ids.clone();
        sentence_ids.sort();
        sentence_ids.dedup();
        let mut annotators = req.annotators.clone();
        annotators.sort();
        annotators.dedup();
        let mut inner = self.write();
        for id in &sentence_ids {
            let s = inner
                .state
                .sentences
                .get(id)
                .ok_or_else(|| ServiceError::NotFound(format!("sentence {id}")))?;
            if let Some(r) = &s.round {
                return Err(ServiceError::Locked(format!("sentence {id} is held by {r}")));
            }
            let n = round_labels(s, &annotators).len();
            if n < 2 {
                return Err(ServiceError::Invalid(format!(
                    "sentence {id} has {n} label(s); unification needs 2"
                )));
            }
        }
        let round_id = format!("round-{:05}", inner.state.rounds.len() + 1);
        self.commit(
            &mut inner,
            vec![Event::UnificationOpened {
                round_id: round_id.clone(),
                lead: req.lead.clone(),
                sentence_ids,
                annotators,
            }],
        )?;
        round_view(&inner.state, &round_id)
    }

    pub fn round(&self, round_id: &str) -> Result<RoundView, ServiceError> {
        round_view(&self.read().state, round_id)
    }

    /// Records the unified label. A label outside the annotators' range is
    /// stored only with a rationale.
    pub fn record_ul(&self, round_id: &str, req: &RecordUl) -> Result<UlResponse, ServiceError> {
        let mut inner = self.write();
        let round = inner
            .state
            .rounds
            .get(round_id)
            .ok_or_else(|| ServiceError::NotFound(format!("round {round_id}")))?;
        if round.status != RoundStatus::Open {
            return Err(ServiceError::Invalid(format!("round {round_id} is closed")));
        }
        if round.lead != req.by {
            return Err(ServiceError::Locked(format!(
                "round {round_id} is held by {}",
                round.lead
            )));
        }
        if !round.sentence_ids.contains(&req.sentence_id) {
            return Err(ServiceError::Invalid(format!(
                "sentence {} is not part of round {round_id}",
                req.sentence_id
            )));
        }
        let labels = round_labels(&inner.state.sentences[&req.sentence_id], &round.annotators);
        let record = UnificationRecord::new(labels, req.ul)
            .map_err(|e| ServiceError::Invalid(e.to_string()))?;
        let mut warnings = Vec::new();
        if !record.within_range {
            warnings.push(format!(
                "unified label {} is outside the annotators' range {}..{}",
                req.ul, record.min, record.max
            ));
        }
        if !record.matches_annotator {
            warnings.push("unified label matches no annotator".to_string());
        }
        if !record.within_range && req.rationale.trim().is_empty() {
            return Err(ServiceError::RationaleRequired(warnings.join("; ")));
        }
        self.commit(
            &mut inner,
            vec![Event::UnifiedLabelRecorded {
                round_id: round_id.into(),
                sentence_id: req.sentence_id.clone(),
                ul: req.ul,
                rationale: req.rationale.clone(),
            }],
        )?;
        Ok(UlResponse { record, warnings })
    }

    pub fn close_round(&self, round_id: &str, by: &str) -> Result<RoundView, ServiceError> {
        let mut inner = self.write();
        let round = inner
            .state
            .rounds
            .get(round_id)
            .ok_or_else(|| ServiceError::NotFound(format!("round {round_id}")))?;
        if round.lead != by {
            return Err(ServiceError::Locked(format!(
                "round {round_id} is held by {}",
                round.lead
            )));
        }
        if round.status != RoundStatus::Open {
            return Err(ServiceError::Invalid(format!("round {round_id} is closed")));
        }
        self.commit(
            &mut inner,
            vec![Event::UnificationClosed {
                round_id: round_id.into(),
            }],
        )?;
        round_view(&inner.state, round_id)
    }

    pub fn export_bytes(&self, filter: &ExportFilter) -> Vec<u8> {
        self.read().state.export_bytes(filter)
    }
}

fn round_view(state: &State, round_id: &str) -> Result<RoundView, ServiceError> {
    let round = state
        .rounds
        .get(round_id)
        .ok_or_else(|| ServiceError::NotFound(format!("round {round_id}")))?;
    let sentences = round
        .sentence_ids
        .iter()
        .map(|id| {
            let s = &state.sentences[id];
            let labels = round_labels(s, &round.annotators);
            let values: Vec<Level> = labels.values().copied().collect();
            RoundSentence {
                sentence_id: id.clone(),
                text: s.text.clone(),
                mm: max_min_difference(&values),
                al: average_label(&values).expect("rounds need labels"),
                ul: s
                    .unified
                    .as_ref()
                    .filter(|u| u.round_id == round.id)
                    .map(|u| u.record.ul),
                labels,
            }
        })
        .collect();
    Ok(RoundView {
        round: round.clone(),
        sentences,
    })
}
