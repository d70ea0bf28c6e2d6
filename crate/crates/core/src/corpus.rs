//! Corpus data model, ingestion with validation, document-level splitting,
//! descriptive statistics and prediction scoring.
//!
//! Canonical storage is two line-delimited JSON files: one document record
//! per line and one sentence record per line. The `barec-v1` adapter reads
//! the public release's CSV/TSV layout.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Read, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::MetricError;
use crate::level::{Level, Readership, LEVEL_COUNT};
use crate::metrics::MetricReport;
use crate::level::LevelScheme;
use crate::par::pairwise_sum;
use crate::text::count_words;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    ArtsHumanities,
    SocialSciences,
    Stem,
}

impl Domain {
    pub const ALL: [Domain; 3] = [Domain::ArtsHumanities, Domain::SocialSciences, Domain::Stem];

    pub fn label(self) -> &'static str {
        match self {
            Domain::ArtsHumanities => "Arts & Humanities",
            Domain::SocialSciences => "Social Sciences",
            Domain::Stem => "STEM",
        }
    }
}

impl FromStr for Domain {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .to_ascii_lowercase()
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect();
        match key.as_str() {
            "artshumanities" | "artsandhumanities" => Ok(Domain::ArtsHumanities),
            "socialsciences" => Ok(Domain::SocialSciences),
            "stem" => Ok(Domain::Stem),
            _ => Err(format!("unknown domain {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
    #[default]
    Unassigned,
}

impl Split {
    /// The three real splits.
    pub const ASSIGNABLE: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
            Split::Unassigned => "unassigned",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "dev" | "validation" | "val" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            "unassigned" | "" => Ok(Split::Unassigned),
            _ => Err(format!("unknown split {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocumentRecord {
    pub id: String,
    #[serde(default)]
    pub source: String,
    pub domain: Domain,
    pub readership: Readership,
    #[serde(default)]
    pub split: Split,
    #[serde(default)]
    pub preassigned_split: bool,
}

/// Annotator-reported problem with a sentence.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Flag {
    SpellingError,
    Colloquial,
    Sensitive,
    Other { note: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SentenceRecord {
    pub id: String,
    pub doc_id: String,
    pub text: String,
    pub word_count: usize,
    /// Gold level; `None` for unannotated or excluded sentences.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<Level>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub annotator_labels: BTreeMap<String, Level>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<Flag>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub excluded: bool,
    /// Placed in its own split rather than its document's.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub iaa_distributed: bool,
    /// Only meaningful when `iaa_distributed` is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

impl SentenceRecord {
    /// Has a gold level and is not excluded.
    pub fn is_gold(&self) -> bool {
        self.level.is_some() && !self.excluded
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    Parse,
    DuplicateId,
    InvalidLevel,
    WordCountMismatch,
    UnknownDocument,
    ExcludedWithLevel,
    InconsistentDocument,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    /// Input name, e.g. "sentences".
    pub input: String,
    /// 1-based line (or row) number.
    pub line: Option<usize>,
    pub severity: Severity,
    pub kind: IssueKind,
    pub message: String,
}

/// Everything ingestion noticed. Rejected records appear here as errors;
/// nothing is dropped silently.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    fn push(
        &mut self,
        input: &str,
        line: Option<usize>,
        severity: Severity,
        kind: IssueKind,
        message: impl Into<String>,
    ) {
        self.issues.push(Issue {
            input: input.to_string(),
            line,
            severity,
            kind,
            message: message.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Warning)
    }

    pub fn has_errors(&self) -> bool {
        self.errors().next().is_some()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in &self.issues {
            let sev = match i.severity {
                Severity::Warning => "warning",
                Severity::Error => "error",
            };
            match i.line {
                Some(n) => writeln!(f, "{sev}: {}:{n}: {}", i.input, i.message)?,
                None => writeln!(f, "{sev}: {}: {}", i.input, i.message)?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("reading {input}: {source}")]
    Io {
        input: String,
        #[source]
        source: std::io::Error,
    },
    #[error("strict mode: ingestion reported {} error(s)\n{report}", report.errors().count())]
    Strict { report: ValidationReport },
    #[error("{0}")]
    Format(String),
}

/// Input layout understood by [`ingest`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Adapter {
    /// Line-delimited document and sentence records.
    Canonical,
    /// The public release's delimited layout, one row per sentence.
    BarecV1 { delimiter: u8 },
}

/// In-memory corpus, keyed by id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    documents: BTreeMap<String, DocumentRecord>,
    sentences: BTreeMap<String, SentenceRecord>,
}

impl Corpus {
    pub fn documents(&self) -> impl ExactSizeIterator<Item = &DocumentRecord> {
        self.documents.values()
    }

    pub fn sentences(&self) -> impl ExactSizeIterator<Item = &SentenceRecord> {
        self.sentences.values()
    }

    pub fn document(&self, id: &str) -> Option<&DocumentRecord> {
        self.documents.get(id)
    }

    pub fn sentence(&self, id: &str) -> Option<&SentenceRecord> {
        self.sentences.get(id)
    }

    pub fn sentence_mut(&mut self, id: &str) -> Option<&mut SentenceRecord> {
        self.sentences.get_mut(id)
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty() && self.documents.is_empty()
    }

    /// Effective split: the sentence's own when IAA-distributed, otherwise
    /// its document's.
    pub fn split_of(&self, s: &SentenceRecord) -> Split {
        match (s.iaa_distributed, s.split) {
            (true, Some(split)) => split,
            _ => self
                .documents
                .get(&s.doc_id)
                .map_or(Split::Unassigned, |d| d.split),
        }
    }

    /// Sentences in `split`, or all when `None`.
    pub fn sentences_in(&self, split: Option<Split>) -> impl Iterator<Item = &SentenceRecord> {
        self.sentences
            .values()
            .filter(move |s| split.is_none_or(|sp| self.split_of(s) == sp))
    }

    /// Builds a corpus from already-validated records.
    pub fn from_records(
        documents: impl IntoIterator<Item = DocumentRecord>,
        sentences: impl IntoIterator<Item = SentenceRecord>,
    ) -> (Self, ValidationReport) {
        let mut report = ValidationReport::default();
        let mut corpus = Corpus::default();
        for d in documents {
            corpus.insert_document(d, "documents", None, &mut report);
        }
        for s in sentences {
            corpus.insert_sentence(s, "sentences", None, &mut report);
        }
        (corpus, report)
    }

    fn insert_document(
        &mut self,
        d: DocumentRecord,
        input: &str,
        line: Option<usize>,
        report: &mut ValidationReport,
    ) {
        if self.documents.contains_key(&d.id) {
            report.push(
                input,
                line,
                Severity::Error,
                IssueKind::DuplicateId,
                format!("duplicate document id {:?}", d.id),
            );
            return;
        }
        self.documents.insert(d.id.clone(), d);
    }

    fn insert_sentence(
        &mut self,
        mut s: SentenceRecord,
        input: &str,
        line: Option<usize>,
        report: &mut ValidationReport,
    ) {
        if self.sentences.contains_key(&s.id) {
            report.push(
                input,
                line,
                Severity::Error,
                IssueKind::DuplicateId,
                format!("duplicate sentence id {:?}", s.id),
            );
            return;
        }
        if !self.documents.contains_key(&s.doc_id) {
            report.push(
                input,
                line,
                Severity::Error,
                IssueKind::UnknownDocument,
                format!("sentence {:?} refers to unknown document {:?}", s.id, s.doc_id),
            );
            return;
        }
        if s.excluded && s.level.is_some() {
            report.push(
                input,
                line,
                Severity::Error,
                IssueKind::ExcludedWithLevel,
                format!("excluded sentence {:?} carries a gold level", s.id),
            );
            return;
        }
        let derived = count_words(&s.text);
        if derived != s.word_count {
            report.push(
                input,
                line,
                Severity::Warning,
                IssueKind::WordCountMismatch,
                format!(
                    "sentence {:?}: stored word count {} but text has {derived}; using {derived}",
                    s.id, s.word_count
                ),
            );
            s.word_count = derived;
        }
        self.sentences.insert(s.id.clone(), s);
    }

    /// Sets document splits. Sentences follow their documents unless
    /// IAA-distributed.
    pub fn apply_split(&mut self, assignment: &BTreeMap<String, Split>) {
        for (id, split) in assignment {
            if let Some(d) = self.documents.get_mut(id) {
                d.split = *split;
            }
        }
    }

    /// Writes the document table, one record per line, sorted by id.
    pub fn write_documents(&self, mut out: impl Write) -> std::io::Result<()> {
        for d in self.documents.values() {
            serde_json::to_writer(&mut out, d)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Writes sentence records, one per line, sorted by id.
    pub fn write_sentences(&self, mut out: impl Write) -> std::io::Result<()> {
        for s in self.sentences.values() {
            serde_json::to_writer(&mut out, s)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn read_lines(reader: impl BufRead, input: &str) -> Result<Vec<(usize, String)>, IngestError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| IngestError::Io {
            input: input.to_string(),
            source,
        })?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

/// Checks a `level` field on its own so a bad level is reported as such
/// rather than as a generic parse failure.
fn take_level(
    value: &mut serde_json::Value,
    field: &str,
) -> Result<Option<Level>, String> {
    let Some(obj) = value.as_object_mut() else {
        return Ok(None);
    };
    match obj.remove(field) {
        None | Some(serde_json::Value::Null) => Ok(None),
        Some(v) => Level::deserialize(v.clone())
            .map(Some)
            .map_err(|_| format!("invalid level {v}")),
    }
}

/// Reads the canonical layout.
pub fn ingest_canonical(
    documents: impl BufRead,
    sentences: impl BufRead,
) -> Result<(Corpus, ValidationReport), IngestError> {
    let mut report = ValidationReport::default();
    let mut corpus = Corpus::default();
    for (line, text) in read_lines(documents, "documents")? {
        match serde_json::from_str::<DocumentRecord>(&text) {
            Ok(d) => corpus.insert_document(d, "documents", Some(line), &mut report),
            Err(e) => report.push(
                "documents",
                Some(line),
                Severity::Error,
                IssueKind::Parse,
                e.to_string(),
            ),
        }
    }
    for (line, text) in read_lines(sentences, "sentences")? {
        let parsed = serde_json::from_str::<serde_json::Value>(&text)
            .map_err(|e| (IssueKind::Parse, e.to_string()))
            .and_then(|mut v| {
                let level =
                    take_level(&mut v, "level").map_err(|m| (IssueKind::InvalidLevel, m))?;
                let mut s: SentenceRecord =
                    serde_json::from_value(v).map_err(|e| (IssueKind::Parse, e.to_string()))?;
                s.level = level;
                Ok(s)
            });
        match parsed {
            Ok(s) => corpus.insert_sentence(s, "sentences", Some(line), &mut report),
            Err((kind, message)) => {
                report.push("sentences", Some(line), Severity::Error, kind, message)
            }
        }
    }
    Ok((corpus, report))
}

/// Column names of the release layout. Only the first four are required.
pub mod barec_columns {
    pub const ID: &str = "ID";
    pub const DOCUMENT: &str = "Document";
    pub const SENTENCE: &str = "Sentence";
    /// Either this or [`LEVEL_19`] must be present.
    pub const LEVEL: &str = "Readability_Level";
    pub const LEVEL_19: &str = "Readability_Level_19";
    pub const WORD_COUNT: &str = "Word_Count";
    pub const SOURCE: &str = "Source";
    pub const DOMAIN: &str = "Domain";
    pub const READERSHIP: &str = "Text_Class";
    pub const SPLIT: &str = "Split";
}

/// Reads the release layout: one row per sentence, document attributes
/// repeated on every row. A `Split` column, when present, marks documents
/// as preassigned; sentences whose split differs from their document's
/// majority are marked IAA-distributed.
pub fn ingest_barec(
    reader: impl Read,
    delimiter: u8,
) -> Result<(Corpus, ValidationReport), IngestError> {
    use barec_columns as col;
    const INPUT: &str = "barec";
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| IngestError::Format(format!("reading header: {e}")))?
        .clone();
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let need = |name: &str| {
        find(name).ok_or_else(|| IngestError::Format(format!("missing column {name:?}")))
    };
    let id_col = need(col::ID)?;
    let doc_col = need(col::DOCUMENT)?;
    let text_col = need(col::SENTENCE)?;
    let level_col = find(col::LEVEL_19)
        .or_else(|| find(col::LEVEL))
        .ok_or_else(|| IngestError::Format(format!("missing column {:?}", col::LEVEL)))?;
    let wc_col = find(col::WORD_COUNT);
    let source_col = find(col::SOURCE);
    let domain_col = find(col::DOMAIN);
    let readership_col = find(col::READERSHIP);
    let split_col = find(col::SPLIT);

    let mut report = ValidationReport::default();
    let mut docs: BTreeMap<String, DocumentRecord> = BTreeMap::new();
    let mut doc_splits: BTreeMap<String, BTreeMap<Split, usize>> = BTreeMap::new();
    let mut rows: Vec<(usize, SentenceRecord, Option<Split>)> = Vec::new();

    for (i, rec) in rdr.records().enumerate() {
        // Row 1 is the header.
        let line = i + 2;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                report.push(INPUT, Some(line), Severity::Error, IssueKind::Parse, e.to_string());
                continue;
            }
        };
        let get = |c: Option<usize>| c.and_then(|c| rec.get(c)).map(str::trim).unwrap_or("");
        let id = get(Some(id_col)).to_string();
        let doc_id = get(Some(doc_col)).to_string();
        if id.is_empty() || doc_id.is_empty() {
            report.push(
                INPUT,
                Some(line),
                Severity::Error,
                IssueKind::Parse,
                "empty ID or Document",
            );
            continue;
        }
        let level = match Level::parse(get(Some(level_col))) {
            Ok(l) => l,
            Err(e) => {
                report.push(INPUT, Some(line), Severity::Error, IssueKind::InvalidLevel, e.to_string());
                continue;
            }
        };
        let text = rec.get(text_col).unwrap_or("").to_string();
        let word_count = match get(wc_col) {
            "" => count_words(&text),
            n => match n.parse() {
                Ok(n) => n,
                Err(_) => {
                    report.push(
                        INPUT,
                        Some(line),
                        Severity::Warning,
                        IssueKind::Parse,
                        format!("unreadable word count {n:?}"),
                    );
                    count_words(&text)
                }
            },
        };
        let split = match get(split_col) {
            "" => None,
            s => match s.parse::<Split>() {
                Ok(s) => Some(s),
                Err(e) => {
                    report.push(INPUT, Some(line), Severity::Error, IssueKind::Parse, e);
                    continue;
                }
            },
        };
        let doc_fields = (|| -> Result<DocumentRecord, String> {
            Ok(DocumentRecord {
                id: doc_id.clone(),
                source: get(source_col).to_string(),
                domain: get(domain_col).parse()?,
                readership: get(readership_col).parse()?,
                split: Split::Unassigned,
                preassigned_split: false,
            })
        })();
        match (docs.get(&doc_id), doc_fields) {
            (None, Ok(d)) => {
                docs.insert(doc_id.clone(), d);
            }
            (None, Err(e)) => {
                report.push(INPUT, Some(line), Severity::Error, IssueKind::Parse, e);
                continue;
            }
            (Some(existing), Ok(d)) => {
                if existing.domain != d.domain
                    || existing.readership != d.readership
                    || existing.source != d.source
                {
                    report.push(
                        INPUT,
                        Some(line),
                        Severity::Warning,
                        IssueKind::InconsistentDocument,
                        format!("document {doc_id:?} attributes differ from its first row"),
                    );
                }
            }
            (Some(_), Err(e)) => report.push(
                INPUT,
                Some(line),
                Severity::Warning,
                IssueKind::InconsistentDocument,
                e,
            ),
        }
        if let Some(sp) = split {
            *doc_splits.entry(doc_id.clone()).or_default().entry(sp).or_default() += 1;
        }
        rows.push((
            line,
            SentenceRecord {
                id,
                doc_id,
                text,
                word_count,
                level: Some(level),
                annotator_labels: BTreeMap::new(),
                flags: Vec::new(),
                excluded: false,
                iaa_distributed: false,
                split: None,
            },
            split,
        ));
    }

    for (doc_id, counts) in &doc_splits {
        // Majority split; ties favour train, then dev, then test.
        let (&split, _) = counts
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .expect("nonempty");
        if let Some(d) = docs.get_mut(doc_id) {
            d.split = split;
            d.preassigned_split = true;
        }
    }
    let mut corpus = Corpus::default();
    for d in docs.into_values() {
        corpus.insert_document(d, INPUT, None, &mut report);
    }
    for (line, mut s, split) in rows {
        let doc_split = corpus.documents[&s.doc_id].split;
        if let Some(sp) = split.filter(|sp| *sp != doc_split) {
            s.iaa_distributed = true;
            s.split = Some(sp);
        }
        corpus.insert_sentence(s, INPUT, Some(line), &mut report);
    }
    Ok((corpus, report))
}

/// Ingests under `adapter`. In strict mode any error-level issue is fatal.
pub fn ingest(
    adapter: Adapter,
    documents: Option<&mut dyn BufRead>,
    sentences: &mut dyn BufRead,
    strict: bool,
) -> Result<(Corpus, ValidationReport), IngestError> {
    let (corpus, report) = match adapter {
        Adapter::Canonical => {
            let docs = documents.ok_or_else(|| {
                IngestError::Format("the canonical layout needs a documents file".into())
            })?;
            ingest_canonical(docs, sentences)?
        }
        Adapter::BarecV1 { delimiter } => ingest_barec(sentences, delimiter)?,
    };
    if strict && report.has_errors() {
        return Err(IngestError::Strict { report });
    }
    Ok((corpus, report))
}

#[derive(Debug, Error, PartialEq)]
pub enum SplitError {
    #[error("proportions must be non-negative and sum to 1, got {0:?}")]
    BadProportions([f64; 3]),
    #[error("preassignment names unknown document(s): {0:?}")]
    UnknownDocuments(Vec<String>),
    #[error("documents cannot be preassigned to the unassigned split: {0:?}")]
    UnassignedTarget(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitConfig {
    /// Train, dev and test shares of the word count.
    pub proportions: [f64; 3],
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            proportions: [0.8, 0.1, 0.1],
            seed: 0,
        }
    }
}

/// Assigns every document to train, dev or test.
///
/// Documents already marked `preassigned_split`, and those in `extra`, keep
/// their split. The rest are sorted by id, shuffled with `seed`, then each
/// goes to the split furthest below its word-count target (ties: train,
/// dev, test).
pub fn split_documents(
    corpus: &Corpus,
    config: &SplitConfig,
    extra: &BTreeMap<String, Split>,
) -> Result<BTreeMap<String, Split>, SplitError> {
    let p = config.proportions;
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(SplitError::BadProportions(p));
    }
    let unknown: Vec<String> = extra
        .keys()
        .filter(|id| corpus.document(id).is_none())
        .cloned()
        .collect();
    if !unknown.is_empty() {
        return Err(SplitError::UnknownDocuments(unknown));
    }
    let unassigned: Vec<String> = extra
        .iter()
        .filter(|(_, s)| **s == Split::Unassigned)
        .map(|(id, _)| id.clone())
        .collect();
    if !unassigned.is_empty() {
        return Err(SplitError::UnassignedTarget(unassigned));
    }

    let mut words: BTreeMap<&str, u64> = BTreeMap::new();
    for s in corpus.sentences() {
        *words.entry(s.doc_id.as_str()).or_default() += s.word_count as u64;
    }
    let total: u64 = corpus
        .documents()
        .map(|d| words.get(d.id.as_str()).copied().unwrap_or(0))
        .sum();
    let targets: Vec<f64> = p.iter().map(|x| x * total as f64).collect();
    let mut assigned = [0u64; 3];
    let slot = |s: Split| Split::ASSIGNABLE.iter().position(|x| *x == s);

    let mut out = BTreeMap::new();
    let mut free: Vec<&str> = Vec::new();
    for d in corpus.documents() {
        let fixed = extra
            .get(&d.id)
            .copied()
            .or_else(|| (d.preassigned_split && d.split != Split::Unassigned).then_some(d.split));
        match fixed {
            Some(split) => {
                if let Some(i) = slot(split) {
                    assigned[i] += words.get(d.id.as_str()).copied().unwrap_or(0);
                }
                out.insert(d.id.clone(), split);
            }
            None => free.push(&d.id),
        }
    }
    // `documents()` iterates in id order already.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    free.shuffle(&mut rng);
    for id in free {
        let mut best = 0;
        for i in 1..3 {
            let deficit = |k: usize| targets[k] - assigned[k] as f64;
            if deficit(i) > deficit(best) {
                best = i;
            }
        }
        assigned[best] += words.get(id).copied().unwrap_or(0);
        out.insert(id.to_string(), Split::ASSIGNABLE[best]);
    }
    Ok(out)
}

/// Documents, sentences and words in one cell of a breakdown.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub documents: usize,
    pub sentences: usize,
    pub words: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    /// Gold sentences only.
    pub total: Counts,
    pub excluded_sentences: usize,
    pub unannotated_sentences: usize,
    /// Indexed by level - 1.
    pub level_counts: Vec<usize>,
    pub level_counts_by_split: BTreeMap<Split, Vec<usize>>,
    pub by_split: BTreeMap<Split, Counts>,
    #[serde(with = "cell_entries")]
    pub by_domain_readership: BTreeMap<(Domain, Readership), Counts>,
    /// Mean words per sentence at each level, `None` where a level is empty.
    pub mean_words_by_level: Vec<Option<f64>>,
    /// Pearson r between level index and word count over sentences.
    pub pearson_sentence: Option<f64>,
    /// Pearson r between level index and per-level mean word count.
    pub pearson_level_means: Option<f64>,
}

/// Tuple-keyed maps as a list of `{domain, readership, counts}` entries.
mod cell_entries {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Entry {
        domain: Domain,
        readership: Readership,
        #[serde(flatten)]
        counts: Counts,
    }

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<(Domain, Readership), Counts>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        s.collect_seq(map.iter().map(|(&(domain, readership), &counts)| Entry {
            domain,
            readership,
            counts,
        }))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<(Domain, Readership), Counts>, D::Error> {
        let entries = Vec::<Entry>::deserialize(d)?;
        Ok(entries
            .into_iter()
            .map(|e| ((e.domain, e.readership), e.counts))
            .collect())
    }
}

/// Pearson correlation; `None` with fewer than two points or zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = pairwise_sum(x) / n;
    let my = pairwise_sum(y) / n;
    let dx: Vec<f64> = x.iter().map(|v| v - mx).collect();
    let dy: Vec<f64> = y.iter().map(|v| v - my).collect();
    let sxy = pairwise_sum(&dx.iter().zip(&dy).map(|(a, b)| a * b).collect::<Vec<_>>());
    let sxx = pairwise_sum(&dx.iter().map(|a| a * a).collect::<Vec<_>>());
    let syy = pairwise_sum(&dy.iter().map(|b| b * b).collect::<Vec<_>>());
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Descriptive statistics over gold sentences.
pub fn stats(corpus: &Corpus) -> CorpusStats {
    let k = LEVEL_COUNT as usize;
    let mut level_counts = vec![0usize; k];
    let mut by_split_levels: BTreeMap<Split, Vec<usize>> = BTreeMap::new();
    let mut by_split: BTreeMap<Split, Counts> = BTreeMap::new();
    let mut by_cell: BTreeMap<(Domain, Readership), Counts> = BTreeMap::new();
    let mut words_by_level = vec![0usize; k];
    let mut total = Counts::default();
    let mut excluded = 0;
    let mut unannotated = 0;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut docs_seen: BTreeSet<&str> = BTreeSet::new();
    let mut split_docs: BTreeSet<(Split, &str)> = BTreeSet::new();

    for s in corpus.sentences() {
        if s.excluded {
            excluded += 1;
            continue;
        }
        let Some(level) = s.level else {
            unannotated += 1;
            continue;
        };
        let i = level.index() as usize - 1;
        let split = corpus.split_of(s);
        level_counts[i] += 1;
        words_by_level[i] += s.word_count;
        by_split_levels.entry(split).or_insert_with(|| vec![0; k])[i] += 1;
        xs.push(level.index() as f64);
        ys.push(s.word_count as f64);

        total.sentences += 1;
        total.words += s.word_count;
        let sc = by_split.entry(split).or_default();
        sc.sentences += 1;
        sc.words += s.word_count;
        if split_docs.insert((split, &s.doc_id)) {
            sc.documents += 1;
        }
        if let Some(doc) = corpus.document(&s.doc_id) {
            let cell = by_cell.entry((doc.domain, doc.readership)).or_default();
            cell.sentences += 1;
            cell.words += s.word_count;
            if docs_seen.insert(&s.doc_id) {
                cell.documents += 1;
                total.documents += 1;
            }
        }
    }

    let mean_words_by_level: Vec<Option<f64>> = (0..k)
        .map(|i| (level_counts[i] > 0).then(|| words_by_level[i] as f64 / level_counts[i] as f64))
        .collect();
    let (lx, ly): (Vec<f64>, Vec<f64>) = mean_words_by_level
        .iter()
        .enumerate()
        .filter_map(|(i, m)| m.map(|m| ((i + 1) as f64, m)))
        .unzip();
    CorpusStats {
        total,
        excluded_sentences: excluded,
        unannotated_sentences: unannotated,
        level_counts,
        level_counts_by_split: by_split_levels,
        by_split,
        by_domain_readership: by_cell,
        mean_words_by_level,
        pearson_sentence: pearson(&xs, &ys),
        pearson_level_means: pearson(&lx, &ly),
    }
}

impl CorpusStats {
    /// Level distribution rows: level, count, share, then per-split counts.
    pub fn level_table(&self) -> (Vec<String>, Vec<Vec<String>>) {
        let splits: Vec<Split> = self.level_counts_by_split.keys().copied().collect();
        let mut header = vec!["Level".to_string(), "Sentences".into(), "%".into()];
        header.extend(splits.iter().map(|s| s.to_string()));
        header.push("Mean words".into());
        let total = self.total.sentences.max(1) as f64;
        let rows = Level::all()
            .map(|l| {
                let i = l.index() as usize - 1;
                let mut row = vec![
                    l.name().to_string(),
                    self.level_counts[i].to_string(),
                    format!("{:.0}%", 100.0 * self.level_counts[i] as f64 / total),
                ];
                row.extend(
                    splits
                        .iter()
                        .map(|s| self.level_counts_by_split[s][i].to_string()),
                );
                row.push(
                    self.mean_words_by_level[i].map_or("-".into(), |m| format!("{m:.1}")),
                );
                row
            })
            .collect();
        (header, rows)
    }

    /// Domain × readership rows with document, sentence and word counts.
    pub fn domain_table(&self) -> (Vec<String>, Vec<Vec<String>>) {
        let header = ["Domain", "Readership", "Documents", "Sentences", "Words"]
            .map(String::from)
            .to_vec();
        let mut rows: Vec<Vec<String>> = self
            .by_domain_readership
            .iter()
            .map(|((d, r), c)| {
                vec![
                    d.label().to_string(),
                    r.label().to_string(),
                    c.documents.to_string(),
                    c.sentences.to_string(),
                    c.words.to_string(),
                ]
            })
            .collect();
        rows.push(vec![
            "Total".into(),
            String::new(),
            self.total.documents.to_string(),
            self.total.sentences.to_string(),
            self.total.words.to_string(),
        ]);
        (header, rows)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PredictionError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: duplicate prediction for {id:?}")]
    Duplicate { line: usize, id: String },
}

/// Reads predictions as tab-separated `id<TAB>level` lines (an `id` header
/// line is skipped) or as JSON lines `{"id": ..., "level": ...}`.
pub fn read_predictions(reader: impl BufRead) -> Result<BTreeMap<String, Level>, PredictionError> {
    #[derive(Deserialize)]
    struct Row {
        id: String,
        level: Level,
    }
    let mut out = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| PredictionError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let (id, level) = if trimmed.starts_with('{') {
            let row: Row = serde_json::from_str(trimmed).map_err(|e| PredictionError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            (row.id, row.level)
        } else {
            let mut parts = trimmed.split('\t');
            let id = parts.next().unwrap_or("").trim();
            let level = parts.next().unwrap_or("").trim();
            if out.is_empty() && id.eq_ignore_ascii_case("id") {
                continue;
            }
            let level = Level::parse(level).map_err(|e| PredictionError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            (id.to_string(), level)
        };
        if out.insert(id.clone(), level).is_some() {
            return Err(PredictionError::Duplicate { line: line_no, id });
        }
    }
    Ok(out)
}

#[derive(Debug, Error, PartialEq)]
pub enum ScoreError {
    #[error("predictions do not match the gold ids: {} missing, {} extra", missing.len(), extra.len())]
    Coverage {
        missing: Vec<String>,
        extra: Vec<String>,
    },
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreOutcome {
    pub report: MetricReport,
    pub scored: usize,
    /// Gold ids without a prediction.
    pub missing: Vec<String>,
    /// Predicted ids outside the gold set.
    pub extra: Vec<String>,
}

/// Scores predictions against gold sentences of `split` (all splits when
/// `None`). Coverage gaps are fatal unless `lenient`, which scores the
/// intersection and lists the gaps.
pub fn score_predictions(
    corpus: &Corpus,
    split: Option<Split>,
    predictions: &BTreeMap<String, Level>,
    lenient: bool,
    scheme: &LevelScheme,
) -> Result<ScoreOutcome, ScoreError> {
    let gold: BTreeMap<&str, Level> = corpus
        .sentences_in(split)
        .filter_map(|s| Some((s.id.as_str(), s.level.filter(|_| !s.excluded)?)))
        .collect();
    let missing: Vec<String> = gold
        .keys()
        .filter(|id| !predictions.contains_key(**id))
        .map(|id| id.to_string())
        .collect();
    let extra: Vec<String> = predictions
        .keys()
        .filter(|id| !gold.contains_key(id.as_str()))
        .cloned()
        .collect();
    if !lenient && (!missing.is_empty() || !extra.is_empty()) {
        return Err(ScoreError::Coverage { missing, extra });
    }
    let (r, h): (Vec<Level>, Vec<Level>) = gold
        .iter()
        .filter_map(|(id, g)| Some((*g, *predictions.get(*id)?)))
        .unzip();
    Ok(ScoreOutcome {
        report: MetricReport::compute(&r, &h, scheme)?,
        scored: r.len(),
        missing,
        extra,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str) -> DocumentRecord {
        DocumentRecord {
            id: id.into(),
            source: "src".into(),
            domain: Domain::Stem,
            readership: Readership::Advanced,
            split: Split::Unassigned,
            preassigned_split: false,
        }
    }

    fn sent(id: &str, doc: &str, text: &str, level: Option<u8>) -> SentenceRecord {
        SentenceRecord {
            id: id.into(),
            doc_id: doc.into(),
            text: text.into(),
            word_count: count_words(text),
            level: level.map(|l| Level::new(l).unwrap()),
            annotator_labels: BTreeMap::new(),
            flags: vec![],
            excluded: false,
            iaa_distributed: false,
            split: None,
        }
    }

    #[test]
    fn empty_stream() {
        let (c, r) = ingest_canonical(&b""[..], &b""[..]).unwrap();
        assert!(c.is_empty());
        assert!(r.is_empty());
    }

    #[test]
    fn canonical_issues_are_reported() {
        let docs = r#"{"id":"d1","domain":"stem","readership":"advanced"}
{"id":"d1","domain":"stem","readership":"advanced"}
{"id":"d2","domain":"physics","readership":"advanced"}
"#;
        let sents = r#"{"id":"s1","doc_id":"d1","text":"كتب الولد","word_count":5,"level":3}
{"id":"s1","doc_id":"d1","text":"كتب","word_count":1,"level":3}
{"id":"s2","doc_id":"d1","text":"كتب","word_count":1,"level":25}
{"id":"s3","doc_id":"zz","text":"كتب","word_count":1}
not json
{"id":"s4","doc_id":"d1","text":"كتب","word_count":1,"level":"4-dal","excluded":true}
"#;
        let (c, r) = ingest_canonical(docs.as_bytes(), sents.as_bytes()).unwrap();
        let kinds: Vec<(Option<usize>, IssueKind)> =
            r.issues.iter().map(|i| (i.line, i.kind)).collect();
        assert_eq!(
            kinds,
            vec![
                (Some(2), IssueKind::DuplicateId),
                (Some(3), IssueKind::Parse),
                (Some(1), IssueKind::WordCountMismatch),
                (Some(2), IssueKind::DuplicateId),
                (Some(3), IssueKind::InvalidLevel),
                (Some(4), IssueKind::UnknownDocument),
                (Some(5), IssueKind::Parse),
                (Some(6), IssueKind::ExcludedWithLevel),
            ]
        );
        assert_eq!(r.warnings().count(), 1);
        assert_eq!(c.sentence("s1").unwrap().word_count, 2);
        assert_eq!(c.sentences().len(), 1);

        let mut d: &[u8] = docs.as_bytes();
        let mut s: &[u8] = sents.as_bytes();
        assert!(matches!(
            ingest(Adapter::Canonical, Some(&mut d), &mut s, true),
            Err(IngestError::Strict { .. })
        ));
    }

    #[test]
    fn canonical_round_trip() {
        let mut s2 = sent("s2", "d2", "ذهبت إلى المدرسة", Some(5));
        s2.flags = vec![Flag::Other { note: "typo?".into() }];
        let mut s3 = sent("s3", "d1", "كلام عامي", None);
        s3.flags = vec![Flag::Colloquial];
        s3.excluded = true;
        let mut s4 = sent("s4", "d1", "جملة", Some(2));
        s4.iaa_distributed = true;
        s4.split = Some(Split::Test);
        s4.annotator_labels.insert("A1".into(), Level::new(2).unwrap());
        let mut d1 = doc("d1");
        d1.split = Split::Train;
        d1.preassigned_split = true;
        let (c, r) = Corpus::from_records(
            [d1, doc("d2")],
            [sent("s1", "d1", "كتب الولد", Some(3)), s2, s3, s4],
        );
        assert!(r.is_empty());
        let mut docs = Vec::new();
        let mut sents = Vec::new();
        c.write_documents(&mut docs).unwrap();
        c.write_sentences(&mut sents).unwrap();
        let (back, r) = ingest_canonical(&docs[..], &sents[..]).unwrap();
        assert!(r.is_empty(), "{r}");
        assert_eq!(back, c);
        assert_eq!(back.split_of(back.sentence("s4").unwrap()), Split::Test);
        assert_eq!(back.split_of(back.sentence("s1").unwrap()), Split::Train);
    }

    #[test]
    fn barec_adapter() {
        let tsv = "ID\tDocument\tSource\tDomain\tText_Class\tSentence\tWord_Count\tReadability_Level\tSplit\n\
                   1\tdocA\tBook\tArts & Humanities\tFoundational\tكتب الولد\t2\t3-jim\ttrain\n\
                   2\tdocA\tBook\tArts & Humanities\tFoundational\tذهب\t1\t1\ttrain\n\
                   3\tdocA\tBook\tArts & Humanities\tFoundational\tذهب\t1\t2\ttest\n\
                   4\tdocB\tMag\tSTEM\tSpecialized\tعلم\t1\t20\tdev\n\
                   5\tdocC\tMag\tChemistry\tSpecialized\tعلم\t1\t4\tdev\n";
        let (c, r) = ingest_barec(tsv.as_bytes(), b'\t').unwrap();
        let kinds: Vec<IssueKind> = r.issues.iter().map(|i| i.kind).collect();
        assert_eq!(kinds, vec![IssueKind::InvalidLevel, IssueKind::Parse]);
        assert_eq!(c.documents().len(), 1);
        let d = c.document("docA").unwrap();
        assert_eq!(d.split, Split::Train);
        assert!(d.preassigned_split);
        assert_eq!(d.domain, Domain::ArtsHumanities);
        let s3 = c.sentence("3").unwrap();
        assert!(s3.iaa_distributed);
        assert_eq!(c.split_of(s3), Split::Test);
        assert_eq!(c.sentence("1").unwrap().level, Some(Level::new(3).unwrap()));

        let missing = "ID\tSentence\n1\tx\n";
        assert!(matches!(ingest_barec(missing.as_bytes(), b'\t'), Err(IngestError::Format(_))));
    }

    fn equal_docs(n: usize) -> Corpus {
        let docs: Vec<_> = (0..n).map(|i| doc(&format!("d{i:02}"))).collect();
        let sents: Vec<_> = (0..n)
            .map(|i| sent(&format!("s{i:02}"), &format!("d{i:02}"), "كلمة كلمة كلمة", Some(4)))
            .collect();
        Corpus::from_records(docs, sents).0
    }

    #[test]
    fn ten_equal_documents() {
        let c = equal_docs(10);
        for seed in 0..20 {
            let a = split_documents(&c, &SplitConfig { seed, ..Default::default() }, &BTreeMap::new())
                .unwrap();
            let count = |s| a.values().filter(|v| **v == s).count();
            assert_eq!((count(Split::Train), count(Split::Dev), count(Split::Test)), (8, 1, 1));
        }
    }

    #[test]
    fn split_is_seeded_and_respects_preassignment() {
        let c = equal_docs(30);
        let cfg = SplitConfig { seed: 7, ..Default::default() };
        let mut pre = BTreeMap::new();
        pre.insert("d05".to_string(), Split::Test);
        let a = split_documents(&c, &cfg, &pre).unwrap();
        let b = split_documents(&c, &cfg, &pre).unwrap();
        assert_eq!(a, b);
        assert_eq!(a["d05"], Split::Test);
        assert_eq!(a.len(), 30);
        let other = split_documents(&c, &SplitConfig { seed: 8, ..cfg }, &pre).unwrap();
        assert_ne!(a, other);

        pre.insert("nope".into(), Split::Dev);
        assert_eq!(
            split_documents(&c, &cfg, &pre),
            Err(SplitError::UnknownDocuments(vec!["nope".into()]))
        );
        let bad = SplitConfig { proportions: [0.5, 0.5, 0.5], seed: 0 };
        assert!(matches!(
            split_documents(&c, &bad, &BTreeMap::new()),
            Err(SplitError::BadProportions(_))
        ));
    }

    #[test]
    fn all_preassigned_is_identity() {
        let mut c = equal_docs(5);
        let pre: BTreeMap<String, Split> = c
            .documents()
            .enumerate()
            .map(|(i, d)| (d.id.clone(), Split::ASSIGNABLE[i % 3]))
            .collect();
        c.apply_split(&pre);
        let mut docs = Vec::new();
        let mut sents = Vec::new();
        c.write_documents(&mut docs).unwrap();
        c.write_sentences(&mut sents).unwrap();
        let marked: Vec<DocumentRecord> = c
            .documents()
            .cloned()
            .map(|mut d| {
                d.preassigned_split = true;
                d
            })
            .collect();
        let c2 = Corpus::from_records(marked, c.sentences().cloned()).0;
        assert_eq!(split_documents(&c2, &SplitConfig::default(), &BTreeMap::new()).unwrap(), pre);
    }

    #[test]
    fn stats_small() {
        let (c, _) = Corpus::from_records(
            [doc("d1")],
            [sent("s1", "d1", "كتب الولد الدرس", Some(7))],
        );
        let st = stats(&c);
        assert_eq!(st.level_counts[6], 1);
        assert_eq!(st.total.sentences, 1);
        assert_eq!(st.total.words, 3);
        assert_eq!(st.pearson_sentence, None);
        assert_eq!(st.pearson_level_means, None);
        assert_eq!(st.mean_words_by_level[6], Some(3.0));
    }

    #[test]
    fn pearson_values() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(pearson(&[1.0, 1.0], &[2.0, 3.0]), None);
    }

    #[test]
    fn predictions_format() {
        let tsv = "id\tlevel\ns1\t3\ns2\t12-lam\n";
        let p = read_predictions(tsv.as_bytes()).unwrap();
        assert_eq!(p["s2"].index(), 12);
        let jl = "{\"id\":\"s1\",\"level\":4}\n";
        assert_eq!(read_predictions(jl.as_bytes()).unwrap()["s1"].index(), 4);
        assert!(matches!(
            read_predictions("s1\t3\ns1\t4\n".as_bytes()),
            Err(PredictionError::Duplicate { line: 2, .. })
        ));
        assert!(read_predictions("s1\t0\n".as_bytes()).is_err());
    }

    #[test]
    fn toy_majority_scoring() {
        // Gold 3, 3, 5; constant prediction 3.
        let (c, _) = Corpus::from_records(
            [doc("d1")],
            [
                sent("a", "d1", "x", Some(3)),
                sent("b", "d1", "x", Some(3)),
                sent("c", "d1", "x", Some(5)),
            ],
        );
        let l3 = Level::new(3).unwrap();
        let preds: BTreeMap<String, Level> =
            ["a", "b", "c"].iter().map(|id| (id.to_string(), l3)).collect();
        let s = LevelScheme::shipped();
        let out = score_predictions(&c, None, &preds, false, &s).unwrap();
        assert!((out.report.acc19 - 2.0 / 3.0).abs() < 1e-12);
        assert!((out.report.distance - 2.0 / 3.0).abs() < 1e-12);
        assert!((out.report.adjacent_acc19 - 2.0 / 3.0).abs() < 1e-12);
        // Constant hypothesis: observed equals expected disagreement.
        assert!(out.report.qwk.abs() < 1e-12);

        let mut partial = preds.clone();
        partial.remove("c");
        partial.insert("zz".into(), l3);
        assert_eq!(
            score_predictions(&c, None, &partial, false, &s),
            Err(ScoreError::Coverage {
                missing: vec!["c".into()],
                extra: vec!["zz".into()]
            })
        );
        let out = score_predictions(&c, None, &partial, true, &s).unwrap();
        assert_eq!(out.scored, 2);
        assert_eq!(out.report.acc19, 1.0);
    }
}
