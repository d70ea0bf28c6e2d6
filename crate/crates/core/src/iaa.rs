//! Inter-annotator agreement: pairwise reports over IAA sets, unification
//! bookkeeping, averaged labels and the disagreement browser.

use std::collections::BTreeMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::MetricError;
use crate::level::{Level, LevelScheme, LEVEL_COUNT};
use crate::metrics::{granularity_table, ConfusionMatrix, GranularityReport, MetricReport};
use crate::par::{self, Execution};

#[derive(Debug, Error, PartialEq)]
pub enum IaaError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("sentence {sentence_id} has {found} label(s); at least 2 are required")]
    TooFewLabels { sentence_id: String, found: usize },
    #[error("sentence {sentence_id} appears twice in set {set_id}")]
    DuplicateSentence { set_id: String, sentence_id: String },
    #[error("sentence {sentence_id} has no label from annotator {annotator}")]
    MissingLabel {
        sentence_id: String,
        annotator: String,
    },
    #[error("no sentence carries a unified label")]
    NoUnifiedLabels,
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IaaSentence {
    pub sentence_id: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub text: String,
    pub labels: BTreeMap<String, Level>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ul: Option<Level>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IaaSet {
    pub id: String,
    /// Free-form phase label, e.g. "Phase 2A".
    pub phase: String,
    pub sentences: Vec<IaaSentence>,
}

impl IaaSet {
    /// Checks the per-sentence invariants.
    pub fn validate(&self) -> Result<(), IaaError> {
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.sentences {
            if s.labels.len() < 2 {
                return Err(IaaError::TooFewLabels {
                    sentence_id: s.sentence_id.clone(),
                    found: s.labels.len(),
                });
            }
            if !seen.insert(&s.sentence_id) {
                return Err(IaaError::DuplicateSentence {
                    set_id: self.id.clone(),
                    sentence_id: s.sentence_id.clone(),
                });
            }
        }
        Ok(())
    }

    /// Sorted union of annotator ids.
    pub fn annotators(&self) -> Vec<String> {
        let mut all: Vec<String> = self
            .sentences
            .iter()
            .flat_map(|s| s.labels.keys().cloned())
            .collect();
        all.sort();
        all.dedup();
        all
    }
}

/// One line of IAA input.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IaaRecord {
    pub sentence_id: String,
    #[serde(default)]
    pub text: String,
    pub labels: BTreeMap<String, Level>,
    #[serde(default)]
    pub ul: Option<Level>,
    #[serde(default)]
    pub set: Option<String>,
    #[serde(default)]
    pub phase: Option<String>,
}

/// Reads line-delimited IAA records, grouping them into sets in order of
/// first appearance. Records without a set go to `"default"`; a set takes
/// the phase of its first record that names one.
pub fn read_jsonl(reader: impl BufRead) -> Result<Vec<IaaSet>, IaaError> {
    let mut sets: Vec<IaaSet> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| IaaError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: IaaRecord = serde_json::from_str(&line).map_err(|e| IaaError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let set_id = rec.set.unwrap_or_else(|| "default".to_string());
        let slot = *index.entry(set_id.clone()).or_insert_with(|| {
            sets.push(IaaSet {
                id: set_id,
                phase: String::new(),
                sentences: Vec::new(),
            });
            sets.len() - 1
        });
        let set = &mut sets[slot];
        if set.phase.is_empty() {
            if let Some(phase) = rec.phase {
                set.phase = phase;
            }
        }
        set.sentences.push(IaaSentence {
            sentence_id: rec.sentence_id,
            text: rec.text,
            labels: rec.labels,
            ul: rec.ul,
        });
    }
    for set in &sets {
        set.validate()?;
    }
    Ok(sets)
}

/// Rounded mean of the labels, halves away from zero. `None` when empty.
pub fn average_label(labels: &[Level]) -> Option<Level> {
    if labels.is_empty() {
        return None;
    }
    let n = labels.len() as u64;
    let sum: u64 = labels.iter().map(|l| l.index() as u64).sum();
    // floor((sum/n) + 1/2) for positive values.
    let rounded = (2 * sum + n) / (2 * n);
    Some(Level::new(rounded as u8).expect("mean of levels is a level"))
}

/// Largest minus smallest label.
pub fn max_min_difference(labels: &[Level]) -> u8 {
    match (labels.iter().min(), labels.iter().max()) {
        (Some(lo), Some(hi)) => hi.index() - lo.index(),
        _ => 0,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnificationRecord {
    pub labels: BTreeMap<String, Level>,
    pub ul: Level,
    pub al: Level,
    pub min: Level,
    pub max: Level,
    pub mm: u8,
    pub within_range: bool,
    pub matches_annotator: bool,
}

impl UnificationRecord {
    pub fn new(labels: BTreeMap<String, Level>, ul: Level) -> Result<Self, IaaError> {
        if labels.len() < 2 {
            return Err(IaaError::TooFewLabels {
                sentence_id: String::new(),
                found: labels.len(),
            });
        }
        let values: Vec<Level> = labels.values().copied().collect();
        let min = *values.iter().min().expect("nonempty");
        let max = *values.iter().max().expect("nonempty");
        Ok(Self {
            al: average_label(&values).expect("nonempty"),
            mm: max.index() - min.index(),
            within_range: min <= ul && ul <= max,
            matches_annotator: values.contains(&ul),
            labels,
            ul,
            min,
            max,
        })
    }
}

/// Missing-label policy for pairwise agreement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    /// A pair uses only the sentences both annotators labeled.
    #[default]
    Lenient,
    /// Every sentence must carry every annotator's label.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub a: String,
    pub b: String,
    pub report: MetricReport,
    #[serde(skip)]
    pub confusion: Option<ConfusionMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetAgreement {
    pub set_id: String,
    pub phase: String,
    pub pairs: Vec<PairReport>,
    /// Unweighted mean over pairs.
    pub average: MetricReport,
    /// Pairs that shared no sentence.
    pub skipped_pairs: Vec<(String, String)>,
}

impl SetAgreement {
    fn pooled(&self) -> ConfusionMatrix {
        let mut m = ConfusionMatrix::zeros(LEVEL_COUNT);
        for p in &self.pairs {
            if let Some(c) = &p.confusion {
                m.merge(c);
            }
        }
        m
    }
}

/// Agreement for every unordered annotator pair, plus the set average.
pub fn pairwise_report(
    set: &IaaSet,
    strictness: Strictness,
    scheme: &LevelScheme,
) -> Result<SetAgreement, IaaError> {
    set.validate()?;
    let annotators = set.annotators();
    if strictness == Strictness::Strict {
        for s in &set.sentences {
            if let Some(a) = annotators.iter().find(|a| !s.labels.contains_key(*a)) {
                return Err(IaaError::MissingLabel {
                    sentence_id: s.sentence_id.clone(),
                    annotator: a.clone(),
                });
            }
        }
    }
    let mut pairs = Vec::new();
    let mut skipped_pairs = Vec::new();
    for (i, a) in annotators.iter().enumerate() {
        for b in &annotators[i + 1..] {
            let (ra, rb): (Vec<Level>, Vec<Level>) = set
                .sentences
                .iter()
                .filter_map(|s| Some((*s.labels.get(a)?, *s.labels.get(b)?)))
                .unzip();
            if ra.is_empty() {
                skipped_pairs.push((a.clone(), b.clone()));
                continue;
            }
            let confusion = ConfusionMatrix::from_levels(&ra, &rb)?;
            pairs.push(PairReport {
                a: a.clone(),
                b: b.clone(),
                report: MetricReport::from_confusion(&confusion, scheme),
                confusion: Some(confusion),
            });
        }
    }
    let reports: Vec<MetricReport> = pairs.iter().map(|p| p.report).collect();
    Ok(SetAgreement {
        set_id: set.id.clone(),
        phase: set.phase.clone(),
        average: MetricReport::macro_mean(&reports)?,
        pairs,
        skipped_pairs,
    })
}

/// [`pairwise_report`] over many sets, one task per set.
pub fn pairwise_reports(
    sets: &[IaaSet],
    strictness: Strictness,
    scheme: &LevelScheme,
    exec: Execution,
) -> Result<Vec<SetAgreement>, IaaError> {
    par::map(sets, exec, |s| pairwise_report(s, strictness, scheme))
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub phase: String,
    pub sets: usize,
    /// Mean of the per-set averages.
    pub macro_report: MetricReport,
    /// One report over every pair comparison in the phase.
    pub micro_report: MetricReport,
}

/// Groups set results by phase (in order of first appearance).
pub fn phase_rollup(
    results: &[SetAgreement],
    scheme: &LevelScheme,
) -> Result<Vec<PhaseSummary>, IaaError> {
    let mut order: Vec<&str> = Vec::new();
    for r in results {
        if !order.contains(&r.phase.as_str()) {
            order.push(&r.phase);
        }
    }
    order
        .into_iter()
        .map(|phase| {
            let members: Vec<&SetAgreement> = results.iter().filter(|r| r.phase == phase).collect();
            rollup(phase, &members, scheme)
        })
        .collect()
}

/// Macro and micro figures across all given sets.
pub fn overall_rollup(
    label: &str,
    results: &[SetAgreement],
    scheme: &LevelScheme,
) -> Result<PhaseSummary, IaaError> {
    let members: Vec<&SetAgreement> = results.iter().collect();
    rollup(label, &members, scheme)
}

fn rollup(
    phase: &str,
    members: &[&SetAgreement],
    scheme: &LevelScheme,
) -> Result<PhaseSummary, IaaError> {
    let averages: Vec<MetricReport> = members.iter().map(|r| r.average).collect();
    let mut pooled = ConfusionMatrix::zeros(LEVEL_COUNT);
    for r in members {
        pooled.merge(&r.pooled());
    }
    if pooled.total() == 0 {
        return Err(MetricError::Empty.into());
    }
    Ok(PhaseSummary {
        phase: phase.to_string(),
        sets: members.len(),
        macro_report: MetricReport::macro_mean(&averages)?,
        micro_report: MetricReport::from_confusion(&pooled, scheme),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnificationStats {
    /// Sentences with a unified label.
    pub sentences: usize,
    /// Sentences skipped for lacking one.
    pub skipped_missing_ul: usize,
    pub within_range_rate: f64,
    pub matches_annotator_rate: f64,
    /// Averaged label against the unified label, reference = UL.
    pub al_vs_ul: Vec<GranularityReport>,
    pub al_vs_ul_report: MetricReport,
}

pub fn unification_records(sets: &[IaaSet]) -> Result<(Vec<UnificationRecord>, usize), IaaError> {
    let mut records = Vec::new();
    let mut skipped = 0;
    for set in sets {
        set.validate()?;
        for s in &set.sentences {
            match s.ul {
                Some(ul) => records.push(UnificationRecord::new(s.labels.clone(), ul)?),
                None => skipped += 1,
            }
        }
    }
    Ok((records, skipped))
}

pub fn unification_stats(
    sets: &[IaaSet],
    scheme: &LevelScheme,
) -> Result<UnificationStats, IaaError> {
    let (records, skipped) = unification_records(sets)?;
    if records.is_empty() {
        return Err(IaaError::NoUnifiedLabels);
    }
    let n = records.len() as f64;
    let ul: Vec<Level> = records.iter().map(|r| r.ul).collect();
    let al: Vec<Level> = records.iter().map(|r| r.al).collect();
    let confusion = ConfusionMatrix::from_levels(&ul, &al)?;
    Ok(UnificationStats {
        sentences: records.len(),
        skipped_missing_ul: skipped,
        within_range_rate: records.iter().filter(|r| r.within_range).count() as f64 / n,
        matches_annotator_rate: records.iter().filter(|r| r.matches_annotator).count() as f64 / n,
        al_vs_ul: granularity_table(&confusion, scheme),
        al_vs_ul_report: MetricReport::from_confusion(&confusion, scheme),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorVsUl {
    pub rows: Vec<(String, MetricReport)>,
    /// Mean over annotators.
    pub macro_report: MetricReport,
}

/// Each annotator scored against the unified labels (reference = UL).
pub fn annotator_vs_ul(sets: &[IaaSet], scheme: &LevelScheme) -> Result<AnnotatorVsUl, IaaError> {
    let mut per: BTreeMap<String, (Vec<Level>, Vec<Level>)> = BTreeMap::new();
    for set in sets {
        for s in &set.sentences {
            let Some(ul) = s.ul else { continue };
            for (annotator, &label) in &s.labels {
                let entry = per.entry(annotator.clone()).or_default();
                entry.0.push(ul);
                entry.1.push(label);
            }
        }
    }
    if per.is_empty() {
        return Err(IaaError::NoUnifiedLabels);
    }
    let rows = per
        .into_iter()
        .map(|(a, (r, h))| Ok((a, MetricReport::compute(&r, &h, scheme)?)))
        .collect::<Result<Vec<_>, MetricError>>()?;
    let reports: Vec<MetricReport> = rows.iter().map(|(_, r)| *r).collect();
    Ok(AnnotatorVsUl {
        macro_report: MetricReport::macro_mean(&reports)?,
        rows,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BrowserFilter {
    pub min_mm: Option<u8>,
    pub phase: Option<String>,
    /// Only sentences this annotator labeled.
    pub annotator: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisagreementRow {
    pub set_id: String,
    pub sentence_id: String,
    pub text: String,
    pub labels: BTreeMap<String, Level>,
    pub ul: Option<Level>,
    pub al: Level,
    pub mm: u8,
}

/// Sentences ranked by max-min difference, largest first; ties by set id
/// then sentence id.
pub fn disagreement_browser(sets: &[IaaSet], filter: &BrowserFilter) -> Vec<DisagreementRow> {
    let mut rows: Vec<DisagreementRow> = sets
        .iter()
        .filter(|set| filter.phase.as_ref().is_none_or(|p| *p == set.phase))
        .flat_map(|set| set.sentences.iter().map(move |s| (set, s)))
        .filter(|(_, s)| {
            filter
                .annotator
                .as_ref()
                .is_none_or(|a| s.labels.contains_key(a))
        })
        .filter_map(|(set, s)| {
            let values: Vec<Level> = s.labels.values().copied().collect();
            let al = average_label(&values)?;
            let mm = max_min_difference(&values);
            (mm >= filter.min_mm.unwrap_or(0)).then(|| DisagreementRow {
                set_id: set.id.clone(),
                sentence_id: s.sentence_id.clone(),
                text: s.text.clone(),
                labels: s.labels.clone(),
                ul: s.ul,
                al,
                mm,
            })
        })
        .collect();
    rows.sort_by(|x, y| {
        y.mm.cmp(&x.mm)
            .then_with(|| x.set_id.cmp(&y.set_id))
            .then_with(|| x.sentence_id.cmp(&y.sentence_id))
    });
    rows
}

/// Rows shaped like the per-granularity agreement table.
pub fn granularity_rows(reports: &[GranularityReport]) -> Vec<Vec<String>> {
    reports
        .iter()
        .map(|g| {
            vec![
                format!("{}", g.granularity),
                format!("{:.2}", g.distance),
                crate::metrics::pct(g.distance_relative),
                crate::metrics::pct(g.accuracy),
                crate::metrics::pct(g.adjacent_accuracy),
                crate::metrics::pct(g.qwk),
            ]
        })
        .collect()
}

pub const GRANULARITY_HEADER: [&str; 6] = ["Levels", "Distance", "Relative", "Acc", "±1 Acc", "QWK"];
