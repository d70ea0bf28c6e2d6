//! Guideline engine: minimum admissible level ("floor") from sentence
//! features, and advisory validation of an annotator's chosen level.
//!
//! Rules are data in a [`GuidelineProfile`]. The floor starts from the
//! word-count table and is raised by every rule whose predicate fires; it is
//! the maximum of all contributions, so adding a feature never lowers it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, JudgmentError};
use crate::level::{Level, LEVEL_COUNT};
use crate::par::{self, Execution};
use crate::text::{detect_features, Detector, SentenceFeatures};

/// The six textual dimensions, in guideline order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    WordCount,
    OrthographyPhonology,
    Morphology,
    Syntax,
    Vocabulary,
    IdeasContent,
}

impl Dimension {
    pub const ALL: [Dimension; 6] = [
        Dimension::WordCount,
        Dimension::OrthographyPhonology,
        Dimension::Morphology,
        Dimension::Syntax,
        Dimension::Vocabulary,
        Dimension::IdeasContent,
    ];

    /// Highest level at which the dimension may ever be consulted.
    pub fn max_cap(self) -> u8 {
        match self {
            Dimension::WordCount => 11,
            Dimension::OrthographyPhonology => 7,
            Dimension::Morphology => 13,
            Dimension::Syntax => 15,
            Dimension::Vocabulary | Dimension::IdeasContent => LEVEL_COUNT,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Dimension::WordCount => "word count",
            Dimension::OrthographyPhonology => "orthography & phonology",
            Dimension::Morphology => "morphology",
            Dimension::Syntax => "syntax",
            Dimension::Vocabulary => "vocabulary",
            Dimension::IdeasContent => "ideas & content",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Whether a feature is observed by a detector or asserted by an annotator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Auto,
    Asserted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    Feature(String),
    MinSyllables(u32),
    MinWords(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuidelineRule {
    pub id: String,
    pub dimension: Dimension,
    pub predicate: Predicate,
    pub floor: Level,
    pub source: Source,
}

impl GuidelineRule {
    fn fires(&self, features: &SentenceFeatures) -> bool {
        match &self.predicate {
            Predicate::Feature(id) => match self.source {
                // A hand assertion may stand in for a missed detection.
                Source::Auto => {
                    features.auto_features.contains(id) || features.asserted_features.contains_key(id)
                }
                Source::Asserted => features.asserted_features.contains_key(id),
            },
            Predicate::MinSyllables(n) => features.max_syllables.is_some_and(|m| m >= *n),
            Predicate::MinWords(n) => features.word_count >= *n,
        }
    }

    fn describe(&self) -> String {
        match &self.predicate {
            Predicate::Feature(id) => format!("feature {id}"),
            Predicate::MinSyllables(n) => format!("a word with {n}+ syllables"),
            Predicate::MinWords(n) => format!("{n}+ words"),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    #[serde(default)]
    version: Option<u32>,
    #[serde(default)]
    caps: BTreeMap<Dimension, u8>,
    #[serde(default)]
    word_count: RawWordCount,
    #[serde(default, rename = "detector")]
    detectors: Vec<Detector>,
    #[serde(default, rename = "asserted_feature")]
    asserted_features: Vec<RawAsserted>,
    #[serde(default, rename = "rule")]
    rules: Vec<RawRule>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWordCount {
    #[serde(default)]
    ceilings: Vec<usize>,
    #[serde(default)]
    provisional: Vec<u8>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAsserted {
    id: String,
    dimension: Dimension,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    id: String,
    dimension: Dimension,
    floor: u8,
    #[serde(default)]
    source: Option<Source>,
    #[serde(default)]
    feature: Option<String>,
    #[serde(default)]
    min_syllables: Option<u32>,
    #[serde(default)]
    min_words: Option<usize>,
}

pub const DEFAULT_PROFILE_TOML: &str = include_str!("../data/profile.toml");

/// A validated rule table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuidelineProfile {
    caps: BTreeMap<Dimension, Level>,
    /// `ceilings[i]` is the largest word count admitted at level `i + 1`.
    ceilings: Vec<usize>,
    provisional: BTreeSet<u8>,
    detectors: Vec<Detector>,
    asserted: BTreeMap<String, Dimension>,
    rules: Vec<GuidelineRule>,
}

impl GuidelineProfile {
    pub fn shipped() -> Self {
        Self::from_toml_str(DEFAULT_PROFILE_TOML).expect("shipped profile is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::single(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let raw: RawProfile =
            toml::from_str(text).map_err(|e| ConfigError::single(e.to_string()))?;
        let mut problems = Vec::new();

        if let Some(v) = raw.version {
            if v != 1 {
                problems.push(format!("unsupported profile version {v}"));
            }
        }

        let mut caps = BTreeMap::new();
        for dim in Dimension::ALL {
            let cap = raw.caps.get(&dim).copied().unwrap_or(dim.max_cap());
            if cap == 0 || cap > dim.max_cap() {
                problems.push(format!(
                    "{dim} cap {cap} outside 1..={}",
                    dim.max_cap()
                ));
                caps.insert(dim, Level::new(dim.max_cap()).expect("valid cap"));
            } else {
                caps.insert(dim, Level::new(cap).expect("checked range"));
            }
        }
        let wc_cap = caps[&Dimension::WordCount].index() as usize;

        let ceilings = raw.word_count.ceilings;
        if ceilings.len() > wc_cap {
            problems.push(format!(
                "word-count table has {} levels but word count is capped at level {wc_cap}",
                ceilings.len()
            ));
        }
        if ceilings.first().is_some_and(|&c| c == 0) {
            problems.push("word-count ceiling for level 1 must admit at least one word".into());
        }
        if ceilings.windows(2).any(|w| w[0] > w[1]) {
            problems.push("word-count ceilings must not decrease with level".into());
        }
        if ceilings.len() >= 11 && ceilings[10] != 20 {
            problems.push(format!(
                "word-count ceiling at level 11 must be 20, found {}",
                ceilings[10]
            ));
        }
        for &p in &raw.word_count.provisional {
            if p == 0 || p as usize > ceilings.len() {
                problems.push(format!("provisional level {p} has no word-count ceiling"));
            }
        }

        let mut detector_ids = BTreeSet::new();
        for d in &raw.detectors {
            if !detector_ids.insert(d.id.clone()) {
                problems.push(format!("duplicate detector id {:?}", d.id));
            }
        }
        let mut asserted = BTreeMap::new();
        for a in &raw.asserted_features {
            if detector_ids.contains(&a.id) || asserted.insert(a.id.clone(), a.dimension).is_some() {
                problems.push(format!("duplicate feature id {:?}", a.id));
            }
        }

        let mut rule_ids = BTreeSet::new();
        let mut rules = Vec::with_capacity(raw.rules.len());
        for r in raw.rules {
            if !rule_ids.insert(r.id.clone()) {
                problems.push(format!("duplicate rule id {:?}", r.id));
            }
            let floor = match Level::new(r.floor) {
                Ok(level) => level,
                Err(e) => {
                    problems.push(format!("rule {:?}: {e}", r.id));
                    continue;
                }
            };
            let cap = caps[&r.dimension];
            if floor > cap {
                problems.push(format!(
                    "rule {:?} sets floor {} but {} is only used up to {}",
                    r.id, floor, r.dimension, cap
                ));
            }
            let predicate = match (r.feature, r.min_syllables, r.min_words) {
                (Some(f), None, None) => Predicate::Feature(f),
                (None, Some(n), None) => Predicate::MinSyllables(n),
                (None, None, Some(n)) => Predicate::MinWords(n),
                _ => {
                    problems.push(format!(
                        "rule {:?} needs exactly one of feature, min_syllables, min_words",
                        r.id
                    ));
                    continue;
                }
            };
            let inferred = match &predicate {
                Predicate::Feature(f) if detector_ids.contains(f) => Some(Source::Auto),
                Predicate::Feature(f) if asserted.contains_key(f) => Some(Source::Asserted),
                Predicate::Feature(f) => {
                    problems.push(format!("rule {:?} uses unknown feature {f:?}", r.id));
                    None
                }
                _ => Some(Source::Auto),
            };
            if let (Some(declared), Some(inferred)) = (r.source, inferred) {
                if declared != inferred {
                    problems.push(format!(
                        "rule {:?} declares source {declared:?} but its feature is {inferred:?}",
                        r.id
                    ));
                }
            }
            if let Some(source) = inferred {
                rules.push(GuidelineRule {
                    id: r.id,
                    dimension: r.dimension,
                    predicate,
                    floor,
                    source,
                });
            }
        }

        if !problems.is_empty() {
            return Err(ConfigError::new(problems));
        }
        Ok(GuidelineProfile {
            caps,
            ceilings,
            provisional: raw.word_count.provisional.into_iter().collect(),
            detectors: raw.detectors,
            asserted,
            rules,
        })
    }

    pub fn cap(&self, dimension: Dimension) -> Level {
        self.caps[&dimension]
    }

    pub fn rules(&self) -> &[GuidelineRule] {
        &self.rules
    }

    pub fn detectors(&self) -> &[Detector] {
        &self.detectors
    }

    /// Asserted-feature vocabulary with each feature's dimension.
    pub fn asserted_features(&self) -> &BTreeMap<String, Dimension> {
        &self.asserted
    }

    /// Largest word count admitted at `level`, if the table covers it.
    pub fn word_ceiling(&self, level: Level) -> Option<usize> {
        self.ceilings.get(level.index() as usize - 1).copied()
    }

    pub fn is_provisional(&self, level: Level) -> bool {
        self.provisional.contains(&level.index())
    }

    /// Lowest level admitting `word_count` words, or the level just above the
    /// table when the count exceeds every ceiling. `None` for an empty table.
    pub fn word_count_floor(&self, word_count: usize) -> Option<Level> {
        if self.ceilings.is_empty() {
            return None;
        }
        let idx = self
            .ceilings
            .iter()
            .position(|&c| word_count <= c)
            .unwrap_or(self.ceilings.len());
        Some(Level::new(idx as u8 + 1).unwrap_or(Level::MAX))
    }

    /// Runs the profile's detectors over a sentence.
    pub fn detect(&self, sentence: &str) -> SentenceFeatures {
        detect_features(sentence, &self.detectors)
    }

    /// Checks that asserted features belong to this profile's vocabulary.
    pub fn check_asserted(&self, features: &SentenceFeatures) -> Result<(), ConfigError> {
        let problems: Vec<String> = features
            .asserted_features
            .iter()
            .filter(|(id, dim)| {
                self.asserted.get(*id) != Some(dim)
                    && !(self.detectors.iter().any(|d| &d.id == *id))
            })
            .map(|(id, dim)| format!("unknown asserted feature {id:?} ({dim})"))
            .collect();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::new(problems))
        }
    }
}

impl Default for GuidelineProfile {
    fn default() -> Self {
        Self::shipped()
    }
}

/// One contribution to the floor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub rule: String,
    pub dimension: Dimension,
    pub source: Source,
    /// The floor this rule demands.
    pub rule_floor: Level,
    /// The running floor after applying this rule.
    pub level: Level,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    BelowFloor {
        candidate: Level,
        floor: Level,
        /// Rules demanding more than the candidate.
        rules: Vec<String>,
    },
    WordCountCeiling {
        candidate: Level,
        ceiling: usize,
        word_count: usize,
    },
    NotLevelable,
}

impl Violation {
    pub fn message(&self) -> String {
        match self {
            Violation::BelowFloor {
                candidate,
                floor,
                rules,
            } => format!(
                "{candidate} is below the floor {floor} set by {}",
                rules.join(", ")
            ),
            Violation::WordCountCeiling {
                candidate,
                ceiling,
                word_count,
            } => format!(
                "{word_count} words exceeds the {ceiling}-word ceiling of {candidate}"
            ),
            Violation::NotLevelable => "sentence has no words".to_string(),
        }
    }
}

/// Per-dimension feedback for a candidate level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionFeedback {
    pub dimension: Dimension,
    /// Whether the dimension is consulted at the candidate level.
    pub applies: bool,
    pub cap: Level,
    /// Rules of this dimension that fired.
    pub fired: Vec<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelJudgment {
    pub floor: Level,
    pub trace: Vec<TraceStep>,
    #[serde(default)]
    pub violations: Vec<Violation>,
    /// Filled by [`validate_choice`]; empty for a bare floor computation.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dimensions: Vec<DimensionFeedback>,
}

impl LevelJudgment {
    pub fn is_below_floor(&self) -> bool {
        self.violations
            .iter()
            .any(|v| matches!(v, Violation::BelowFloor { .. }))
    }
}

/// Minimum admissible level: word count first, then every fired rule in
/// ascending floor order (ties by dimension, then rule id).
pub fn compute_floor(
    features: &SentenceFeatures,
    profile: &GuidelineProfile,
) -> Result<LevelJudgment, JudgmentError> {
    if features.word_count == 0 {
        return Err(JudgmentError::NotLevelable);
    }
    let mut trace = Vec::new();
    let mut level = Level::MIN;
    if let Some(wc_floor) = profile.word_count_floor(features.word_count) {
        level = wc_floor;
        trace.push(TraceStep {
            rule: "word_count".to_string(),
            dimension: Dimension::WordCount,
            source: Source::Auto,
            rule_floor: wc_floor,
            level,
            detail: format!("{} words", features.word_count),
        });
    }
    let mut fired: Vec<&GuidelineRule> =
        profile.rules.iter().filter(|r| r.fires(features)).collect();
    fired.sort_by(|a, b| {
        (a.floor, a.dimension, &a.id).cmp(&(b.floor, b.dimension, &b.id))
    });
    for rule in fired {
        level = level.max(rule.floor);
        trace.push(TraceStep {
            rule: rule.id.clone(),
            dimension: rule.dimension,
            source: rule.source,
            rule_floor: rule.floor,
            level,
            detail: rule.describe(),
        });
    }
    Ok(LevelJudgment {
        floor: level,
        trace,
        violations: Vec::new(),
        dimensions: Vec::new(),
    })
}

/// Advisory check of a candidate level: below-floor, word-count ceiling, and
/// whether each dimension applies at that level.
pub fn validate_choice(
    candidate: Level,
    features: &SentenceFeatures,
    profile: &GuidelineProfile,
) -> LevelJudgment {
    let mut judgment = match compute_floor(features, profile) {
        Ok(j) => j,
        Err(JudgmentError::NotLevelable) => LevelJudgment {
            floor: Level::MIN,
            trace: Vec::new(),
            violations: vec![Violation::NotLevelable],
            dimensions: Vec::new(),
        },
    };
    if candidate < judgment.floor {
        let rules = judgment
            .trace
            .iter()
            .filter(|s| s.rule_floor > candidate)
            .map(|s| s.rule.clone())
            .collect();
        judgment.violations.push(Violation::BelowFloor {
            candidate,
            floor: judgment.floor,
            rules,
        });
    }
    if candidate <= profile.cap(Dimension::WordCount) {
        if let Some(ceiling) = profile.word_ceiling(candidate) {
            if features.word_count > ceiling {
                judgment.violations.push(Violation::WordCountCeiling {
                    candidate,
                    ceiling,
                    word_count: features.word_count,
                });
            }
        }
    }
    judgment.dimensions = Dimension::ALL
        .iter()
        .map(|&dimension| {
            let cap = profile.cap(dimension);
            let applies = candidate <= cap;
            let fired: Vec<String> = judgment
                .trace
                .iter()
                .filter(|s| s.dimension == dimension)
                .map(|s| s.rule.clone())
                .collect();
            let message = match (applies, dimension) {
                (true, Dimension::WordCount) => match profile.word_ceiling(candidate) {
                    Some(c) => format!(
                        "applies at {candidate}: at most {c} words (sentence has {})",
                        features.word_count
                    ),
                    None => format!("applies at {candidate}"),
                },
                (true, _) => format!("applies at {candidate}"),
                (false, _) => format!("not used beyond {cap}"),
            };
            DimensionFeedback {
                dimension,
                applies,
                cap,
                fired,
                message,
            }
        })
        .collect();
    judgment
}

/// One sentence's floor, as exported by batch runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorRecord {
    pub id: String,
    pub word_count: usize,
    pub max_syllables: Option<u32>,
    pub auto_features: BTreeSet<String>,
    /// `None` when the sentence has no words.
    pub judgment: Option<LevelJudgment>,
}

/// Floors for a batch of `(id, text)` pairs, in input order.
pub fn batch_floors(
    sentences: &[(String, String)],
    profile: &GuidelineProfile,
    exec: Execution,
) -> Vec<FloorRecord> {
    par::map(sentences, exec, |(id, text)| {
        let features = profile.detect(text);
        FloorRecord {
            id: id.clone(),
            word_count: features.word_count,
            max_syllables: features.max_syllables,
            judgment: compute_floor(&features, profile).ok(),
            auto_features: features.auto_features,
        }
    })
}
