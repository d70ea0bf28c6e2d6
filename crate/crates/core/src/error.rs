use std::fmt;

use thiserror::Error;

/// A token that does not name a level on the 19-level scale.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid readability level {token:?}: expected an integer 1-19 or a name such as \"3-jim\"")]
pub struct ParseLevelError {
    pub token: String,
}

impl ParseLevelError {
    pub fn new(token: impl Into<String>) -> Self {
        Self {
            token: token.into(),
        }
    }
}

/// A configuration file that failed validation. Carries every problem found.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub problems: Vec<String>,
}

impl ConfigError {
    pub fn new(problems: Vec<String>) -> Self {
        Self { problems }
    }

    pub fn single(problem: impl Into<String>) -> Self {
        Self {
            problems: vec![problem.into()],
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration: {}", self.problems.join("; "))
    }
}

impl std::error::Error for ConfigError {}

/// Malformed diacritic sequence inside a word.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed diacritics in {word:?} at character {position}: {reason}")]
pub struct AnalysisError {
    pub word: String,
    /// Character offset (in chars, after normalization) of the offending mark.
    pub position: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("label series differ in length ({reference} vs {hypothesis})")]
    LengthMismatch { reference: usize, hypothesis: usize },
    #[error("label series are empty")]
    Empty,
    #[error("label {label} is outside 1..={k}")]
    LabelOutOfRange { label: u8, k: u8 },
    #[error("need at least one batch to aggregate")]
    NoBatches,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JudgmentError {
    #[error("sentence has no words and cannot be leveled")]
    NotLevelable,
}
