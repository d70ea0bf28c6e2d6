//! Core of the BAREC readability toolkit: the 19-level scheme, Arabic text
//! analysis, the guideline engine, agreement metrics, inter-annotator
//! agreement and the corpus store.

pub mod corpus;
pub mod error;
pub mod guidelines;
pub mod iaa;
pub mod level;
pub mod metrics;
pub mod par;
pub mod table;
pub mod text;

pub use error::{AnalysisError, ConfigError, JudgmentError, MetricError, ParseLevelError};
pub use guidelines::{
    compute_floor, validate_choice, Dimension, GuidelineProfile, GuidelineRule, LevelJudgment,
    TraceStep, Violation,
};
pub use level::{Granularity, Level, LevelScheme};
pub use metrics::{ConfusionMatrix, MetricReport, Qwk};
pub use par::Execution;
pub use text::SentenceFeatures;
