//! Annotation workflow for the readability corpus: batch assignment, live
//! guideline feedback, flagging, unification rounds and export.
//!
//! State is a pure fold over an append-only event log, so replaying the log
//! reproduces it exactly.

pub mod clock;
pub mod error;
pub mod http;
pub mod model;
pub mod service;
pub mod simulate;
pub mod state;
pub mod store;

pub use clock::{Clock, StepClock, SystemClock};
pub use error::ServiceError;
pub use model::{AnnotationEvent, Batch, Event, LogEntry, SentenceStatus};
pub use service::Service;
pub use state::{ExportFilter, State, StatusFilter};
