//! Fast preceding questionnaire models.
//!
//! Learns, from past questionnaire responses, a tree that orders the
//! questions for each respondent and predicts the answers that earlier
//! answers already pin down. The crate covers the whole loop:
//!
//! * [`dataset`]: CSV ingestion and preprocessing into nominal data,
//! * [`influence`]: the split criterion,
//! * [`model`]: tree construction and the JSON model format,
//! * [`session`]: running interviews, live or in batch,
//! * [`metrics`]: accuracy / reduction / F-measure evaluation,
//! * [`baseline`]: a per-attribute gain-ratio forest to compare against,
//! * [`bench`]: synthetic data and operation-count scaling reports.

pub mod baseline;
pub mod bench;
pub mod dataset;
pub mod error;
pub mod fixtures;
pub mod influence;
pub mod metrics;
pub mod model;
pub mod session;

pub use dataset::{AttributeSchema, Dataset, RawTable, SchemaDigest};
pub use error::{BenchError, DatasetError, InfluenceError, MetricsError, ModelError, SessionError};
pub use influence::{AggregationMode, ConditionalDistribution, InfluenceTable, OpCounter};
pub use metrics::EvaluationReport;
pub use model::{BuildConfig, FpqmModel, FpqmNode};
pub use session::{Session, SessionResult, StepOutcome, Verification};
