//! Request and response bodies.

use std::path::PathBuf;

use fpqm_core::dataset::PreprocessSpec;
use fpqm_core::metrics::DEFAULT_BETA;
use fpqm_core::session::Correction;
use fpqm_core::{AttributeSchema, BuildConfig, FpqmModel, SessionResult, StepOutcome};
use serde::{Deserialize, Serialize};

pub const DEFAULT_SIGMA: f64 = 0.8;

fn yes() -> bool {
    true
}

fn default_sigma() -> f64 {
    DEFAULT_SIGMA
}

fn default_beta() -> f64 {
    DEFAULT_BETA
}

/// Where a dataset comes from: inline CSV text or a path readable by the
/// server.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_path: Option<PathBuf>,
    #[serde(default = "yes")]
    pub has_header: bool,
}

impl DatasetSource {
    pub fn inline(csv: impl Into<String>) -> Self {
        Self {
            csv: Some(csv.into()),
            dataset_path: None,
            has_header: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateModel {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(flatten)]
    pub source: DatasetSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preprocess: Option<PreprocessSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[serde(default)]
    pub config: BuildConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeView {
    pub index: usize,
    pub name: String,
    pub domain: Vec<String>,
}

impl From<&AttributeSchema> for AttributeView {
    fn from(a: &AttributeSchema) -> Self {
        Self {
            index: a.index,
            name: a.name.clone(),
            domain: a.domain.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub id: String,
    pub name: String,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub root_attribute: String,
    pub root_index: usize,
    pub depth: usize,
    pub rule_count: usize,
    pub config: BuildConfig,
    pub schema_digest: String,
    pub attributes: Vec<AttributeView>,
}

impl ModelSummary {
    pub fn new(id: &str, name: &str, created_at: u64, model: &FpqmModel) -> Self {
        let root = model.root().attribute;
        Self {
            id: id.to_string(),
            name: name.to_string(),
            created_at,
            root_attribute: model.schema()[root].name.clone(),
            root_index: root,
            depth: model.depth(),
            rule_count: model.rule_count(),
            config: model.config(),
            schema_digest: model.schema_digest().to_string(),
            attributes: model.schema().iter().map(AttributeView::from).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSession {
    pub model_id: String,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
}

/// An attribute by position or by column name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttributeRef {
    Index(usize),
    Name(String),
}

/// A value by position in the domain or by label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ValueRef {
    Index(usize),
    Label(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Answer {
    pub attribute: AttributeRef,
    pub value: ValueRef,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Verify {
    pub attribute: AttributeRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confirmed: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrected_value: Option<ValueRef>,
}

/// A session step with names and labels resolved for display.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StepView {
    Ask {
        attribute: usize,
        attribute_name: String,
        options: Vec<String>,
    },
    Predicted {
        attribute: usize,
        attribute_name: String,
        value: usize,
        value_label: String,
        confidence: f64,
    },
    Finished,
}

impl StepView {
    pub fn new(step: &StepOutcome, schema: &[AttributeSchema]) -> Self {
        match *step {
            StepOutcome::Ask { attribute } => StepView::Ask {
                attribute,
                attribute_name: schema[attribute].name.clone(),
                options: schema[attribute].domain.clone(),
            },
            StepOutcome::Predicted {
                attribute,
                value,
                confidence,
            } => StepView::Predicted {
                attribute,
                attribute_name: schema[attribute].name.clone(),
                value,
                value_label: schema[attribute].domain[value].clone(),
                confidence,
            },
            StepOutcome::Finished => StepView::Finished,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    AwaitingAnswer,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub status: SessionStatus,
    pub step: StepView,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerResponse {
    pub status: SessionStatus,
    pub steps: Vec<StepView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub model_id: String,
    pub sigma: f64,
    pub status: SessionStatus,
    pub n_attributes: usize,
    pub resolved: usize,
    /// The question waiting for an answer, if any.
    pub pending: Option<StepView>,
    /// Every step emitted so far, in order.
    pub history: Vec<StepView>,
    pub corrections: Vec<Correction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub session_id: String,
    #[serde(flatten)]
    pub result: SessionResult,
    pub final_labels: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluateRequest {
    pub model_id: String,
    #[serde(flatten)]
    pub source: DatasetSource,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribute: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}
