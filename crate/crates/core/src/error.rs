use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}: expected {expected} cells, found {found}")]
    RowWidth {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}, column `{column}`: value index {value} outside the domain")]
    CellOutOfDomain {
        row: usize,
        column: String,
        value: usize,
    },
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("invalid preprocessing spec: {0}")]
    InvalidSpec(String),
    #[error("column `{0}` has no declared kind")]
    MissingColumnSpec(String),
    #[error("spec names column `{0}` which is not in the table")]
    UnknownColumn(String),
    #[error("table has no column `{0}`")]
    MissingColumn(String),
    #[error("column `{0}` has no usable values to impute from")]
    ColumnAllMissing(String),
    #[error("line {line}, column `{column}`: `{value}` is not a number")]
    NotNumeric {
        line: usize,
        column: String,
        value: String,
    },
    #[error("column `{column}`: bin count {bins} must be at least 2")]
    InvalidBins { column: String, bins: usize },
    #[error("line {line}, column `{column}`: label `{label}` is not in the training domain")]
    UnseenLabel {
        line: usize,
        column: String,
        label: String,
    },
    #[error("line {line}, column `{column}`: missing value")]
    MissingValue { line: usize, column: String },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InfluenceError {
    #[error("conditioning attribute {0} cannot also be the target")]
    SameAttribute(usize),
    #[error("dataset slice is empty")]
    EmptySlice,
    #[error("no candidate attributes")]
    NoCandidates,
    #[error("distribution over attribute {0} has no support")]
    EmptySupport(usize),
    #[error("conditioning attribute {0} is among the candidates")]
    ConditionInCandidates(usize),
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("a model needs at least 2 attributes, got {0}")]
    TooFewAttributes(usize),
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("node budget of {0} exceeded")]
    NodeBudgetExceeded(usize),
    #[error("unsupported model document version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("model schema digest {model} does not match dataset digest {dataset}")]
    DigestMismatch { model: String, dataset: String },
    #[error("malformed model document at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error(transparent)]
    Influence(#[from] InfluenceError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SessionError {
    #[error("threshold must be a non-negative number")]
    InvalidSigma,
    #[error("session is finished")]
    Finished,
    #[error("attribute {got} answered but attribute {expected} is pending")]
    NotPending { expected: usize, got: usize },
    #[error("attribute {0} does not exist")]
    UnknownAttribute(usize),
    #[error("value {value} is outside the domain of attribute {attribute}")]
    OutOfDomain { attribute: usize, value: usize },
    #[error("attribute {0} was asked, not predicted")]
    NotPredicted(usize),
    #[error("answer row has {found} values, model has {expected} attributes")]
    RowLength { expected: usize, found: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("beta must be positive, got {0}")]
    InvalidBeta(f64),
    #[error("{results} results but {truth} truth rows")]
    RowCount { results: usize, truth: usize },
    #[error("respondent {row}: width {found}, expected {expected}")]
    Width {
        row: usize,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("dependency plan has a cycle through attribute {0}")]
    CyclicPlan(usize),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("scaling grid is empty")]
    EmptyGrid,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
