//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// A single dataset-invariant violation, tied to the experiment that broke it
/// (or to the dataset as a whole when `label` is `None`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub label: Option<String>,
    pub rule: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.label {
            Some(label) => write!(f, "[{label}] {}", self.rule),
            None => write!(f, "{}", self.rule),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A series (or residual) is numerically constant, so the requested
    /// association measure is undefined on it.
    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("ill-conditioned problem: {0}")]
    IllConditioned(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dataset validation failed: {}", format_violations(.0))]
    Validation(Vec<Violation>),

    #[error("parse error in {path} at row {row}{}: {msg}", col_suffix(.col))]
    Parse {
        path: String,
        row: usize,
        col: Option<usize>,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error in {path}: {msg}")]
    Json { path: String, msg: String },
}

impl Error {
    /// Exit code the CLI maps this error to: 1 for usage/config errors,
    /// 2 for data errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            _ => 2,
        }
    }
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

fn col_suffix(col: &Option<usize>) -> String {
    match col {
        Some(c) => format!(", column {c}"),
        None => String::new(),
    }
}
