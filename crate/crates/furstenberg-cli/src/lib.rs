//! Batch harness around the `furstenberg` crate.
//!
//! Every command is a pure function of its configuration and returns a CSV
//! body, an optional JSON artifact and a short human summary. Assertions are
//! made in exact arithmetic; floats only appear in report columns.

pub mod commands;
pub mod config;
pub mod suite;

use serde_json::json;

pub use commands::run;
pub use config::{Command, ExperimentConfig, GeneratorKind, GeneratorSpec};

/// Exit status for a failed assertion.
pub const EXIT_CHECK: i32 = 2;
/// Exit status for an unusable configuration.
pub const EXIT_CONFIG: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("check failed: {0}")]
    Check(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Check(_) => EXIT_CHECK,
            CliError::Config(_) | CliError::Io(_) => EXIT_CONFIG,
        }
    }

    /// Machine-readable failure witness.
    pub fn witness(&self) -> serde_json::Value {
        let kind = match self {
            CliError::Check(_) => "check",
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
        };
        json!({"error": kind, "exit": self.exit_code(), "message": self.to_string()})
    }
}

impl From<furstenberg::Error> for CliError {
    fn from(e: furstenberg::Error) -> Self {
        use furstenberg::Error as E;
        match e {
            E::Check(_) | E::Empty(_) => CliError::Check(e.to_string()),
            E::Scale(_) | E::Invalid(_) | E::Parse(_) => CliError::Config(e.to_string()),
        }
    }
}

/// Output of one command.
#[derive(Clone, Debug, Default)]
pub struct Artifacts {
    /// CSV for every command except `gen`, which emits the family text format.
    pub body: String,
    pub json: Option<serde_json::Value>,
    pub summary: String,
    /// Set when the command ran to completion but an assertion failed; the
    /// artifacts are still written.
    pub failure: Option<String>,
}

/// Serialises rows with a fixed header.
pub fn csv_string<R: serde::Serialize>(rows: &[R]) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("rows serialise");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 csv")
}

/// Generic `case,metric,value,limit,pass` row.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct ReportRow {
    pub case: String,
    pub metric: String,
    pub value: String,
    pub limit: String,
    pub pass: bool,
}

impl ReportRow {
    pub fn new(case: impl Into<String>, metric: impl Into<String>, value: impl ToString, limit: impl ToString, pass: bool) -> Self {
        ReportRow { case: case.into(), metric: metric.into(), value: value.to_string(), limit: limit.to_string(), pass }
    }
}
