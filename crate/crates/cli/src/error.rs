use std::fmt;
use std::path::Path;

use absvol_core::Error as CoreError;
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Usage,
    Io,
    DataQuality,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Usage => 2,
            ErrorKind::Io => 3,
            ErrorKind::DataQuality => 4,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
    pub details: Option<Value>,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Usage,
            message: message.into(),
            details: None,
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Self {
            kind: ErrorKind::Io,
            message: format!("{}: {err}", path.display()),
            details: Some(json!({ "path": path.display().to_string() })),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::DataQuality,
            message: message.into(),
            details: None,
        }
    }

    /// Core errors while reading or processing `path`.
    pub fn from_core(err: CoreError, path: Option<&Path>) -> Self {
        let kind = match &err {
            CoreError::Io(_) => ErrorKind::Io,
            CoreError::Csv(e) if e.is_io_error() => ErrorKind::Io,
            CoreError::Csv(_) => ErrorKind::DataQuality,
            CoreError::InvalidParameter(_) => ErrorKind::Usage,
            e if e.is_data_quality() => ErrorKind::DataQuality,
            _ => ErrorKind::Usage,
        };
        let mut details = serde_json::Map::new();
        if let Some(p) = path {
            details.insert("path".into(), json!(p.display().to_string()));
        }
        match &err {
            CoreError::NoRetainedDays { dropped } => {
                details.insert("dropped".into(), json!(dropped));
            }
            CoreError::InsufficientData { needed, got } => {
                details.insert("needed".into(), json!(needed));
                details.insert("got".into(), json!(got));
            }
            CoreError::MalformedLine { line, .. } => {
                details.insert("line".into(), json!(line));
            }
            _ => {}
        }
        let message = match path {
            Some(p) => format!("{}: {err}", p.display()),
            None => err.to_string(),
        };
        Self {
            kind,
            message,
            details: (!details.is_empty()).then_some(Value::Object(details)),
        }
    }

    /// The machine-readable report written to stderr.
    pub fn report(&self) -> Value {
        let mut body = json!({
            "kind": self.kind,
            "exit_code": self.kind.exit_code(),
            "message": self.message,
        });
        if let Some(d) = &self.details {
            body["details"] = d.clone();
        }
        json!({ "error": body })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        CliError::from_core(err, None)
    }
}
