use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{message}")]
    Usage { message: String },
    #[error("cannot read or write {path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid config: {message}")]
    Parse { message: String, field: Option<String>, line: usize, column: usize },
    #[error("invalid value for {field}: {message}")]
    Validation { field: String, message: String },
    #[error(transparent)]
    Numeric(#[from] stirap_core::Error),
    #[error("reports differ in structure at {path}: {message}")]
    ShapeMismatch { path: String, message: String },
}

impl CliError {
    pub fn validation(field: &str, message: impl Into<String>) -> Self {
        CliError::Validation { field: field.to_string(), message: message.into() }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Numeric(_) => 3,
            _ => 2,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage { .. } => "usage",
            CliError::Io { .. } => "io",
            CliError::Parse { .. } => "parse",
            CliError::Validation { .. } => "validation",
            CliError::Numeric(_) => "numeric",
            CliError::ShapeMismatch { .. } => "shape_mismatch",
        }
    }

    /// Machine-readable form written to stderr; `source` names the config file.
    pub fn to_json(&self, source: Option<&str>) -> serde_json::Value {
        let mut obj = json!({
            "kind": self.kind(),
            "message": self.to_string(),
        });
        let map = obj.as_object_mut().expect("object");
        if let Some(s) = source {
            map.insert("path".into(), json!(s));
        }
        match self {
            CliError::Io { path, .. } => {
                map.insert("path".into(), json!(path));
            }
            CliError::Parse { field, line, column, .. } => {
                map.insert("line".into(), json!(line));
                map.insert("column".into(), json!(column));
                if let Some(f) = field {
                    map.insert("field".into(), json!(f));
                }
            }
            CliError::Validation { field, .. } => {
                map.insert("field".into(), json!(field));
            }
            CliError::Numeric(e) => {
                map.insert("module".into(), json!(e.module()));
            }
            CliError::ShapeMismatch { path, .. } => {
                map.insert("field".into(), json!(path));
            }
            CliError::Usage { .. } => {}
        }
        json!({ "error": obj })
    }
}
