//! Numeric comparison of two reports.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// Maximum absolute deviation per top-level result section; only sections
    /// that differ are listed.
    pub sections: BTreeMap<String, f64>,
    pub max_deviation: f64,
    pub tolerance: f64,
}

impl Comparison {
    pub fn equal(&self) -> bool {
        self.max_deviation <= self.tolerance
    }

    pub fn to_json(&self) -> Value {
        json!({
            "equal": self.equal(),
            "tolerance": self.tolerance,
            "max_deviation": self.max_deviation,
            "sections": self.sections,
        })
    }
}

fn mismatch(path: &str, message: impl Into<String>) -> CliError {
    CliError::ShapeMismatch { path: path.to_string(), message: message.into() }
}

fn walk(a: &Value, b: &Value, path: &str) -> Result<f64, CliError> {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap_or(f64::NAN), y.as_f64().unwrap_or(f64::NAN));
            Ok((x - y).abs())
        }
        (Value::Null, Value::Null) => Ok(0.0),
        (Value::Bool(x), Value::Bool(y)) if x == y => Ok(0.0),
        (Value::String(x), Value::String(y)) if x == y => Ok(0.0),
        (Value::Array(x), Value::Array(y)) => {
            if x.len() != y.len() {
                return Err(mismatch(path, format!("array lengths {} and {}", x.len(), y.len())));
            }
            x.iter()
                .zip(y)
                .enumerate()
                .try_fold(0.0, |m, (i, (p, q))| Ok(f64::max(m, walk(p, q, &format!("{path}[{i}]"))?)))
        }
        (Value::Object(x), Value::Object(y)) => {
            if x.len() != y.len() || x.keys().any(|k| !y.contains_key(k)) {
                return Err(mismatch(path, "objects have different keys"));
            }
            x.iter().try_fold(0.0, |m, (k, v)| Ok(f64::max(m, walk(v, &y[k], &format!("{path}.{k}"))?)))
        }
        _ => Err(mismatch(path, format!("values {a} and {b} are not comparable"))),
    }
}

/// Compare the `results` blocks of two reports for the same command.
pub fn compare_reports(r1: &Value, r2: &Value, tolerance: f64) -> Result<Comparison, CliError> {
    let command = |r: &Value| r.pointer("/header/command").cloned().unwrap_or(Value::Null);
    if command(r1) != command(r2) {
        return Err(mismatch("header.command", format!("{} vs {}", command(r1), command(r2))));
    }
    let (Some(Value::Object(a)), Some(Value::Object(b))) = (r1.get("results"), r2.get("results")) else {
        return Err(mismatch("results", "missing results section"));
    };
    if a.len() != b.len() || a.keys().any(|k| !b.contains_key(k)) {
        return Err(mismatch("results", "reports have different sections"));
    }
    let mut sections = BTreeMap::new();
    let mut max_deviation: f64 = 0.0;
    for (k, v) in a {
        let d = walk(v, &b[k], &format!("results.{k}"))?;
        if d != 0.0 {
            sections.insert(k.clone(), d);
        }
        max_deviation = max_deviation.max(d);
    }
    Ok(Comparison { sections, max_deviation, tolerance })
}
