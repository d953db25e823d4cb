//! JSON experiment configs with dotted-key overrides.

use std::path::Path;

use pgglonet::bench::ExperimentConfig;
use serde_json::{Map, Value};

use crate::CliError;

/// Splits `key=value`; the value is read as JSON when it parses, as a bare string otherwise.
pub fn parse_override(raw: &str) -> Result<(String, Value), CliError> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{raw}` is not key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(CliError::Config(format!("override `{raw}` has an empty key segment")));
    }
    let value = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
    Ok((key.to_string(), value))
}

/// Sets `key` (dotted path) in `root`, creating missing objects along the way. Unknown leaf
/// names are caught later by the typed parse.
pub fn apply_override(root: &mut Value, key: &str, value: Value) -> Result<(), CliError> {
    let mut node = root;
    let segments: Vec<&str> = key.split('.').collect();
    for (i, seg) in segments.iter().enumerate() {
        let here = segments[..i].join(".");
        let last = i + 1 == segments.len();
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert(seg.to_string(), value);
                    return Ok(());
                }
                map.entry(seg.to_string())
                    .or_insert_with(|| Value::Object(Map::new()))
            }
            Value::Array(items) => {
                let idx: usize = seg.parse().map_err(|_| {
                    CliError::Config(format!("{key}: `{here}` is a list, `{seg}` is not an index"))
                })?;
                let len = items.len();
                let slot = items.get_mut(idx).ok_or_else(|| {
                    CliError::Config(format!("{key}: index {idx} out of range for `{here}` (length {len})"))
                })?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            Value::Null => {
                *node = Value::Object(Map::new());
                if let Value::Object(map) = node {
                    if last {
                        map.insert(seg.to_string(), value);
                        return Ok(());
                    }
                    map.entry(seg.to_string())
                        .or_insert_with(|| Value::Object(Map::new()))
                } else {
                    unreachable!()
                }
            }
            other => {
                return Err(CliError::Config(format!(
                    "{key}: `{here}` is {}, not an object",
                    kind(other)
                )))
            }
        };
    }
    Ok(())
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "a list",
        Value::Object(_) => "an object",
    }
}

/// Parses a config value into an [`ExperimentConfig`], reporting the key path of any type
/// mismatch or unknown field.
pub fn from_value(value: Value) -> Result<ExperimentConfig, CliError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            CliError::Config(e.inner().to_string())
        } else {
            CliError::Config(format!("{path}: {}", e.inner()))
        }
    })
}

/// Reads `path`, applies `overrides` in order and parses the result.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    for raw in overrides {
        let (key, v) = parse_override(raw)?;
        apply_override(&mut value, &key, v)?;
    }
    from_value(value).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}
