//! Scenario files.
//!
//! A scenario is a TOML document whose structure mirrors [`NetworkSpec`]
//! field for field. Unknown keys are rejected. See `docs/scenario.md` for the
//! full schema.
//!
//! Overrides use dot paths into that document. Path segments that meet an
//! array of tables select an element by index or by its `id`; an array with
//! a single element may be stepped through implicitly, so
//! `station.dwell_steps=3750` addresses the only station.

use std::path::Path;

use toml::Value;

use crate::error::ScenarioError;
use crate::network::NetworkSpec;

pub fn parse_scenario(text: &str) -> Result<NetworkSpec, ScenarioError> {
    Ok(toml::from_str(text)?)
}

pub fn scenario_to_string(spec: &NetworkSpec) -> Result<String, ScenarioError> {
    Ok(toml::to_string(spec)?)
}

pub fn load_scenario(path: &Path) -> Result<NetworkSpec, ScenarioError> {
    parse_scenario(&std::fs::read_to_string(path)?)
}

/// A `key=value` parameter override.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Override {
    pub key: String,
    pub value: String,
}

impl std::str::FromStr for Override {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (key, value) = s
            .split_once('=')
            .ok_or_else(|| ScenarioError::Override { key: s.to_string(), reason: "expected key=value".into() })?;
        let key = key.trim();
        if key.is_empty() || key.split('.').any(str::is_empty) {
            return Err(ScenarioError::Override { key: key.to_string(), reason: "empty path segment".into() });
        }
        Ok(Override { key: key.to_string(), value: value.trim().to_string() })
    }
}

/// Applies overrides to a spec. The same key given twice with different
/// values is an error.
pub fn apply_overrides(spec: &NetworkSpec, overrides: &[Override]) -> Result<NetworkSpec, ScenarioError> {
    for (i, a) in overrides.iter().enumerate() {
        if overrides[..i].iter().any(|b| b.key == a.key && b.value != a.value) {
            return Err(ScenarioError::Override { key: a.key.clone(), reason: "conflicting values".into() });
        }
    }
    if overrides.is_empty() {
        return Ok(spec.clone());
    }
    let mut doc = Value::try_from(spec)?;
    for o in overrides {
        set_path(&mut doc, o)?;
    }
    let text = toml::to_string(&doc)?;
    parse_scenario(&text).map_err(|e| ScenarioError::Override {
        key: overrides.iter().map(|o| o.key.as_str()).collect::<Vec<_>>().join(", "),
        reason: e.to_string(),
    })
}

fn set_path(doc: &mut Value, o: &Override) -> Result<(), ScenarioError> {
    let err = |reason: String| ScenarioError::Override { key: o.key.clone(), reason };
    let segments: Vec<&str> = o.key.split('.').collect();
    let mut cur = doc;
    let mut idx = 0;
    while idx < segments.len() {
        let seg = segments[idx];
        let last = idx + 1 == segments.len();
        match cur {
            Value::Table(table) => {
                if last {
                    let value = parse_value(&o.value, table.get(seg));
                    table.insert(seg.to_string(), value);
                    return Ok(());
                }
                cur = table.entry(seg.to_string()).or_insert_with(|| Value::Table(toml::Table::new()));
                idx += 1;
            }
            Value::Array(items) => {
                let pos = seg
                    .parse::<usize>()
                    .ok()
                    .filter(|&i| i < items.len())
                    .or_else(|| items.iter().position(|v| v.get("id").and_then(Value::as_str) == Some(seg)));
                match pos {
                    Some(p) => {
                        if last {
                            let value = parse_value(&o.value, Some(&items[p]));
                            items[p] = value;
                            return Ok(());
                        }
                        cur = &mut items[p];
                        idx += 1;
                    }
                    None if items.len() == 1 => cur = &mut items[0],
                    None => return Err(err(format!("no element `{seg}`"))),
                }
            }
            _ => return Err(err(format!("`{seg}` is below a plain value"))),
        }
    }
    Ok(())
}

/// Interprets an override value as a TOML value, keeping floats as floats
/// when the replaced value was one.
fn parse_value(raw: &str, previous: Option<&Value>) -> Value {
    let parsed = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    match (parsed, previous) {
        (Value::Integer(i), Some(Value::Float(_))) => Value::Float(i as f64),
        (v, _) => v,
    }
}
