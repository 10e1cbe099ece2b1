//! `dotted.key=value` overrides applied to any serde-backed config.
//!
//! The config is round-tripped through a TOML table, the addressed key must
//! already exist (so typos are rejected), and the value text is parsed as a
//! TOML value, falling back to a bare string.

use serde::{de::DeserializeOwned, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub path: Vec<String>,
    pub value: Value,
}

impl Override {
    pub fn parse(spec: &str) -> Result<Self> {
        let (key, raw) = spec
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("override `{spec}` is not key=value")))?;
        let key = key.trim();
        if key.is_empty() || key.split('.').any(str::is_empty) {
            return Err(Error::InvalidArgument(format!("override `{spec}` has an empty key")));
        }
        let raw = raw.trim();
        let value = toml::from_str::<Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| Value::String(raw.to_string()));
        Ok(Self { path: key.split('.').map(str::to_string).collect(), value })
    }
}

fn coerce(old: &Value, new: Value) -> Value {
    // `dt=1` parses as an integer; keep float fields float.
    match (old, new) {
        (Value::Float(_), Value::Integer(i)) => Value::Float(i as f64),
        (Value::Array(o), Value::Array(n)) => {
            let proto = o.first().cloned();
            Value::Array(
                n.into_iter()
                    .map(|v| match &proto {
                        Some(p) => coerce(p, v),
                        None => v,
                    })
                    .collect(),
            )
        }
        (_, n) => n,
    }
}

/// Applies `overrides` in order and returns the rebuilt config.
pub fn apply<T>(base: &T, overrides: &[Override]) -> Result<T>
where
    T: Serialize + DeserializeOwned,
{
    let mut root = Value::try_from(base).map_err(|e| Error::Config(e.to_string()))?;
    for ov in overrides {
        let dotted = ov.path.join(".");
        let (last, parents) = ov.path.split_last().expect("non-empty path");
        let mut node = &mut root;
        for part in parents {
            node = node
                .get_mut(part.as_str())
                .filter(|v| v.is_table())
                .ok_or_else(|| Error::Config(format!("unknown override key `{dotted}`")))?;
        }
        let table = node.as_table_mut().ok_or_else(|| Error::Config(format!("unknown override key `{dotted}`")))?;
        let slot =
            table.get_mut(last.as_str()).ok_or_else(|| Error::Config(format!("unknown override key `{dotted}`")))?;
        *slot = coerce(slot, ov.value.clone());
    }
    root.try_into().map_err(|e: toml::de::Error| Error::Config(format!("override produced an invalid config: {e}")))
}

pub fn parse_all<S: AsRef<str>>(specs: &[S]) -> Result<Vec<Override>> {
    specs.iter().map(|s| Override::parse(s.as_ref())).collect()
}
