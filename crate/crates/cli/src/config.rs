//! Merging `--config` JSON over command-line flags.

use anyhow::{bail, Context, Result};
use serde::{de::DeserializeOwned, Serialize};
use serde_json::Value;
use std::path::Path;

/// Recursively overlay `over` onto `base`; objects merge key by key, other
/// values replace.
pub fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Serialize `args`, overlay the JSON object at `path`, and read the result
/// back.
pub fn apply_file<T: Serialize + DeserializeOwned>(args: &T, path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(serde_json::from_value(serde_json::to_value(args)?)?);
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let over: Value = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    if !over.is_object() {
        bail!("config {} must hold a JSON object", path.display());
    }
    let mut base = serde_json::to_value(args)?;
    merge(&mut base, over);
    serde_json::from_value(base).with_context(|| format!("applying config {}", path.display()))
}

/// Overlay an optional partial object onto a full default value.
pub fn overlay<T: Serialize + DeserializeOwned>(base: &T, over: Option<&Value>) -> Result<T> {
    let mut v = serde_json::to_value(base)?;
    if let Some(o) = over {
        merge(&mut v, o.clone());
    }
    Ok(serde_json::from_value(v)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn nested_merge() {
        let mut base = json!({"a": 1, "b": {"c": 2, "d": 3}});
        merge(&mut base, json!({"b": {"d": 4}, "e": 5}));
        assert_eq!(base, json!({"a": 1, "b": {"c": 2, "d": 4}, "e": 5}));
    }
}
