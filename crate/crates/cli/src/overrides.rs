//! Dotted-key overrides for JSON config files, so one base config can be
//! reused across runs: `--set optim.lr0=0.05 --set loss.kind=idac`.

use std::fs;
use std::path::Path;

use idac_core::experiment::TrainConfig;
use serde_json::Value;

/// Applies one `KEY=VALUE` override in place. The key is a dotted path into
/// nested objects; missing intermediate objects are created (the final
/// deserialization rejects paths the schema does not know). The value is
/// parsed as JSON when possible, otherwise taken as a string, so
/// `optim.lr0=0.05`, `loss.kind=idac`, `noise=null`, and
/// `optim.milestones=[100,250]` all do what they look like.
pub fn apply(root: &mut Value, spec: &str) -> Result<(), String> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| format!("override `{spec}` is not of the form KEY=VALUE"))?;
    if path.is_empty() || path.split('.').any(str::is_empty) {
        return Err(format!("override `{spec}` has an empty key segment"));
    }
    let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));

    let mut cursor = root;
    let mut segments = path.split('.').peekable();
    while let Some(segment) = segments.next() {
        let map = cursor
            .as_object_mut()
            .ok_or_else(|| format!("`{path}`: cannot descend into a non-object value"))?;
        if segments.peek().is_none() {
            map.insert(segment.to_string(), value);
            return Ok(());
        }
        cursor = map
            .entry(segment.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("the loop always returns on the last segment");
}

/// Reads a training config, applies overrides, and type-checks the result
/// against the full schema before anything expensive starts.
pub fn load_config(path: &Path, sets: &[String]) -> Result<TrainConfig, String> {
    let text =
        fs::read_to_string(path).map_err(|e| format!("config {}: {e}", path.display()))?;
    let mut value: Value =
        serde_json::from_str(&text).map_err(|e| format!("config {}: {e}", path.display()))?;
    for spec in sets {
        apply(&mut value, spec)?;
    }
    let config: TrainConfig =
        serde_json::from_value(value).map_err(|e| format!("config: {e}"))?;
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}
