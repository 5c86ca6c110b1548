//! `manifest.json` in the run directory: checksums of every output file plus
//! one entry per invocation with its settings and time.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Map, Value};

use crate::settings::Settings;
use crate::CliError;

pub const MANIFEST: &str = "manifest.json";

fn relative(run: &Path, path: &Path) -> String {
    path.strip_prefix(run).unwrap_or(path).to_string_lossy().replace('\\', "/")
}

/// Adds `written` (paths inside `run`) to the manifest.
pub fn record(run: &Path, command: &str, settings: &Settings, seeds: &[u64], written: &[PathBuf]) -> Result<(), CliError> {
    let path = run.join(MANIFEST);
    let mut root = match fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str::<Value>(&text).unwrap_or_else(|_| json!({})),
        Err(_) => json!({}),
    };
    let obj = root.as_object_mut().expect("manifest is an object");
    let mut files = obj.remove("files").and_then(|v| v.as_object().cloned()).unwrap_or_default();
    let mut names = Vec::new();
    for p in written {
        let bytes = fs::read(p)?;
        let name = relative(run, p);
        files.insert(name.clone(), json!(wuglab::sha256_hex(&bytes)));
        names.push(Value::String(name));
    }
    let snapshot: Map<String, Value> = settings.iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
    let time = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let entry = json!({
        "command": command,
        "unix_time": time,
        "settings": snapshot,
        "seeds": seeds,
        "written": names,
    });
    let mut history = obj.remove("history").and_then(|v| v.as_array().cloned()).unwrap_or_default();
    history.push(entry);
    obj.insert("files".into(), Value::Object(files));
    obj.insert("history".into(), Value::Array(history));
    fs::write(&path, serde_json::to_string_pretty(&root)? + "\n")?;
    Ok(())
}

/// File checksums recorded in a run's manifest.
pub fn checksums(run: &Path) -> Result<Map<String, Value>, CliError> {
    let text = fs::read_to_string(run.join(MANIFEST))?;
    let root: Value = serde_json::from_str(&text)?;
    Ok(root.get("files").and_then(Value::as_object).cloned().unwrap_or_default())
}
