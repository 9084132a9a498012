use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// `git describe`-style version recorded at build time.
pub const VERSION: &str = env!("CALDERON_LAB_VERSION");

/// First line of every CSV artifact.
pub fn csv_header(config_hash: &str) -> String {
    format!("# config_hash={config_hash} version={VERSION}")
}

/// Writes `body` as a JSON object led by the config hash and version.
pub fn write_json<T: Serialize>(path: &Path, config_hash: &str, body: &T) -> Result<()> {
    let mut obj = Map::new();
    obj.insert("config_hash".into(), Value::String(config_hash.into()));
    obj.insert("version".into(), Value::String(VERSION.into()));
    match serde_json::to_value(body)? {
        Value::Object(fields) => obj.extend(fields),
        other => {
            obj.insert("data".into(), other);
        }
    }
    let mut text = serde_json::to_string_pretty(&Value::Object(obj))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Config hash stamped on an artifact, if it carries one.
pub fn artifact_hash(path: &Path) -> Result<Option<String>> {
    let text = std::fs::read_to_string(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => Ok(text
            .lines()
            .next()
            .and_then(|l| l.strip_prefix("# config_hash="))
            .and_then(|rest| rest.split_whitespace().next())
            .map(String::from)),
        Some("json") => Ok(serde_json::from_str::<Value>(&text)
            .ok()
            .and_then(|v| v.get("config_hash").and_then(|h| h.as_str()).map(String::from))),
        _ => Ok(None),
    }
}

/// Stamped artifacts in `dir` and the distinct hashes they carry.
pub fn scan_hashes(dir: &Path) -> Result<(Vec<PathBuf>, BTreeSet<String>)> {
    let mut files = Vec::new();
    let mut hashes = BTreeSet::new();
    if !dir.exists() {
        return Ok((files, hashes));
    }
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?.filter_map(|e| e.ok().map(|e| e.path())).collect();
    entries.sort();
    for path in entries {
        if path.is_file() {
            if let Some(h) = artifact_hash(&path)? {
                files.push(path);
                hashes.insert(h);
            }
        }
    }
    Ok((files, hashes))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))
}
