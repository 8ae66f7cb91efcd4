//! Line-delimited JSON artifacts with an optional leading header record.
//!
//! The header line has the shape `{"_header": {...}}` and carries provenance
//! (boundaries, seed, config digest). Stages check the digest before
//! consuming an artifact.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

pub fn write_jsonl<T: Serialize>(path: &Path, header: Option<&Value>, items: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    if let Some(h) = header {
        serde_json::to_writer(&mut w, &serde_json::json!({ "_header": h }))?;
        w.write_all(b"\n")?;
    }
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn append_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = BufWriter::new(OpenOptions::new().create(true).append(true).open(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<(Option<Value>, Vec<T>)> {
    let reader = BufReader::new(File::open(path)?);
    let mut header = None;
    let mut items = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 {
            if let Ok(v) = serde_json::from_str::<Value>(&line) {
                if let Some(h) = v.get("_header") {
                    header = Some(h.clone());
                    continue;
                }
            }
        }
        items.push(serde_json::from_str(&line)?);
    }
    Ok((header, items))
}

/// Verify that an artifact header carries the expected config digest.
pub fn check_digest(header: Option<&Value>, expected: &str, force: bool) -> Result<()> {
    if force {
        return Ok(());
    }
    let found = header
        .and_then(|h| h.get("config_digest"))
        .and_then(|v| v.as_str())
        .unwrap_or("<absent>");
    if found != expected {
        return Err(Error::DigestMismatch { expected: expected.to_string(), found: found.to_string() });
    }
    Ok(())
}
