//! Line-delimited JSON record files: one object per line, one record kind per file.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// A record kind that can be stored one-per-line.
pub trait Record: Serialize + DeserializeOwned {
    /// Human-readable record kind used in error messages.
    const KIND: &'static str;
    /// Field names recognised by the loader; anything else is ignored with a warning.
    const FIELDS: &'static [&'static str];

    fn record_id(&self) -> String;

    /// Checks record-local invariants, returning the offending field and a message.
    fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        Ok(())
    }
}

/// A record together with the 1-based line it was read from.
#[derive(Debug, Clone)]
pub struct Located<T> {
    pub line: usize,
    pub record: T,
}

/// Parses line-delimited records from text. Blank lines and lines starting with `#` are skipped.
pub fn parse_records<T: Record>(
    text: &str,
    file: &str,
    warnings: &mut Vec<String>,
) -> Result<Vec<Located<T>>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if let Some(rec) = parse_line::<T>(raw, file, line, warnings)? {
            out.push(Located { line, record: rec });
        }
    }
    Ok(out)
}

fn parse_line<T: Record>(
    raw: &str,
    file: &str,
    line: usize,
    warnings: &mut Vec<String>,
) -> Result<Option<T>> {
    let trimmed = raw.trim();
    if trimmed.is_empty() || trimmed.starts_with('#') {
        return Ok(None);
    }
    let value: serde_json::Value = serde_json::from_str(trimmed).map_err(|e| Error::Parse {
        file: file.to_string(),
        line,
        message: e.to_string(),
    })?;
    let Some(obj) = value.as_object() else {
        return Err(Error::Parse {
            file: file.to_string(),
            line,
            message: format!("expected a JSON object for {}", T::KIND),
        });
    };
    for key in obj.keys() {
        if !T::FIELDS.contains(&key.as_str()) {
            let msg = format!("{file}:{line}: ignoring unknown {} field `{key}`", T::KIND);
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }
    let rec: T = serde_json::from_value(value).map_err(|e| Error::Parse {
        file: file.to_string(),
        line,
        message: e.to_string(),
    })?;
    if let Err((field, message)) = rec.validate() {
        return Err(Error::Invariant {
            file: file.to_string(),
            line,
            record: T::KIND,
            id: rec.record_id(),
            field,
            message,
        });
    }
    Ok(Some(rec))
}

/// Reads a record file from disk.
pub fn read_records<T: Record>(path: &Path, warnings: &mut Vec<String>) -> Result<Vec<Located<T>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let label = path.display().to_string();
    let mut out = Vec::new();
    for (idx, raw) in BufReader::new(file).lines().enumerate() {
        let raw = raw.map_err(|e| Error::io(path, e))?;
        if let Some(rec) = parse_line::<T>(&raw, &label, idx + 1, warnings)? {
            out.push(Located {
                line: idx + 1,
                record: rec,
            });
        }
    }
    Ok(out)
}

/// Reads a record file and drops line information.
pub fn read_all<T: Record>(path: &Path) -> Result<Vec<T>> {
    let mut warnings = Vec::new();
    Ok(read_records(path, &mut warnings)?
        .into_iter()
        .map(|l| l.record)
        .collect())
}

/// Writes records one JSON object per line.
pub fn write_records<'a, T: Serialize + 'a>(
    path: &Path,
    records: impl IntoIterator<Item = &'a T>,
) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for rec in records {
        let line = serde_json::to_string(rec).expect("records serialize to JSON");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Serializes records to a line-delimited string.
pub fn to_lines<'a, T: Serialize + 'a>(records: impl IntoIterator<Item = &'a T>) -> String {
    let mut out = String::new();
    for rec in records {
        out.push_str(&serde_json::to_string(rec).expect("records serialize to JSON"));
        out.push('\n');
    }
    out
}
