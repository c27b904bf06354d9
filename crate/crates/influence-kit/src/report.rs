//! Machine-readable output helpers.
//!
//! Every JSON artifact the toolkit writes goes through [`to_sorted_pretty`]:
//! keys are sorted (serde_json's default map is a BTreeMap) and floats print
//! in their shortest round-trippable form, so identical runs produce
//! byte-identical files a harness can diff.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Serialize to pretty JSON with lexicographically sorted keys and a
/// trailing newline.
pub fn to_sorted_pretty<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::invalid("json value", e.to_string()))?;
    let mut text = serde_json::to_string_pretty(&v)
        .map_err(|e| Error::invalid("json output", e.to_string()))?;
    text.push('\n');
    Ok(text)
}

/// Serialize to a single compact JSON line (the CLI's stdout headline).
pub fn to_sorted_line<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::invalid("json value", e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| Error::invalid("json output", e.to_string()))
}

/// Write sorted pretty JSON to a file.
pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = to_sorted_pretty(value)?;
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Write a small CSV table. Rows are pre-formatted cells; floats should be
/// formatted with `{}` (shortest round-trippable form).
pub fn write_csv_table(
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}
