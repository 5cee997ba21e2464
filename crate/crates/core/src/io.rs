//! CSV and key-value output shared by all experiment artifacts.
//!
//! Floats are written with 17 significant digits in scientific notation
//! (`{:.16e}`), which round-trips every finite `f64` and is byte-stable
//! across platforms.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::Result;

pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{x:.16e}")
    }
}

/// In-memory CSV table with a leading `# verifies: <anchor>` comment row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub anchor: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(anchor: &str, columns: &[&str]) -> Self {
        Self {
            anchor: anchor.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_floats(&mut self, values: &[f64]) {
        debug_assert_eq!(values.len(), self.columns.len());
        self.rows.push(values.iter().map(|v| fmt_f64(*v)).collect());
    }

    pub fn push_raw(&mut self, values: Vec<String>) {
        debug_assert_eq!(values.len(), self.columns.len());
        self.rows.push(values);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# verifies: {}", self.anchor);
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Column values parsed back as floats.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx].parse().unwrap_or(f64::NAN)).collect())
    }
}

/// Writes `contents` to `path` through a temporary sibling file and rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let file_name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp = path.with_file_name(format!(".{file_name}.tmp-{}", std::process::id()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
