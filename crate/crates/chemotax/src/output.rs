//! CSV and JSON writers. Every CSV opens with a `#` block holding the
//! resolved configuration; floats carry 17 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

/// 17 significant digits; round-trips every f64.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone)]
pub struct Header {
    lines: Vec<String>,
}

impl Header {
    pub fn new(command: &str, config: &ExperimentConfig) -> Self {
        let mut lines = vec![format!(
            "chemotax {} {command}",
            env!("CARGO_PKG_VERSION")
        )];
        lines.extend(config.resolved.iter().map(|(k, v)| format!("{k} = {v}")));
        Self { lines }
    }

    pub fn note(mut self, line: impl Into<String>) -> Self {
        self.lines.push(line.into());
        self
    }
}

pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &Header, columns: &[&str]) -> Self {
        let mut text = String::new();
        for l in &header.lines {
            let _ = writeln!(text, "# {l}");
        }
        let _ = writeln!(text, "{}", columns.join(","));
        Self { text }
    }

    pub fn row<I, S>(&mut self, cells: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let cells: Vec<String> = cells.into_iter().map(|c| c.as_ref().to_string()).collect();
        let _ = writeln!(self.text, "{}", cells.join(","));
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, &self.text)
    }
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("json values serialize");
    text.push('\n');
    write_file(path, &text)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    let wrap = |source| CliError::Write {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(wrap)?;
    }
    fs::write(path, text).map_err(wrap)
}

pub fn out_path(config: &ExperimentConfig, name: &str) -> PathBuf {
    config.out_dir.join(name)
}

/// A JSON number, or null for non-finite values.
pub fn jnum(x: f64) -> serde_json::Value {
    serde_json::Number::from_f64(x).map_or(serde_json::Value::Null, serde_json::Value::Number)
}
