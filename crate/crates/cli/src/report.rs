//! Report assembly and serialization: one pretty-printed JSON document per
//! run, plus RFC 4180 CSV tables for row-level data.

use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;

use crate::config::CliError;

/// Every command emits exactly one report. `config` echoes the resolved
/// parameters so the run is reproducible from its output alone;
/// `generated_at_unix` is the only field allowed to differ between
/// identically seeded runs.
#[derive(Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub generated_at_unix: u64,
    pub seed: u64,
    pub config: Value,
    pub results: Value,
    pub pass: bool,
}

impl Report {
    pub fn new(command: &str, seed: u64, config: Value, results: Value, pass: bool) -> Report {
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Report {
            command: command.into(),
            generated_at_unix: now,
            seed,
            config,
            results,
            pass,
        }
    }

    /// Writes the report as pretty JSON to `out`, or to stdout when no path
    /// is given.
    pub fn write(&self, out: Option<&Path>) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Io(format!("serialize report: {e}")))?;
        text.push('\n');
        match out {
            Some(path) => std::fs::write(path, text)
                .map_err(|e| CliError::Io(format!("write {}: {e}", path.display()))),
            None => std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Io(format!("write stdout: {e}"))),
        }
    }
}

/// Minimal RFC 4180 writer: CRLF record separators, fields quoted only when
/// they contain a comma, quote, or line break.
pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut buf = String::new();
    push_record(&mut buf, header);
    for row in rows {
        push_record(&mut buf, row);
    }
    std::fs::write(path, buf).map_err(|e| CliError::Io(format!("write {}: {e}", path.display())))
}

fn push_record(buf: &mut String, fields: &[String]) {
    for (i, field) in fields.iter().enumerate() {
        if i > 0 {
            buf.push(',');
        }
        if field.contains(['"', ',', '\n', '\r']) {
            buf.push('"');
            buf.push_str(&field.replace('"', "\"\""));
            buf.push('"');
        } else {
            buf.push_str(field);
        }
    }
    buf.push_str("\r\n");
}
