//! On-disk representations. JSON goes through serde_json; CSV files are
//! plain comma-separated numbers and identifiers with a header row.

pub mod checkpoint;
pub mod dataset;
pub mod gradient;
pub mod metrics;
pub mod pipeline;
pub mod trainlog;

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{CliError, Result};

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(CliError::io(parent))?;
        }
    }
    let mut f = fs::File::create(path).map_err(CliError::io(path))?;
    f.write_all(bytes).map_err(CliError::io(path))
}

pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Invariant(e.to_string()))?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Formats an optional number as a CSV field, empty when absent.
pub(crate) fn opt_field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
