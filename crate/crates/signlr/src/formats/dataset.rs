use std::fs;
use std::path::Path;

use signlr_core::data::{Dataset, Sample};
use signlr_core::loss::one_hot;

use crate::error::{CliError, Result};

/// Reads a labelled dataset: one sample per line, feature values followed
/// by an integer class label in `0..classes`. Blank lines and lines
/// starting with `#` are skipped; a first line that does not parse as
/// numbers is taken as a header.
pub fn load_csv(path: &Path, classes: usize) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    parse_csv(&text, classes).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_csv(text: &str, classes: usize) -> Result<Dataset> {
    let mut samples = Vec::new();
    let mut width = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let values: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        let values = match values {
            Ok(v) => v,
            Err(_) if samples.is_empty() && width.is_none() => {
                width = Some(fields.len());
                continue;
            }
            Err(e) => return Err(CliError::Config(format!("line {}: {e}", i + 1))),
        };
        if *width.get_or_insert(values.len()) != values.len() || values.len() < 2 {
            return Err(CliError::Config(format!("line {}: expected {} fields", i + 1, width.unwrap_or(2))));
        }
        let (x, label) = values.split_at(values.len() - 1);
        let label = label[0];
        if label < 0.0 || label.fract() != 0.0 || label as usize >= classes {
            return Err(CliError::Config(format!("line {}: label {label} outside 0..{classes}", i + 1)));
        }
        samples.push(Sample::new(x.to_vec(), one_hot(label as usize, classes)));
    }
    if samples.is_empty() {
        return Err(CliError::Config("dataset has no samples".into()));
    }
    Ok(Dataset::new(samples))
}
