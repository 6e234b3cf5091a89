use std::fmt::Write as _;
use std::path::Path;

use signlr_core::optimizer::{EpochRecord, StepRecord, TrainLog};

use super::{opt_field, write_file};
use crate::error::{CliError, Result};

pub const EPOCH_HEADER: &str = "epoch,mean_loss,train_accuracy,test_accuracy";

/// One JSON object per optimizer step.
pub fn steps_jsonl(steps: &[StepRecord]) -> Result<String> {
    let mut out = String::new();
    for s in steps {
        out += &serde_json::to_string(s).map_err(|e| CliError::Invariant(e.to_string()))?;
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_steps_jsonl(text: &str) -> Result<Vec<StepRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| CliError::Config(e.to_string())))
        .collect()
}

pub fn epochs_csv(epochs: &[EpochRecord]) -> String {
    let mut out = String::from(EPOCH_HEADER);
    out.push('\n');
    for e in epochs {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            e.epoch,
            e.mean_loss,
            opt_field(e.train_accuracy),
            opt_field(e.validation_accuracy)
        );
    }
    out
}

pub fn save(log: &TrainLog, jsonl: &Path, csv: &Path) -> Result<()> {
    write_file(jsonl, steps_jsonl(&log.steps)?.as_bytes())?;
    write_file(csv, epochs_csv(&log.epochs).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip() {
        let steps = vec![
            StepRecord { step: 0, epoch: 0, loss: 1.5, step_size: 0.1, grad_norm: 2.0, cosine: None },
            StepRecord { step: 1, epoch: 0, loss: 1.25, step_size: 0.1, grad_norm: 1.0, cosine: Some(0.5) },
        ];
        let text = steps_jsonl(&steps).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(!text.lines().next().unwrap().contains("cosine"));
        assert_eq!(parse_steps_jsonl(&text).unwrap(), steps);
    }

    #[test]
    fn epoch_csv_leaves_missing_accuracy_empty() {
        let e = [EpochRecord { epoch: 3, mean_loss: 0.5, train_accuracy: Some(0.75), validation_accuracy: None }];
        assert_eq!(epochs_csv(&e), format!("{EPOCH_HEADER}\n3,0.5,0.75,\n"));
    }
}
