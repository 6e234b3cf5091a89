use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use signlr_core::pipeline::{Comparison, ScheduleResult, TaskGraph};

/// Published figures printed next to the simulated ones for comparison.
pub const SPEEDUP_REF: f64 = 1.5;
pub const BP_IDLE_REF: f64 = 0.533;
pub const LR_IDLE_REF: f64 = 0.24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSummary {
    pub makespan: usize,
    pub idle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub speedup_ref: f64,
    pub bp_idle_ref: f64,
    pub lr_idle_ref: f64,
}

impl Default for Reference {
    fn default() -> Self {
        Self { speedup_ref: SPEEDUP_REF, bp_idle_ref: BP_IDLE_REF, lr_idle_ref: LR_IDLE_REF }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub mode: String,
    #[serde(rename = "L")]
    pub layers: usize,
    #[serde(rename = "B")]
    pub buckets: usize,
    pub units: usize,
    pub bp: ScheduleSummary,
    pub lr: ScheduleSummary,
    pub speedup: f64,
    pub reference: Reference,
}

impl PipelineReport {
    pub fn from_comparison(c: &Comparison) -> Self {
        let summary = |s: &ScheduleResult| ScheduleSummary { makespan: s.makespan, idle: s.idle_fraction };
        Self {
            mode: c.mode.name().to_string(),
            layers: c.layers,
            buckets: c.buckets,
            units: c.units,
            bp: summary(&c.bp),
            lr: summary(&c.lr),
            speedup: c.speedup,
            reference: Reference::default(),
        }
    }
}

pub const GANTT_HEADER: &str = "schedule,unit,slot,task,layer,bucket";

/// One row per busy unit-time slot, sorted by unit then slot. Loss tasks
/// leave the layer field empty.
pub fn gantt_rows(out: &mut String, label: &str, graph: &TaskGraph, result: &ScheduleResult) {
    let mut rows = Vec::new();
    for a in &result.assignment {
        let task = &graph.tasks()[a.task];
        for slot in a.start..a.start + task.duration {
            rows.push((a.unit, slot, task.kind));
        }
    }
    rows.sort_by_key(|r| (r.0, r.1));
    for (unit, slot, kind) in rows {
        let layer = kind.layer().map(|l| l.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{label},{unit},{slot},{},{layer},{}", kind.name(), kind.bucket());
    }
}
