//! Unit-time list scheduling of bucketed pipeline training.
//!
//! Each bucket (micro-batch) contributes a forward chain over the layers and
//! a loss task. Backprop then needs a backward chain `L → 1`; the LR method
//! instead needs one gradient-estimation task per layer, each depending only
//! on that bucket's loss. The simulator places tasks on computation units
//! with a greedy list scheduler and reports makespan and idle slots.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "kind"))]
pub enum TaskKind {
    Forward { layer: usize, bucket: usize },
    Loss { bucket: usize },
    Backward { layer: usize, bucket: usize },
    LrGrad { layer: usize, bucket: usize },
}

impl TaskKind {
    pub fn name(&self) -> &'static str {
        match self {
            TaskKind::Forward { .. } => "forward",
            TaskKind::Loss { .. } => "loss",
            TaskKind::Backward { .. } => "backward",
            TaskKind::LrGrad { .. } => "lr_grad",
        }
    }

    /// 1-based layer, `None` for loss tasks.
    pub fn layer(&self) -> Option<usize> {
        match *self {
            TaskKind::Forward { layer, .. } | TaskKind::Backward { layer, .. } | TaskKind::LrGrad { layer, .. } => {
                Some(layer)
            }
            TaskKind::Loss { .. } => None,
        }
    }

    pub fn bucket(&self) -> usize {
        match *self {
            TaskKind::Forward { bucket, .. }
            | TaskKind::Loss { bucket }
            | TaskKind::Backward { bucket, .. }
            | TaskKind::LrGrad { bucket, .. } => bucket,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Task {
    pub id: usize,
    pub kind: TaskKind,
    pub duration: usize,
}

/// Task durations in time steps. All 1 by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Durations {
    pub forward: usize,
    pub loss: usize,
    pub backward: usize,
    pub lr_grad: usize,
}

impl Default for Durations {
    fn default() -> Self {
        Self { forward: 1, loss: 1, backward: 1, lr_grad: 1 }
    }
}

impl Durations {
    fn of(&self, kind: &TaskKind) -> usize {
        match kind {
            TaskKind::Forward { .. } => self.forward,
            TaskKind::Loss { .. } => self.loss,
            TaskKind::Backward { .. } => self.backward,
            TaskKind::LrGrad { .. } => self.lr_grad,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskGraph {
    layers: usize,
    buckets: usize,
    tasks: Vec<Task>,
    preds: Vec<Vec<usize>>,
}

impl TaskGraph {
    pub fn new(layers: usize, buckets: usize) -> Self {
        Self { layers, buckets, tasks: Vec::new(), preds: Vec::new() }
    }

    pub fn add_task(&mut self, kind: TaskKind, duration: usize) -> usize {
        let id = self.tasks.len();
        self.tasks.push(Task { id, kind, duration });
        self.preds.push(Vec::new());
        id
    }

    /// `before` must finish before `after` starts.
    pub fn add_edge(&mut self, before: usize, after: usize) {
        self.preds[after].push(before);
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn buckets(&self) -> usize {
        self.buckets
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn predecessors(&self, id: usize) -> &[usize] {
        &self.preds[id]
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn successors(&self) -> Vec<Vec<usize>> {
        let mut succ = vec![Vec::new(); self.len()];
        for (t, ps) in self.preds.iter().enumerate() {
            for &p in ps {
                succ[p].push(t);
            }
        }
        succ
    }

    /// Kahn order, or an error when the graph has a cycle.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let succ = self.successors();
        let mut indeg: Vec<usize> = self.preds.iter().map(Vec::len).collect();
        let mut queue: VecDeque<usize> = (0..self.len()).filter(|&t| indeg[t] == 0).collect();
        let mut order = Vec::with_capacity(self.len());
        while let Some(t) = queue.pop_front() {
            order.push(t);
            for &s in &succ[t] {
                indeg[s] -= 1;
                if indeg[s] == 0 {
                    queue.push_back(s);
                }
            }
        }
        if order.len() != self.len() {
            return Err(Error::CyclicGraph);
        }
        Ok(order)
    }

    /// Longest path measured in summed durations.
    pub fn critical_path(&self) -> Result<usize> {
        let order = self.topological_order()?;
        let mut finish = vec![0usize; self.len()];
        for &t in &order {
            let start = self.preds[t].iter().map(|&p| finish[p]).max().unwrap_or(0);
            finish[t] = start + self.tasks[t].duration;
        }
        Ok(finish.into_iter().max().unwrap_or(0))
    }

    pub fn total_work(&self) -> usize {
        self.tasks.iter().map(|t| t.duration).sum()
    }
}

fn check_dims(layers: usize, buckets: usize) -> Result<()> {
    if layers == 0 || buckets == 0 {
        return Err(Error::InvalidArgument("layers and buckets must be positive".into()));
    }
    Ok(())
}

/// Per bucket: `F1 → … → FL → loss → BL → … → B1`. Buckets are independent.
pub fn build_bp_graph(layers: usize, buckets: usize) -> Result<TaskGraph> {
    build_bp_graph_with(layers, buckets, &Durations::default())
}

pub fn build_bp_graph_with(layers: usize, buckets: usize, d: &Durations) -> Result<TaskGraph> {
    check_dims(layers, buckets)?;
    let mut g = TaskGraph::new(layers, buckets);
    for bucket in 0..buckets {
        let mut prev = forward_chain(&mut g, layers, bucket, d);
        for layer in (1..=layers).rev() {
            let kind = TaskKind::Backward { layer, bucket };
            let id = g.add_task(kind, d.of(&kind));
            g.add_edge(prev, id);
            prev = id;
        }
    }
    Ok(g)
}

/// Per bucket: `F1 → … → FL → loss`, then every `lr_grad(l)` depends on the
/// loss alone.
pub fn build_lr_graph(layers: usize, buckets: usize) -> Result<TaskGraph> {
    build_lr_graph_with(layers, buckets, &Durations::default())
}

pub fn build_lr_graph_with(layers: usize, buckets: usize, d: &Durations) -> Result<TaskGraph> {
    check_dims(layers, buckets)?;
    let mut g = TaskGraph::new(layers, buckets);
    for bucket in 0..buckets {
        let loss = forward_chain(&mut g, layers, bucket, d);
        for layer in (1..=layers).rev() {
            let kind = TaskKind::LrGrad { layer, bucket };
            let id = g.add_task(kind, d.of(&kind));
            g.add_edge(loss, id);
        }
    }
    Ok(g)
}

/// Adds the forward chain and loss task for one bucket, returning the loss id.
fn forward_chain(g: &mut TaskGraph, layers: usize, bucket: usize, d: &Durations) -> usize {
    let mut prev = None;
    for layer in 1..=layers {
        let kind = TaskKind::Forward { layer, bucket };
        let id = g.add_task(kind, d.of(&kind));
        if let Some(p) = prev {
            g.add_edge(p, id);
        }
        prev = Some(id);
    }
    let kind = TaskKind::Loss { bucket };
    let loss = g.add_task(kind, d.of(&kind));
    g.add_edge(prev.expect("layers >= 1"), loss);
    loss
}

/// Which units may run which task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum UnitMode {
    /// Any unit runs any task.
    Flexible,
    /// Forward and backward of layer `l` are pinned to the unit owning that
    /// layer's stage (layers are split into `units` contiguous blocks), loss
    /// runs on the last unit, LR gradient tasks run anywhere.
    #[default]
    StageConstrained,
}

impl UnitMode {
    pub fn name(self) -> &'static str {
        match self {
            UnitMode::Flexible => "flexible",
            UnitMode::StageConstrained => "stage",
        }
    }
}

impl core::str::FromStr for UnitMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flexible" => Ok(Self::Flexible),
            "stage" | "stage-constrained" | "stage_constrained" => Ok(Self::StageConstrained),
            other => Err(Error::InvalidArgument(alloc::format!("unknown unit mode `{other}`"))),
        }
    }
}

/// Unit owning layer `layer` (1-based) when `layers` are split over `units`.
pub fn stage_of(layer: usize, layers: usize, units: usize) -> usize {
    (layer - 1) * units / layers
}

/// `None` means any unit.
pub fn pinned_unit(kind: &TaskKind, layers: usize, units: usize, mode: UnitMode) -> Option<usize> {
    match mode {
        UnitMode::Flexible => None,
        UnitMode::StageConstrained => match *kind {
            TaskKind::Forward { layer, .. } | TaskKind::Backward { layer, .. } => Some(stage_of(layer, layers, units)),
            TaskKind::Loss { .. } => Some(units - 1),
            TaskKind::LrGrad { .. } => None,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Assignment {
    pub task: usize,
    pub unit: usize,
    pub start: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScheduleResult {
    pub units: usize,
    pub makespan: usize,
    /// Indexed by task id.
    pub assignment: Vec<Assignment>,
    pub busy_slots: usize,
    pub total_slots: usize,
    pub idle_fraction: f64,
}

/// Greedy list scheduling. At every time step the ready tasks (all
/// predecessors finished) are taken in id order and each is placed on the
/// lowest-index free unit allowed to run it. Tasks pinned to a unit are
/// placed before tasks that may run anywhere; in flexible mode nothing is
/// pinned and the order is plain id order.
pub fn schedule(graph: &TaskGraph, units: usize, mode: UnitMode) -> Result<ScheduleResult> {
    if units == 0 {
        return Err(Error::InvalidArgument("need at least one unit".into()));
    }
    graph.topological_order()?;
    let n = graph.len();
    let mut finish: Vec<Option<usize>> = vec![None; n];
    let mut assignment: Vec<Option<Assignment>> = vec![None; n];
    let mut unit_free = vec![0usize; units];
    let mut remaining = n;
    let mut t = 0usize;
    while remaining > 0 {
        // pinned tasks claim their units before floating ones fill the rest
        for floating_pass in [false, true] {
            for task in graph.tasks() {
                if assignment[task.id].is_some() {
                    continue;
                }
                let pinned = pinned_unit(&task.kind, graph.layers(), units, mode);
                if pinned.is_none() != floating_pass {
                    continue;
                }
                let ready = graph.predecessors(task.id).iter().all(|&p| finish[p].is_some_and(|f| f <= t));
                if !ready {
                    continue;
                }
                let unit = (0..units).find(|&u| unit_free[u] <= t && pinned.is_none_or(|p| p == u));
                if let Some(u) = unit {
                    assignment[task.id] = Some(Assignment { task: task.id, unit: u, start: t });
                    finish[task.id] = Some(t + task.duration);
                    unit_free[u] = t + task.duration;
                    remaining -= 1;
                }
            }
        }
        t += 1;
    }
    let makespan = finish.iter().map(|f| f.expect("all scheduled")).max().unwrap_or(0);
    let busy_slots = graph.total_work();
    let total_slots = units * makespan;
    Ok(ScheduleResult {
        units,
        makespan,
        assignment: assignment.into_iter().map(|a| a.expect("all scheduled")).collect(),
        busy_slots,
        total_slots,
        idle_fraction: if total_slots == 0 { 0.0 } else { 1.0 - busy_slots as f64 / total_slots as f64 },
    })
}

/// Independent feasibility check of a schedule: every task placed once, on
/// an allowed unit, after its predecessors, with no unit overlap.
pub fn validate(graph: &TaskGraph, result: &ScheduleResult, mode: UnitMode) -> Result<()> {
    let bad = |msg: &str| Err(Error::InvalidArgument(alloc::format!("infeasible schedule: {msg}")));
    if result.assignment.len() != graph.len() {
        return bad("task count");
    }
    let mut occupied = vec![vec![false; result.makespan]; result.units];
    let mut busy = 0;
    for task in graph.tasks() {
        let a = result.assignment[task.id];
        if a.task != task.id || a.unit >= result.units {
            return bad("bad assignment record");
        }
        if let Some(p) = pinned_unit(&task.kind, graph.layers(), result.units, mode) {
            if p != a.unit {
                return bad("task on a unit it cannot run on");
            }
        }
        for &p in graph.predecessors(task.id) {
            let pa = result.assignment[p];
            if pa.start + graph.tasks()[p].duration > a.start {
                return bad("dependency violated");
            }
        }
        if a.start + task.duration > result.makespan {
            return bad("task ends after makespan");
        }
        for slot in a.start..a.start + task.duration {
            if occupied[a.unit][slot] {
                return bad("unit runs two tasks at once");
            }
            occupied[a.unit][slot] = true;
            busy += 1;
        }
    }
    if busy != result.busy_slots || result.total_slots != result.units * result.makespan {
        return bad("slot accounting");
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Comparison {
    pub mode: UnitMode,
    pub layers: usize,
    pub buckets: usize,
    pub units: usize,
    pub bp: ScheduleResult,
    pub lr: ScheduleResult,
    /// `bp.makespan / lr.makespan`.
    pub speedup: f64,
}

pub fn compare(layers: usize, buckets: usize, units: usize, mode: UnitMode) -> Result<Comparison> {
    compare_with(layers, buckets, units, mode, &Durations::default())
}

pub fn compare_with(
    layers: usize,
    buckets: usize,
    units: usize,
    mode: UnitMode,
    durations: &Durations,
) -> Result<Comparison> {
    let bp = schedule(&build_bp_graph_with(layers, buckets, durations)?, units, mode)?;
    let lr = schedule(&build_lr_graph_with(layers, buckets, durations)?, units, mode)?;
    Ok(Comparison { mode, layers, buckets, units, speedup: bp.makespan as f64 / lr.makespan as f64, bp, lr })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_sizes() {
        assert_eq!(build_bp_graph(1, 1).unwrap().len(), 3);
        let bp = build_bp_graph(4, 3).unwrap();
        assert_eq!(bp.len(), 27);
        assert_eq!(bp.critical_path().unwrap(), 9);
        let lr = build_lr_graph(4, 3).unwrap();
        assert_eq!(lr.len(), 27);
        assert_eq!(lr.critical_path().unwrap(), 6);
        for t in lr.tasks() {
            if let TaskKind::LrGrad { bucket, .. } = t.kind {
                let p = lr.predecessors(t.id);
                assert_eq!(p.len(), 1);
                assert_eq!(lr.tasks()[p[0]].kind, TaskKind::Loss { bucket });
            }
        }
        assert!(build_lr_graph(0, 1).is_err());
    }

    #[test]
    fn builders_are_acyclic() {
        for l in 1..=32 {
            for b in [1, 7, 32] {
                assert!(build_bp_graph(l, b).unwrap().topological_order().is_ok());
                assert!(build_lr_graph(l, b).unwrap().topological_order().is_ok());
            }
        }
    }

    #[test]
    fn cycles_are_rejected() {
        let mut g = TaskGraph::new(1, 1);
        let a = g.add_task(TaskKind::Forward { layer: 1, bucket: 0 }, 1);
        let b = g.add_task(TaskKind::Loss { bucket: 0 }, 1);
        g.add_edge(a, b);
        g.add_edge(b, a);
        assert_eq!(schedule(&g, 1, UnitMode::Flexible), Err(Error::CyclicGraph));
    }

    #[test]
    fn chain_schedules() {
        let g = build_bp_graph(1, 1).unwrap();
        for units in 1..4 {
            let r = schedule(&g, units, UnitMode::Flexible).unwrap();
            assert_eq!(r.makespan, 3);
            validate(&g, &r, UnitMode::Flexible).unwrap();
        }
        assert_eq!(schedule(&g, 1, UnitMode::Flexible).unwrap().idle_fraction, 0.0);
    }

    #[test]
    fn independent_chains_parallelise() {
        let g = build_bp_graph(4, 3).unwrap();
        let r = schedule(&g, 3, UnitMode::Flexible).unwrap();
        assert_eq!(r.makespan, 9);
        assert_eq!(r.idle_fraction, 0.0);
        validate(&g, &r, UnitMode::Flexible).unwrap();
    }

    #[test]
    fn single_layer_single_bucket_has_no_speedup() {
        for mode in [UnitMode::Flexible, UnitMode::StageConstrained] {
            assert_eq!(compare(1, 1, 1, mode).unwrap().speedup, 1.0);
        }
    }

    #[test]
    fn heterogeneous_durations() {
        let d = Durations { backward: 2, ..Durations::default() };
        let g = build_bp_graph_with(2, 2, &d).unwrap();
        assert_eq!(g.total_work(), 2 * (2 + 1 + 4));
        let r = schedule(&g, 2, UnitMode::StageConstrained).unwrap();
        validate(&g, &r, UnitMode::StageConstrained).unwrap();
        assert_eq!(r.busy_slots, g.total_work());
    }

    #[test]
    fn validator_catches_overlap() {
        let g = build_bp_graph(2, 2).unwrap();
        let mut r = schedule(&g, 2, UnitMode::Flexible).unwrap();
        r.assignment[1].start = r.assignment[0].start;
        assert!(validate(&g, &r, UnitMode::Flexible).is_err());
    }
}
