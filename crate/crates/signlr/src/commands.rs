//! The four subcommands as library functions. Each writes its files under
//! the given output directory and returns what it computed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use signlr_core::data::Sample;
use signlr_core::metrics::{acc_metric, cosine, linear_fit, sta_metric, MetricSeries};
use signlr_core::optimizer::{
    accuracy, descend, train, DescentConfig, GradientMethod, ProjectionBox, StepSchedule, TrainError, TrainLog,
    Trajectory, DIVERGENCE_THRESHOLD,
};
use signlr_core::pipeline::{build_bp_graph, build_lr_graph, schedule, validate, Comparison, UnitMode};
use signlr_core::{bp_gradient, estimate, Activation, EstimatorConfig, EstimatorKind, NetworkSpec, Objective, RngStream, SignMode};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::exec::ThreadPoolExecutor;
use crate::formats::checkpoint::Checkpoint;
use crate::formats::metrics::{median, series_rows, summary_csv, SummaryRow, SERIES_HEADER};
use crate::formats::pipeline::{gantt_rows, PipelineReport, GANTT_HEADER};
use crate::formats::{trainlog, write_file};

pub const TRAIN_LOG_FILE: &str = "train_log.jsonl";
pub const EPOCH_CSV_FILE: &str = "epochs.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const SERIES_CSV_FILE: &str = "gradcheck_series.csv";
pub const SUMMARY_CSV_FILE: &str = "gradcheck_summary.csv";

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub log: TrainLog,
    pub network: NetworkSpec,
    pub test_accuracy: Option<f64>,
    pub files: Vec<PathBuf>,
}

/// Trains on the configured dataset and writes the step log, the epoch
/// table and the final checkpoint. On divergence the partial log and the
/// last parameters are still written before the error is returned.
pub fn cmd_train(cfg: &RunConfig, out_dir: &Path, threads: usize) -> Result<TrainOutcome> {
    cfg.validate()?;
    let (train_set, test_set) = cfg.split_dataset()?;
    let first = train_set.samples.first().ok_or_else(|| CliError::Config("training split is empty".into()))?;
    let mut net = cfg.network(first.x.len())?;
    let tc = cfg.train_config();
    if let GradientMethod::Estimator(e) = &tc.method {
        e.validate(&net).map_err(config_err)?;
    }
    let exec = ThreadPoolExecutor::new(threads)?;
    let objective = cfg.objective();
    let validation = (!test_set.is_empty()).then_some(&test_set);
    let result = train(&mut net, &train_set, validation, &objective, &tc, &exec);

    let files = vec![out_dir.join(TRAIN_LOG_FILE), out_dir.join(EPOCH_CSV_FILE), out_dir.join(CHECKPOINT_FILE)];
    let log = match &result {
        Ok(log) => log.clone(),
        Err(TrainError::Diverged { log, .. }) => (**log).clone(),
        Err(TrainError::Core(e)) => return Err(e.clone().into()),
    };
    trainlog::save(&log, &files[0], &files[1])?;
    Checkpoint::from_network(&net).save(&files[2])?;
    result?;
    let test_accuracy = accuracy(&net, &test_set)?;
    Ok(TrainOutcome { log, network: net, test_accuracy, files })
}

/// One estimator variant's cosine series for one noise seed.
#[derive(Debug, Clone)]
pub struct SeriesRun {
    pub method: String,
    pub seed: u64,
    pub series: MetricSeries,
}

#[derive(Debug, Clone)]
pub struct GradcheckOutcome {
    pub runs: Vec<SeriesRun>,
    pub summary: Vec<SummaryRow>,
    pub files: Vec<PathBuf>,
}

impl GradcheckOutcome {
    /// The `median` summary row of `method`.
    pub fn median_row(&self, method: &str) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.method == method && r.seed == "median")
    }
}

/// Column label of an estimator variant: the kind, with `_sign` appended
/// for per-sample sign encoding.
pub fn method_label(kind: EstimatorKind, sign: SignMode) -> String {
    match sign {
        SignMode::Off => kind.name().to_string(),
        SignMode::PerSample => format!("{}_sign", kind.name()),
        SignMode::OfUpdate => format!("{}_sign_of_update", kind.name()),
    }
}

/// Cosine between estimator θ-directions and the backprop gradient across
/// the copy grid. The network is initialised from `seed` and held fixed;
/// repeat `r` draws its noise from seed `seed + r`, and grid point `n` from
/// batch key `n` of that seed.
pub fn cmd_gradcheck(cfg: &RunConfig, out_dir: &Path, threads: usize) -> Result<GradcheckOutcome> {
    cfg.validate()?;
    let gc = &cfg.gradcheck;
    let grid = gc.grid()?;
    let data = cfg.dataset()?;
    if data.len() < gc.samples {
        return Err(CliError::Config(format!("gradcheck needs {} samples, dataset has {}", gc.samples, data.len())));
    }
    let batch: Vec<Sample> = data.samples[..gc.samples].to_vec();
    let net = cfg.network(batch[0].x.len())?;
    let objective = cfg.objective();
    let exec = ThreadPoolExecutor::new(threads)?;
    let oracle = bp_gradient(&net, &batch, &objective)?.theta_flat();

    let mut runs = Vec::new();
    let mut summary = vec![SummaryRow {
        method: "bp".into(),
        seed: "self".into(),
        acc: cosine(&oracle, &oracle)?,
        sta: None,
        slope: None,
    }];
    let mut series_csv = format!("{SERIES_HEADER}\n");
    for &kind in &gc.kinds {
        for sign in [SignMode::Off, SignMode::PerSample] {
            let label = method_label(kind, sign);
            let mut rows = Vec::new();
            for r in 0..gc.repeats as u64 {
                let seed = cfg.seed.wrapping_add(r);
                let stream = RngStream::new(seed);
                let mut series = MetricSeries::new();
                for &n in &grid {
                    let ec = EstimatorConfig::new(kind, n)
                        .with_sign(sign)
                        .with_split(cfg.estimator.split)
                        .with_antithetic(cfg.estimator.antithetic);
                    ec.validate(&net).map_err(config_err)?;
                    let g = estimate(&net, &batch, &objective, &ec, &stream.batch(n as u64), &exec)?;
                    series.push(n, cosine(&g.theta_flat(), &oracle)?)?;
                }
                let fit = linear_fit(&series).ok();
                series_rows(&mut series_csv, &label, seed, &series, fit.as_ref());
                let row = SummaryRow {
                    method: label.clone(),
                    seed: seed.to_string(),
                    acc: acc_metric(&series, gc.n1, gc.n2)?,
                    sta: sta_metric(&series).ok(),
                    slope: fit.map(|f| f.slope),
                };
                rows.push(row);
                runs.push(SeriesRun { method: label.clone(), seed, series });
            }
            let col = |f: fn(&SummaryRow) -> Option<f64>| {
                let v: Option<Vec<f64>> = rows.iter().map(f).collect();
                v.map(|v| median(&v))
            };
            let med = SummaryRow {
                method: label.clone(),
                seed: "median".into(),
                acc: col(|r| Some(r.acc)).unwrap_or(f64::NAN),
                sta: col(|r| r.sta),
                slope: col(|r| r.slope),
            };
            summary.extend(rows);
            summary.push(med);
        }
    }
    let files = vec![out_dir.join(SERIES_CSV_FILE), out_dir.join(SUMMARY_CSV_FILE)];
    write_file(&files[0], series_csv.as_bytes())?;
    write_file(&files[1], summary_csv(&summary).as_bytes())?;
    Ok(GradcheckOutcome { runs, summary, files })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BealeMethod {
    Bp,
    Lr,
    Alr,
}

impl BealeMethod {
    pub const ALL: [BealeMethod; 3] = [BealeMethod::Bp, BealeMethod::Lr, BealeMethod::Alr];

    pub fn name(self) -> &'static str {
        match self {
            BealeMethod::Bp => "bp",
            BealeMethod::Lr => "lr",
            BealeMethod::Alr => "alr",
        }
    }
}

impl std::str::FromStr for BealeMethod {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "bp" => Ok(BealeMethod::Bp),
            "lr" => Ok(BealeMethod::Lr),
            "alr" => Ok(BealeMethod::Alr),
            other => Err(format!("unknown method `{other}` (expected bp, lr or alr)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BealeOptions {
    pub method: BealeMethod,
    pub steps: usize,
    pub lr: f64,
    pub copies: usize,
    /// Noise scale on both outputs, held fixed during descent.
    pub sigma: f64,
    pub seed: u64,
    pub clamp: Option<f64>,
}

impl Default for BealeOptions {
    fn default() -> Self {
        Self { method: BealeMethod::Alr, steps: 2000, lr: 1e-3, copies: 100, sigma: 0.1, seed: 0, clamp: None }
    }
}

pub const BEALE_START: [f64; 2] = [-3.0, 2.0];

pub fn beale_csv_name(method: BealeMethod) -> String {
    format!("beale_{}.csv", method.name())
}

/// `(x, y)` as the two biases of a one-layer identity network with no
/// inputs, so the output is the point itself plus pre-activation noise.
pub fn beale_network(sigma: f64) -> Result<NetworkSpec> {
    let mut net = NetworkSpec::init(&[0, 2], &[Activation::Identity], sigma, 0.1, 0).map_err(config_err)?;
    let mut p = net.flat_params();
    p[..2].copy_from_slice(&BEALE_START);
    net.set_flat_params(&p).map_err(config_err)?;
    Ok(net)
}

#[derive(Debug, Clone)]
pub struct BealeOutcome {
    pub trajectory: Trajectory,
    pub file: PathBuf,
}

/// Descends Beale's function from (−3, 2) and writes `step,x,y,loss`, one
/// row per iterate including the start. A divergent run keeps its partial
/// trajectory on disk and reports the failure.
pub fn cmd_beale(opts: &BealeOptions, out_dir: &Path, threads: usize) -> Result<BealeOutcome> {
    if opts.method != BealeMethod::Bp && opts.copies == 0 {
        return Err(CliError::Config("copies must be positive".into()));
    }
    let mut net = beale_network(opts.sigma)?;
    let mut objective = Objective::beale();
    if let Some(m) = opts.clamp {
        objective = objective.with_clamp(m);
    }
    let method = match opts.method {
        BealeMethod::Bp => GradientMethod::Backprop,
        BealeMethod::Lr => GradientMethod::Estimator(EstimatorConfig::new(EstimatorKind::Lr, opts.copies)),
        BealeMethod::Alr => GradientMethod::Estimator(
            EstimatorConfig::new(EstimatorKind::Lr, opts.copies).with_sign(SignMode::PerSample),
        ),
    };
    let dc = DescentConfig {
        method,
        schedule: StepSchedule::Constant { gamma: opts.lr },
        bounds: ProjectionBox::default(),
        steps: opts.steps,
        seed: opts.seed,
        freeze_sigma: true,
        divergence_threshold: DIVERGENCE_THRESHOLD,
    };
    let exec = ThreadPoolExecutor::new(threads)?;
    let batch = [Sample::new(Vec::new(), Vec::new())];
    let trajectory = descend(&mut net, &batch, &objective, &dc, &exec).map_err(|e| match e {
        signlr_core::Error::InvalidArgument(_) => config_err(e),
        e => e.into(),
    })?;
    let mut csv = String::from("step,x,y,loss\n");
    for (k, (p, loss)) in trajectory.points.iter().zip(&trajectory.losses).enumerate() {
        let _ = writeln!(csv, "{k},{},{},{loss}", p[0], p[1]);
    }
    let file = out_dir.join(beale_csv_name(opts.method));
    write_file(&file, csv.as_bytes())?;
    if let Some(step) = trajectory.diverged_at {
        return Err(CliError::Diverged { step, loss: trajectory.losses[step] });
    }
    Ok(BealeOutcome { trajectory, file })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOptions {
    pub layers: usize,
    pub buckets: usize,
    /// Defaults to one unit per layer.
    pub units: Option<usize>,
    pub mode: UnitMode,
    pub gantt: Option<PathBuf>,
}

/// Schedules both graphs, checks the schedules against the graph and unit
/// constraints, and optionally writes the Gantt table.
pub fn cmd_pipeline(opts: &PipelineOptions) -> Result<PipelineReport> {
    let units = opts.units.unwrap_or(opts.layers);
    if opts.layers == 0 || opts.buckets == 0 || units == 0 {
        return Err(CliError::Config("layers, buckets and units must be positive".into()));
    }
    let bp_graph = build_bp_graph(opts.layers, opts.buckets)?;
    let lr_graph = build_lr_graph(opts.layers, opts.buckets)?;
    let bp = schedule(&bp_graph, units, opts.mode)?;
    let lr = schedule(&lr_graph, units, opts.mode)?;
    validate(&bp_graph, &bp, opts.mode)?;
    validate(&lr_graph, &lr, opts.mode)?;
    if let Some(path) = &opts.gantt {
        let mut csv = format!("{GANTT_HEADER}\n");
        gantt_rows(&mut csv, "bp", &bp_graph, &bp);
        gantt_rows(&mut csv, "lr", &lr_graph, &lr);
        write_file(path, csv.as_bytes())?;
    }
    let speedup = bp.makespan as f64 / lr.makespan as f64;
    let c = Comparison { mode: opts.mode, layers: opts.layers, buckets: opts.buckets, units, bp, lr, speedup };
    Ok(PipelineReport::from_comparison(&c))
}
