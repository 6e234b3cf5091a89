use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode as ProcessExit;

use clap::{Args, Parser, Subcommand};
use signlr::commands::{BealeMethod, BealeOptions, PipelineOptions};
use signlr::config::{resolve_output_dir, Method, RunConfig};
use signlr::{cmd_beale, cmd_gradcheck, cmd_pipeline, cmd_train, CliError};
use signlr_core::pipeline::UnitMode;
use signlr_core::SignMode;

#[derive(Parser)]
#[command(name = "signlr", version, about = "Likelihood-ratio gradient estimation experiments")]
struct Cli {
    /// Worker threads for copy parallelism; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a network on the configured dataset.
    Train(RunArgs),
    /// Cosine of estimator directions against backprop over a copy grid.
    Gradcheck(GradcheckArgs),
    /// Descend Beale's function from (-3, 2).
    Beale(BealeArgs),
    /// Compare simulated pipeline schedules of backprop and LR training.
    Pipeline(PipelineArgs),
}

/// Flags shared by the config-driven commands. Each one overrides the
/// corresponding config value.
#[derive(Args)]
struct RunArgs {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory [default: config, then $SIGNLR_OUTPUT_DIR, then ./signlr-out]
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    copies: Option<usize>,
    /// Constant step size.
    #[arg(long)]
    lr: Option<f64>,
    /// bp, lr, es or hybrid.
    #[arg(long)]
    method: Option<Method>,
    /// off, per_sample or of_update.
    #[arg(long)]
    sign: Option<SignMode>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long)]
    n2: Option<usize>,
    #[arg(long)]
    step: Option<usize>,
    /// Noise seeds per estimator variant.
    #[arg(long)]
    repeats: Option<usize>,
}

#[derive(Args)]
struct BealeArgs {
    /// bp, lr, alr or all.
    #[arg(long, default_value = "all")]
    method: String,
    #[arg(long, default_value_t = BealeOptions::default().steps)]
    steps: usize,
    #[arg(long, default_value_t = BealeOptions::default().lr)]
    lr: f64,
    #[arg(long, default_value_t = BealeOptions::default().copies)]
    copies: usize,
    #[arg(long, default_value_t = BealeOptions::default().sigma)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Clamp the loss magnitude at this value.
    #[arg(long)]
    clamp: Option<f64>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long = "layers", short = 'L', default_value_t = 4)]
    layers: usize,
    #[arg(long = "buckets", short = 'B', default_value_t = 3)]
    buckets: usize,
    /// Processing units; defaults to the layer count.
    #[arg(long)]
    units: Option<usize>,
    /// stage or flexible.
    #[arg(long, default_value = "stage")]
    mode: UnitMode,
    /// Write a Gantt CSV here.
    #[arg(long)]
    gantt: Option<PathBuf>,
}

/// Prints a line, ignoring a closed stdout so piping into `head` is quiet.
macro_rules! say {
    ($($t:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($t)*);
    }};
}

fn load(run: &RunArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &run.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = run.seed {
        cfg.seed = v;
    }
    if let Some(v) = run.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = run.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = run.copies {
        cfg.copies = v;
    }
    if let Some(v) = run.lr {
        cfg.schedule.lr = v;
    }
    if let Some(v) = run.method {
        cfg.estimator.method = v;
    }
    if let Some(v) = run.sign {
        cfg.estimator.sign = v;
    }
    Ok(cfg)
}

fn out_dir(run: &RunArgs, cfg: &RunConfig) -> PathBuf {
    resolve_output_dir(run.out.as_deref(), cfg.output_dir.as_deref())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let threads = cli.threads;
    match cli.command {
        Command::Train(args) => {
            let cfg = load(&args)?;
            let out = cmd_train(&cfg, &out_dir(&args, &cfg), threads)?;
            let last = out.log.epochs.last();
            say!(
                "epochs {} steps {} final loss {} test accuracy {}",
                out.log.epochs.len(),
                out.log.steps.len(),
                last.map_or(f64::NAN, |e| e.mean_loss),
                out.test_accuracy.map_or("n/a".into(), |a| a.to_string()),
            );
            for f in &out.files {
                say!("wrote {}", f.display());
            }
        }
        Command::Gradcheck(args) => {
            let mut cfg = load(&args.run)?;
            let g = &mut cfg.gradcheck;
            if let Some(v) = args.n1 {
                g.n1 = v;
            }
            if let Some(v) = args.n2 {
                g.n2 = v;
            }
            if let Some(v) = args.step {
                g.step = v;
            }
            if let Some(v) = args.repeats {
                g.repeats = v;
            }
            let out = cmd_gradcheck(&cfg, &out_dir(&args.run, &cfg), threads)?;
            for r in out.summary.iter().filter(|r| r.seed == "median" || r.seed == "self") {
                say!(
                    "{:<14} acc {:.4} sta {} slope {}",
                    r.method,
                    r.acc,
                    r.sta.map_or("n/a".into(), |v| format!("{v:.4}")),
                    r.slope.map_or("n/a".into(), |v| format!("{v:.3e}")),
                );
            }
            for f in &out.files {
                say!("wrote {}", f.display());
            }
        }
        Command::Beale(args) => {
            let methods: Vec<BealeMethod> = if args.method.eq_ignore_ascii_case("all") {
                BealeMethod::ALL.to_vec()
            } else {
                vec![args.method.parse().map_err(CliError::Config)?]
            };
            let dir = resolve_output_dir(args.out.as_deref(), None);
            for method in methods {
                let opts = BealeOptions {
                    method,
                    steps: args.steps,
                    lr: args.lr,
                    copies: args.copies,
                    sigma: args.sigma,
                    seed: args.seed,
                    clamp: args.clamp,
                };
                let out = cmd_beale(&opts, &dir, threads)?;
                let t = &out.trajectory;
                say!(
                    "{:<4} loss {} -> {} after {} steps, wrote {}",
                    method.name(),
                    t.losses[0],
                    t.losses[t.losses.len() - 1],
                    t.losses.len() - 1,
                    out.file.display()
                );
            }
        }
        Command::Pipeline(args) => {
            let report = cmd_pipeline(&PipelineOptions {
                layers: args.layers,
                buckets: args.buckets,
                units: args.units,
                mode: args.mode,
                gantt: args.gantt,
            })?;
            let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Invariant(e.to_string()))?;
            say!("{text}");
        }
    }
    Ok(())
}

fn main() -> ProcessExit {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ProcessExit::SUCCESS,
        Err(e) => {
            eprintln!("signlr: {e}");
            ProcessExit::from(e.exit_code() as u8)
        }
    }
}
