use std::fs;
use std::path::Path;
use std::process::Command;

use signlr::commands::{
    cmd_beale, cmd_gradcheck, cmd_pipeline, cmd_train, BealeMethod, BealeOptions, PipelineOptions, CHECKPOINT_FILE,
    EPOCH_CSV_FILE, SERIES_CSV_FILE, SUMMARY_CSV_FILE, TRAIN_LOG_FILE,
};
use signlr::config::{RunConfig, OUTPUT_DIR_ENV};
use signlr::formats::checkpoint::Checkpoint;
use signlr::formats::trainlog::parse_steps_jsonl;
use signlr::CliError;
use signlr_core::pipeline::UnitMode;
use signlr_core::SignMode;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_signlr"))
}

fn small_config() -> RunConfig {
    let mut c = RunConfig::default();
    c.dataset.points = 60;
    c.epochs = 2;
    c.copies = 40;
    c.batch_size = 16;
    c
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn zero_epochs_checkpoint_equals_initialisation() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config();
    c.epochs = 0;
    let out = cmd_train(&c, dir.path(), 1).unwrap();
    let ck = Checkpoint::load(&dir.path().join(CHECKPOINT_FILE)).unwrap().to_network().unwrap();
    assert_eq!(ck, c.network(2).unwrap());
    assert_eq!(ck, out.network);
    assert_eq!(fs::read_to_string(dir.path().join(TRAIN_LOG_FILE)).unwrap(), "");
}

#[test]
fn alr_training_writes_logs_with_a_final_accuracy_line() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config();
    c.estimator.sign = SignMode::PerSample;
    c.schedule.lr = 0.5;
    let out = cmd_train(&c, dir.path(), 0).unwrap();
    let steps = parse_steps_jsonl(&fs::read_to_string(dir.path().join(TRAIN_LOG_FILE)).unwrap()).unwrap();
    assert_eq!(steps, out.log.steps);
    let (header, rows) = csv_rows(&dir.path().join(EPOCH_CSV_FILE));
    assert_eq!(header, ["epoch", "mean_loss", "train_accuracy", "test_accuracy"]);
    assert_eq!(rows.len(), 2);
    let last: f64 = rows[1][3].parse().unwrap();
    assert_eq!(Some(last), out.test_accuracy);
}

#[test]
fn gradcheck_single_point_grid() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config();
    c.gradcheck.n1 = 100;
    c.gradcheck.n2 = 100;
    c.gradcheck.repeats = 1;
    let out = cmd_gradcheck(&c, dir.path(), 0).unwrap();
    let (header, rows) = csv_rows(&dir.path().join(SERIES_CSV_FILE));
    assert_eq!(header, ["method", "seed", "n", "cos", "fitted", "residual"]);
    let methods: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(methods, ["lr", "lr_sign", "es", "es_sign", "hybrid", "hybrid_sign"]);
    let (_, summary) = csv_rows(&dir.path().join(SUMMARY_CSV_FILE));
    assert_eq!(summary[0][..3], ["bp".to_string(), "self".into(), "1".into()]);
    assert_eq!(out.runs.len(), 6);
}

#[test]
fn gradcheck_summary_has_median_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config();
    c.gradcheck.n1 = 100;
    c.gradcheck.n2 = 500;
    c.gradcheck.repeats = 3;
    c.gradcheck.kinds = vec![signlr_core::EstimatorKind::Lr];
    let out = cmd_gradcheck(&c, dir.path(), 0).unwrap();
    for m in ["lr", "lr_sign"] {
        let r = out.median_row(m).unwrap();
        assert!(r.sta.is_some() && r.slope.is_some());
    }
    let (_, rows) = csv_rows(&dir.path().join(SERIES_CSV_FILE));
    assert_eq!(rows.len(), 2 * 3 * 5);
}

#[test]
fn beale_trajectories_share_length_and_start() {
    let dir = tempfile::tempdir().unwrap();
    for method in BealeMethod::ALL {
        let out = cmd_beale(&BealeOptions { method, steps: 25, ..Default::default() }, dir.path(), 0).unwrap();
        let text = fs::read_to_string(&out.file).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 27);
        assert_eq!(lines[1], "0,-3,2,385.453125");
    }
}

#[test]
fn beale_divergence_keeps_partial_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let opts = BealeOptions { method: BealeMethod::Bp, steps: 50, lr: 1.0, ..Default::default() };
    let err = cmd_beale(&opts, dir.path(), 0).unwrap_err();
    assert!(matches!(err, CliError::Diverged { .. }));
    let text = fs::read_to_string(dir.path().join("beale_bp.csv")).unwrap();
    assert!(text.lines().count() >= 2);
}

#[test]
fn pipeline_report_and_gantt() {
    let dir = tempfile::tempdir().unwrap();
    let one = cmd_pipeline(&PipelineOptions { layers: 1, buckets: 1, units: None, mode: UnitMode::default(), gantt: None })
        .unwrap();
    assert_eq!(one.speedup, 1.0);
    let gantt = dir.path().join("g.csv");
    let r = cmd_pipeline(&PipelineOptions {
        layers: 4,
        buckets: 3,
        units: None,
        mode: UnitMode::StageConstrained,
        gantt: Some(gantt.clone()),
    })
    .unwrap();
    assert_eq!(r.reference.speedup_ref, 1.5);
    let (header, rows) = csv_rows(&gantt);
    assert_eq!(header, ["schedule", "unit", "slot", "task", "layer", "bucket"]);
    let busy = |s: &str| rows.iter().filter(|r| r[0] == s).count();
    assert_eq!(busy("bp"), 27);
    assert_eq!(busy("lr"), 27);
    assert!(cmd_pipeline(&PipelineOptions { layers: 0, buckets: 1, units: None, mode: UnitMode::Flexible, gantt: None })
        .is_err());
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "seed = 1\n[network]\nwidth = 3\n").unwrap();
    let out = bin().args(["train", "-c"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let out = bin().args(["pipeline", "--mode", "sideways"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = bin().args(["beale", "--method", "bp", "--lr", "1", "--steps", "20", "-o"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(3));

    let out = bin().args(["pipeline", "-L", "1", "-B", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["speedup"], 1.0);
}

#[test]
fn flags_override_file_and_env_sets_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "epochs = 5\ncopies = 20\n[dataset]\npoints = 30\n").unwrap();
    let out_dir = dir.path().join("from-env");
    let out = bin()
        .args(["--threads", "2", "train", "-c"])
        .arg(&cfg)
        .args(["--epochs", "1"])
        .env(OUTPUT_DIR_ENV, &out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = csv_rows(&out_dir.join(EPOCH_CSV_FILE));
    assert_eq!(rows.len(), 1);
}
