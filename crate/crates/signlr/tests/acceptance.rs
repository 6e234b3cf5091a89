//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use signlr::commands::{
    cmd_beale, cmd_gradcheck, cmd_pipeline, cmd_train, method_label, BealeMethod, BealeOptions, PipelineOptions,
    CHECKPOINT_FILE, EPOCH_CSV_FILE, SERIES_CSV_FILE, SUMMARY_CSV_FILE, TRAIN_LOG_FILE,
};
use signlr::config::{DatasetKind, Method, RunConfig};
use signlr::formats::metrics::median;
use signlr::ThreadPoolExecutor;
use signlr_core::data::{blobs, BlobsSpec, Sample};
use signlr_core::estimators::{finite_difference_gradient, max_relative_error};
use signlr_core::loss::one_hot;
use signlr_core::metrics::cosine;
use signlr_core::optimizer::{descend, DescentConfig, GradientMethod, ProjectionBox, StepSchedule};
use signlr_core::pipeline::{compare, UnitMode};
use signlr_core::{
    bp_gradient, estimate, Activation, EstimatorConfig, EstimatorKind, NetworkSpec, Objective, RngStream, SignMode,
};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn exec() -> ThreadPoolExecutor {
    ThreadPoolExecutor::new(0).expect("thread pool")
}

/// Small MLP with an identity output layer and a batch of blob samples.
fn mlp_setup(sizes: &[usize], seed: u64, batch: usize) -> (NetworkSpec, Vec<Sample>) {
    let acts: Vec<Activation> =
        (0..sizes.len() - 1).map(|i| if i + 2 == sizes.len() { Activation::Identity } else { Activation::Relu }).collect();
    let net = NetworkSpec::init(sizes, &acts, 0.1, 0.1, seed).unwrap();
    let spec = BlobsSpec { classes: *sizes.last().unwrap(), points: batch, dims: sizes[0], separation: 2.0, spread: 1.0 };
    (net, blobs(&spec, seed + 100).unwrap().samples)
}

// 1. Backprop against central differences on random tanh networks.
const FD_FLOOR: f64 = 1e-3;

fn c1_oracle() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut largest = 0;
    for i in 0..20u64 {
        let sizes = [2 + (i % 4) as usize, 3 + (i * 3 % 6) as usize, 3 + (i * 5 % 6) as usize, 2 + (i % 3) as usize];
        let acts = [Activation::Tanh, Activation::Tanh, Activation::Identity];
        let mut net = NetworkSpec::init(&sizes, &acts, 0.1, 0.1, 500 + i).unwrap();
        let tc = net.theta_count();
        largest = largest.max(net.param_count());
        let stream = RngStream::new(900 + i);
        let mut omega = net.flat_params();
        let noise = stream.batch(1).gaussian_vec(tc);
        for (w, z) in omega[..tc].iter_mut().zip(&noise) {
            *w = 0.6 * z;
        }
        net.set_flat_params(&omega).unwrap();
        let classes = sizes[3];
        let batch: Vec<Sample> = (0..4)
            .map(|s| {
                let x = stream.batch(2).sample(s).gaussian_vec(sizes[0]);
                Sample::new(x, one_hot((s as usize + i as usize) % classes, classes))
            })
            .collect();
        let obj = Objective::cross_entropy(classes);
        let bp = bp_gradient(&net, &batch, &obj).unwrap().theta_flat();
        let sigma = omega[tc..].to_vec();
        let mut probe = net.clone();
        let fd = finite_difference_gradient(
            |theta: &[f64]| {
                let mut w = theta.to_vec();
                w.extend_from_slice(&sigma);
                probe.set_flat_params(&w).unwrap();
                signlr_core::estimators::mean_clean_loss(&probe, &batch, &obj).unwrap()
            },
            &omega[..tc],
            1e-4,
        )
        .unwrap();
        worst = worst.max(max_relative_error(&bp, &fd, FD_FLOOR));
    }
    verdict(
        worst <= 1e-5 && largest <= 200,
        format!("worst max-rel-error {worst:.2e} over 20 nets (floor {FD_FLOOR}, bound 1e-5, largest net {largest} params)"),
    )
}

// 2. LR unbiasedness: one neuron with linear loss, then a small MLP.
fn c2_lr_unbiased() -> Verdict {
    let ex = exec();
    let mut net = NetworkSpec::init(&[1, 1], &[Activation::Identity], 0.2, 0.1, 0).unwrap();
    net.set_flat_params(&[0.3, -0.5, 0.2]).unwrap();
    let x = 0.7;
    let batch = [Sample::new(vec![x], vec![])];
    let obj = Objective::linear(vec![1.0]);
    let analytic = [1.0, x, 0.0];
    let groups = 1000;
    let per_group = 100;
    let cfg = EstimatorConfig::new(EstimatorKind::Lr, per_group);
    let means: Vec<Vec<f64>> = (0..groups)
        .map(|g| estimate(&net, &batch, &obj, &cfg, &RngStream::new(17).batch(g), &ex).unwrap().flatten())
        .collect();
    let mut worst_z: f64 = 0.0;
    for (d, truth) in analytic.iter().enumerate() {
        let m = means.iter().map(|v| v[d]).sum::<f64>() / groups as f64;
        let var = means.iter().map(|v| (v[d] - m) * (v[d] - m)).sum::<f64>() / (groups - 1) as f64;
        let se = (var / groups as f64).sqrt();
        worst_z = worst_z.max((m - truth).abs() / se);
    }
    let (mlp, mb) = mlp_setup(&[4, 8, 3], 0, 4);
    let ce = Objective::cross_entropy(3);
    let bp = bp_gradient(&mlp, &mb, &ce).unwrap();
    let g = estimate(&mlp, &mb, &ce, &EstimatorConfig::new(EstimatorKind::Lr, 1_000_000), &RngStream::new(0), &ex).unwrap();
    let cos = cosine(&g.theta_flat(), &bp.theta_flat()).unwrap();
    verdict(
        worst_z <= 3.0 && cos >= 0.99,
        format!("1-neuron worst |z| {worst_z:.2} at 1e5 copies (bound 3); MLP cosine {cos:.4} at 4e6 copy-samples (bound 0.99)"),
    )
}

// 3. ES and Hybrid unbiasedness plus degenerate-split identities.
fn c3_es_hybrid() -> Verdict {
    let ex = exec();
    let (net, batch) = mlp_setup(&[4, 8, 3], 0, 4);
    let ce = Objective::cross_entropy(3);
    let bp = bp_gradient(&net, &batch, &ce).unwrap().theta_flat();
    let stream = RngStream::new(0);
    let es = estimate(&net, &batch, &ce, &EstimatorConfig::new(EstimatorKind::Es, 1_000_000), &stream, &ex).unwrap();
    let hy = estimate(&net, &batch, &ce, &EstimatorConfig::new(EstimatorKind::Hybrid, 1_000_000).with_split(1), &stream, &ex)
        .unwrap();
    let ces = cosine(&es.theta_flat(), &bp).unwrap();
    let chy = cosine(&hy.theta_flat(), &bp).unwrap();

    let (deep, db) = mlp_setup(&[4, 6, 5, 3], 3, 3);
    let s = RngStream::new(5);
    let run = |kind, split| estimate(&deep, &db, &ce, &EstimatorConfig::new(kind, 300).with_split(split), &s, &ex).unwrap();
    let lr_same = run(EstimatorKind::Hybrid, 0) == run(EstimatorKind::Lr, 1);
    let es_same = run(EstimatorKind::Hybrid, 3) == run(EstimatorKind::Es, 1);
    verdict(
        ces >= 0.99 && chy >= 0.99 && lr_same && es_same,
        format!(
            "cosine ES {ces:.4}, Hybrid(split 1) {chy:.4} (bound 0.99); split 0 == LR: {lr_same}; split L == ES: {es_same}"
        ),
    )
}

/// The 4-8-8-3 network used for the sign and copy-count criteria; one
/// sample from 4-D blobs.
fn desk_config(seed: u64) -> RunConfig {
    let mut c = RunConfig::default();
    c.seed = seed;
    c.dataset.kind = DatasetKind::Blobs;
    c.dataset.classes = 3;
    c.dataset.dims = 4;
    c.dataset.points = 30;
    c.dataset.separation = 2.0;
    c.network.hidden = vec![8, 8];
    c.gradcheck.samples = 1;
    c.gradcheck.repeats = 10;
    c.gradcheck.n1 = 100;
    c.gradcheck.n2 = 2000;
    c.gradcheck.step = 100;
    c.gradcheck.kinds = vec![EstimatorKind::Lr];
    c
}

// 4. Sign-encoded direction stays aligned with the gradient.
fn c4_sign_alignment() -> Verdict {
    let ex = exec();
    let mut cos = Vec::new();
    for seed in 0..40u64 {
        let cfg = desk_config(seed);
        let data = cfg.dataset().unwrap();
        let batch = &data.samples[..1];
        let net = cfg.network(4).unwrap();
        let obj = cfg.objective();
        let bp = bp_gradient(&net, batch, &obj).unwrap().theta_flat();
        let ec = EstimatorConfig::new(EstimatorKind::Lr, 2000).with_sign(SignMode::PerSample);
        let g = estimate(&net, batch, &obj, &ec, &RngStream::new(seed), &ex).unwrap();
        cos.push(cosine(&g.theta_flat(), &bp).unwrap());
    }
    let positive = cos.iter().filter(|&&c| c > 0.0).count();
    let med = median(&cos);
    verdict(
        positive * 100 >= 95 * cos.len() && med >= 0.3,
        format!("positive in {positive}/40 seeds (need 38), median cosine {med:.3} (bound 0.3)"),
    )
}

fn desk_gradcheck() -> signlr::commands::GradcheckOutcome {
    let dir = tempfile::tempdir().unwrap();
    cmd_gradcheck(&desk_config(0), dir.path(), 0).unwrap()
}

// 5. Cosine grows with the number of copies.
fn c5_copy_trend(gc: &signlr::commands::GradcheckOutcome) -> Verdict {
    let lr = gc.median_row(&method_label(EstimatorKind::Lr, SignMode::Off)).unwrap().slope.unwrap();
    let alr = gc.median_row(&method_label(EstimatorKind::Lr, SignMode::PerSample)).unwrap().slope.unwrap();
    verdict(lr > 0.0 && alr > 0.0, format!("seed-median slope LR {lr:.3e}, ALR {alr:.3e} per copy (need > 0)"))
}

// 6. Acc/Sta parity between sign-encoded and plain LR.
fn c6_acc_sta(gc: &signlr::commands::GradcheckOutcome) -> Verdict {
    let lr = gc.median_row(&method_label(EstimatorKind::Lr, SignMode::Off)).unwrap();
    let alr = gc.median_row(&method_label(EstimatorKind::Lr, SignMode::PerSample)).unwrap();
    let (sl, sa) = (lr.sta.unwrap(), alr.sta.unwrap());
    let gap = (alr.acc - lr.acc).abs();
    verdict(
        gap <= 0.1 && sa <= sl + 0.02,
        format!(
            "Acc LR {:.4} ALR {:.4} (|gap| {gap:.4}, bound 0.1); Sta LR {sl:.4} ALR {sa:.4} (bound LR + 0.02)",
            lr.acc, alr.acc
        ),
    )
}

// 7. Projected SGD with Robbins–Monro steps on a strongly convex quadratic.
fn c7_convergence() -> Verdict {
    let ex = exec();
    let center = vec![1.5, -0.5, 0.25];
    let obj = Objective::quadratic(center.clone(), vec![1.0, 2.0, 0.5]);
    let batch = [Sample::new(vec![], vec![])];
    let distance = |p: &Vec<f64>| p[..3].iter().zip(&center).map(|(x, c)| (x - c) * (x - c)).sum::<f64>().sqrt();
    let run = |sign, steps, seed| {
        let mut net = NetworkSpec::init(&[0, 3], &[Activation::Identity], 0.1, 0.1, 0).unwrap();
        let dc = DescentConfig {
            method: GradientMethod::Estimator(EstimatorConfig::new(EstimatorKind::Lr, 10).with_sign(sign)),
            schedule: StepSchedule::RobbinsMonro { a: 1.0, k0: 10.0 },
            bounds: ProjectionBox::default(),
            steps,
            seed,
            freeze_sigma: true,
            divergence_threshold: 1e6,
        };
        descend(&mut net, &batch, &obj, &dc, &ex).unwrap().points.iter().map(distance).collect::<Vec<f64>>()
    };
    let budget = 100_000;
    let hits: Vec<f64> = (0..10)
        .map(|seed| run(SignMode::Off, budget, seed).iter().position(|&d| d < 1e-2).map_or(f64::INFINITY, |k| k as f64))
        .collect();
    let med_hit = median(&hits);
    let mut increases = 0;
    let mut final_ratio: Vec<f64> = Vec::new();
    for seed in 0..10 {
        let d = run(SignMode::PerSample, 5000, seed);
        let windows: Vec<f64> = d.chunks(100).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
        increases += windows.windows(2).filter(|w| w[1] > w[0]).count();
        final_ratio.push(windows[windows.len() - 1] / windows[0]);
    }
    verdict(
        med_hit < budget as f64 && increases == 0,
        format!(
            "LR median first step with distance < 1e-2: {med_hit} (budget {budget}); sign variant: {increases} increases \
             across 10 seeds x 50 windows of 100 steps, median last/first window {:.3}",
            median(&final_ratio)
        ),
    )
}

// 8. Desk-scale classification with LR and ALR.
fn blobs_training(hidden: Vec<usize>, sign: SignMode, lr: f64) -> f64 {
    let mut c = RunConfig::default();
    c.dataset.classes = 3;
    c.dataset.points = 150;
    c.dataset.dims = 2;
    c.dataset.separation = 3.0;
    c.dataset.spread = 1.0;
    c.dataset.test_fraction = 0.3;
    c.network.hidden = hidden;
    c.network.freeze_sigma = true;
    c.estimator.method = Method::Lr;
    c.estimator.sign = sign;
    c.copies = 500;
    c.epochs = 200;
    c.schedule.lr = lr;
    let dir = tempfile::tempdir().unwrap();
    cmd_train(&c, dir.path(), 0).unwrap().test_accuracy.unwrap()
}

const ALR_LR: f64 = 1.0;
const LR_LR: f64 = 0.1;

fn c8_training() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, hidden) in [("softmax", vec![]), ("2-16-3", vec![16])] {
        let alr = blobs_training(hidden.clone(), SignMode::PerSample, ALR_LR);
        let lr = blobs_training(hidden, SignMode::Off, LR_LR);
        ok &= alr >= 0.9 && (alr - lr).abs() <= 0.03 + 1e-12;
        parts.push(format!("{name}: ALR {:.1}% LR {:.1}%", 100.0 * alr, 100.0 * lr));
    }
    verdict(ok, format!("test accuracy after 200 epochs, C=500: {} (need ALR >= 90%, |ALR - LR| <= 3 points)", parts.join("; ")))
}

// 9. Beale trajectories.
fn c9_beale() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut lens = Vec::new();
    let mut first_rows = Vec::new();
    let mut bp_monotone = false;
    let mut alr_ratio = f64::NAN;
    for method in BealeMethod::ALL {
        let out = cmd_beale(&BealeOptions { method, ..Default::default() }, dir.path(), 0).unwrap();
        let mut rdr = csv::Reader::from_path(&out.file).unwrap();
        assert_eq!(rdr.headers().unwrap(), vec!["step", "x", "y", "loss"]);
        let rows: Vec<Vec<f64>> = rdr
            .records()
            .map(|r| r.unwrap().iter().map(|f| f.parse::<f64>().unwrap()).collect())
            .collect();
        first_rows.push(rows[0].clone());
        lens.push(rows.len());
        let loss: Vec<f64> = rows.iter().map(|r| r[3]).collect();
        match method {
            BealeMethod::Bp => bp_monotone = loss.windows(2).take(100).all(|w| w[1] <= w[0]),
            BealeMethod::Alr => alr_ratio = loss[loss.len() - 1] / loss[0],
            BealeMethod::Lr => {}
        }
    }
    let start_ok = first_rows.iter().all(|r| r[..] == [0.0, -3.0, 2.0, 385.453125]);
    let equal = lens.windows(2).all(|w| w[0] == w[1]);
    verdict(
        start_ok && bp_monotone && alr_ratio <= 0.01 && equal,
        format!(
            "step-0 rows (0, -3, 2, 385.453125): {start_ok}; BP monotone over 100 steps: {bp_monotone}; \
             ALR final/initial {alr_ratio:.2e} (bound 1e-2); rows per CSV {lens:?}"
        ),
    )
}

// 10. Pipeline schedules.
fn c10_pipeline() -> Verdict {
    let mut violations = 0;
    let mut cases = 0;
    for mode in [UnitMode::StageConstrained, UnitMode::Flexible] {
        for l in 1..=8 {
            for b in 1..=8 {
                for u in 1..=8 {
                    let c = compare(l, b, u, mode).unwrap();
                    cases += 1;
                    if c.lr.makespan > c.bp.makespan || c.lr.idle_fraction > c.bp.idle_fraction + 1e-12 {
                        violations += 1;
                    }
                }
            }
        }
    }
    let r = cmd_pipeline(&PipelineOptions { layers: 4, buckets: 3, units: None, mode: UnitMode::default(), gantt: None })
        .unwrap();
    let band = (1.3..=1.7).contains(&r.speedup);
    verdict(
        violations == 0 && band,
        format!(
            "{violations} violations in {cases} cases; L=4 B=3 {} mode: speedup {:.3} (ref {}), idle BP {:.3} (ref {}), \
             LR {:.3} (ref {})",
            r.mode, r.speedup, r.reference.speedup_ref, r.bp.idle, r.reference.bp_idle_ref, r.lr.idle, r.reference.lr_idle_ref
        ),
    )
}

// 11. Byte-identical outputs across runs and thread counts.
fn read_all(dir: &Path, names: &[&str]) -> Vec<Vec<u8>> {
    names.iter().map(|n| std::fs::read(dir.join(n)).unwrap()).collect()
}

fn c11_determinism() -> Verdict {
    let mut train_cfg = RunConfig::default();
    train_cfg.epochs = 3;
    train_cfg.copies = 300;
    train_cfg.dataset.points = 90;
    train_cfg.estimator.sign = SignMode::PerSample;
    train_cfg.schedule.lr = 0.5;
    let mut gc_cfg = desk_config(4);
    gc_cfg.gradcheck.n1 = 1000;
    gc_cfg.gradcheck.n2 = 5000;
    gc_cfg.gradcheck.step = 2000;
    gc_cfg.gradcheck.repeats = 2;
    gc_cfg.gradcheck.kinds = vec![EstimatorKind::Lr, EstimatorKind::Hybrid];
    let train_files = [TRAIN_LOG_FILE, EPOCH_CSV_FILE, CHECKPOINT_FILE];
    let gc_files = [SERIES_CSV_FILE, SUMMARY_CSV_FILE];
    let mut outputs = Vec::new();
    for threads in [1, 1, 2, 4] {
        let dir = tempfile::tempdir().unwrap();
        cmd_train(&train_cfg, &dir.path().join("t"), threads).unwrap();
        cmd_gradcheck(&gc_cfg, &dir.path().join("g"), threads).unwrap();
        let mut files = read_all(&dir.path().join("t"), &train_files);
        files.extend(read_all(&dir.path().join("g"), &gc_files));
        outputs.push(files);
    }
    let same = outputs.iter().all(|o| *o == outputs[0]);
    verdict(same, format!("train and gradcheck outputs identical across 2 runs at 1 thread and at 2 and 4 threads: {same}"))
}

fn main() {
    let gc = std::cell::OnceCell::new();
    let desk = || gc.get_or_init(desk_gradcheck);
    let criteria: Vec<(u32, &str, Box<dyn Fn() -> Verdict + '_>)> = vec![
        (1, "oracle agreement", Box::new(c1_oracle)),
        (2, "LR unbiasedness", Box::new(c2_lr_unbiased)),
        (3, "ES and Hybrid unbiasedness", Box::new(c3_es_hybrid)),
        (4, "sign-direction alignment", Box::new(c4_sign_alignment)),
        (5, "copy-count trend", Box::new(|| c5_copy_trend(desk()))),
        (6, "Acc/Sta parity", Box::new(|| c6_acc_sta(desk()))),
        (7, "convergence smoke test", Box::new(c7_convergence)),
        (8, "desk-scale training", Box::new(c8_training)),
        (9, "Beale experiment", Box::new(c9_beale)),
        (10, "pipeline simulator", Box::new(c10_pipeline)),
        (11, "determinism", Box::new(c11_determinism)),
    ];
    let only: Option<u32> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = Vec::new();
    for (id, name, check) in &criteria {
        if only.is_some_and(|o| o != *id) {
            continue;
        }
        let t = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(|| check()))
            .unwrap_or_else(|_| verdict(false, "panicked".into()));
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} [{tag}] {name}: {} ({:.1}s)", v.detail, t.elapsed().as_secs_f64());
        if !v.pass {
            failed.push(*id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
