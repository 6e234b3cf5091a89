//! Run configuration read from TOML. Every table rejects unknown keys and
//! every field has a default, so an empty file is a valid configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use signlr_core::data::{blobs, two_moons, BlobsSpec, Dataset};
use signlr_core::optimizer::{GradientMethod, ProjectionBox, StepSchedule, TrainConfig, DIVERGENCE_THRESHOLD};
use signlr_core::{Activation, EstimatorConfig, EstimatorKind, NetworkSpec, Objective, SignMode};

use crate::error::{CliError, Result};
use crate::formats::dataset::load_csv;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "SIGNLR_OUTPUT_DIR";
pub const FALLBACK_OUTPUT_DIR: &str = "signlr-out";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub epochs: usize,
    pub batch_size: usize,
    /// Noise copies per sample.
    pub copies: usize,
    pub network: NetworkConfig,
    pub dataset: DatasetConfig,
    pub estimator: EstimatorSection,
    pub schedule: ScheduleConfig,
    pub bounds: BoundsConfig,
    pub gradcheck: GradcheckConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: None,
            epochs: 10,
            batch_size: 64,
            copies: 500,
            network: NetworkConfig::default(),
            dataset: DatasetConfig::default(),
            estimator: EstimatorSection::default(),
            schedule: ScheduleConfig::default(),
            bounds: BoundsConfig::default(),
            gradcheck: GradcheckConfig::default(),
        }
    }
}

/// Layer widths are `[dims, hidden.., classes]`, taken from the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub output_activation: Activation,
    pub sigma_init: f64,
    pub sigma_w: f64,
    pub freeze_sigma: bool,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            hidden: vec![16],
            activation: Activation::Relu,
            output_activation: Activation::Identity,
            sigma_init: signlr_core::network::DEFAULT_SIGMA,
            sigma_w: signlr_core::network::DEFAULT_SIGMA_W,
            freeze_sigma: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Blobs,
    Moons,
    File,
}

/// `moons` always has two classes and two dimensions; `file` reads the
/// labelled CSV at `path` with `classes` classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    pub classes: usize,
    pub points: usize,
    pub dims: usize,
    pub separation: f64,
    pub spread: f64,
    pub noise: f64,
    pub path: Option<PathBuf>,
    /// Share of samples held out for testing.
    pub test_fraction: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        let b = BlobsSpec::default();
        Self {
            kind: DatasetKind::Blobs,
            classes: b.classes,
            points: b.points,
            dims: b.dims,
            separation: b.separation,
            spread: b.spread,
            noise: 0.1,
            path: None,
            test_fraction: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Bp,
    Lr,
    Es,
    Hybrid,
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "bp" | "backprop" => Ok(Method::Bp),
            "lr" => Ok(Method::Lr),
            "es" => Ok(Method::Es),
            "hybrid" => Ok(Method::Hybrid),
            other => Err(format!("unknown method `{other}` (expected bp, lr, es or hybrid)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorSection {
    pub method: Method,
    pub sign: SignMode,
    /// Number of leading layers perturbed ES-style in hybrid mode.
    pub split: usize,
    pub antithetic: bool,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        Self {
            method: Method::Lr,
            sign: SignMode::Off,
            split: signlr_core::estimators::DEFAULT_HYBRID_SPLIT,
            antithetic: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Constant,
    RobbinsMonro,
}

/// `constant` uses `lr`; `robbins_monro` uses `a / (k + k0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub kind: ScheduleKind,
    pub lr: f64,
    pub a: f64,
    pub k0: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self { kind: ScheduleKind::Constant, lr: 1e-3, a: 1.0, k0: 10.0 }
    }
}

impl ScheduleConfig {
    pub fn to_schedule(&self) -> StepSchedule {
        match self.kind {
            ScheduleKind::Constant => StepSchedule::Constant { gamma: self.lr },
            ScheduleKind::RobbinsMonro => StepSchedule::RobbinsMonro { a: self.a, k0: self.k0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsConfig {
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        let b = ProjectionBox::default();
        Self { theta_lo: b.theta_lo, theta_hi: b.theta_hi, sigma_lo: b.sigma_lo, sigma_hi: b.sigma_hi }
    }
}

impl BoundsConfig {
    pub fn to_box(&self) -> ProjectionBox {
        ProjectionBox { theta_lo: self.theta_lo, theta_hi: self.theta_hi, sigma_lo: self.sigma_lo, sigma_hi: self.sigma_hi }
    }
}

/// Copy grid `n1, n1 + step, ..` up to `n2`, evaluated on the first
/// `samples` samples of the dataset and repeated over `repeats` noise seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradcheckConfig {
    pub n1: usize,
    pub n2: usize,
    pub step: usize,
    pub repeats: usize,
    pub samples: usize,
    pub kinds: Vec<EstimatorKind>,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            n1: 100,
            n2: 2000,
            step: 100,
            repeats: 10,
            samples: 1,
            kinds: vec![EstimatorKind::Lr, EstimatorKind::Es, EstimatorKind::Hybrid],
        }
    }
}

impl GradcheckConfig {
    pub fn grid(&self) -> Result<Vec<usize>> {
        if self.n1 == 0 || self.n2 < self.n1 || self.step == 0 {
            return Err(CliError::Config(format!(
                "copy grid {}..{} step {} is empty or contains zero",
                self.n1, self.n2, self.step
            )));
        }
        Ok((self.n1..=self.n2).step_by(self.step).collect())
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(msg()))
    }
}

impl RunConfig {
    /// Parses TOML text; errors carry the line and column of the problem.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::Invariant(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        check(self.batch_size > 0, || "batch_size must be positive".into())?;
        check(self.copies > 0, || "copies must be positive".into())?;
        let n = &self.network;
        check(n.hidden.iter().all(|&h| h > 0), || "hidden widths must be positive".into())?;
        check(n.sigma_init >= signlr_core::network::SIGMA_MIN && n.sigma_init.is_finite(), || {
            format!("network.sigma_init must be at least {}", signlr_core::network::SIGMA_MIN)
        })?;
        check(n.sigma_w > 0.0 && n.sigma_w.is_finite(), || "network.sigma_w must be positive".into())?;
        let d = &self.dataset;
        check((0.0..1.0).contains(&d.test_fraction), || "dataset.test_fraction must lie in [0, 1)".into())?;
        match d.kind {
            DatasetKind::Blobs => {
                check(d.classes >= 2 && d.points > 0 && d.dims > 0, || {
                    "blobs need classes >= 2, points > 0 and dims > 0".into()
                })?;
                check(d.spread >= 0.0 && d.separation.is_finite(), || "blobs spread must be non-negative".into())?;
            }
            DatasetKind::Moons => check(d.points > 0 && d.noise >= 0.0, || "moons need points > 0 and noise >= 0".into())?,
            DatasetKind::File => {
                check(d.path.is_some(), || "dataset.kind = \"file\" needs dataset.path".into())?;
                check(d.classes >= 2, || "dataset.classes must be at least 2".into())?;
            }
        }
        self.schedule.to_schedule().validate().map_err(|e| CliError::Config(format!("schedule: {e}")))?;
        self.bounds.to_box().validate().map_err(|e| CliError::Config(format!("bounds: {e}")))?;
        check(self.estimator.split <= self.depth(), || {
            format!("estimator.split {} exceeds the {} layers", self.estimator.split, self.depth())
        })?;
        self.gradcheck.grid()?;
        check(self.gradcheck.repeats > 0 && self.gradcheck.samples > 0, || {
            "gradcheck.repeats and gradcheck.samples must be positive".into()
        })?;
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.network.hidden.len() + 1
    }

    pub fn classes(&self) -> usize {
        match self.dataset.kind {
            DatasetKind::Moons => 2,
            _ => self.dataset.classes,
        }
    }

    /// Generates or reads the dataset. Synthetic sets are seeded from
    /// `seed`, so they are identical across runs.
    pub fn dataset(&self) -> Result<Dataset> {
        let d = &self.dataset;
        match d.kind {
            DatasetKind::Blobs => {
                let spec = BlobsSpec {
                    classes: d.classes,
                    points: d.points,
                    dims: d.dims,
                    separation: d.separation,
                    spread: d.spread,
                };
                blobs(&spec, self.seed).map_err(|e| CliError::Config(format!("dataset: {e}")))
            }
            DatasetKind::Moons => two_moons(d.points, d.noise, self.seed).map_err(|e| CliError::Config(format!("dataset: {e}"))),
            DatasetKind::File => load_csv(d.path.as_deref().expect("validated"), d.classes),
        }
    }

    /// Train/test partition of [`Self::dataset`].
    pub fn split_dataset(&self) -> Result<(Dataset, Dataset)> {
        Ok(self.dataset()?.split(1.0 - self.dataset.test_fraction, self.seed))
    }

    pub fn network(&self, input_dim: usize) -> Result<NetworkSpec> {
        let n = &self.network;
        let mut sizes = vec![input_dim];
        sizes.extend(&n.hidden);
        sizes.push(self.classes());
        let mut acts = vec![n.activation; n.hidden.len()];
        acts.push(n.output_activation);
        NetworkSpec::init(&sizes, &acts, n.sigma_init, n.sigma_w, self.seed).map_err(|e| CliError::Config(format!("network: {e}")))
    }

    pub fn objective(&self) -> Objective {
        Objective::cross_entropy(self.classes())
    }

    pub fn estimator_config(&self, kind: EstimatorKind) -> EstimatorConfig {
        EstimatorConfig::new(kind, self.copies)
            .with_sign(self.estimator.sign)
            .with_split(self.estimator.split)
            .with_antithetic(self.estimator.antithetic)
    }

    pub fn gradient_method(&self) -> GradientMethod {
        match self.estimator.method {
            Method::Bp => GradientMethod::Backprop,
            Method::Lr => GradientMethod::Estimator(self.estimator_config(EstimatorKind::Lr)),
            Method::Es => GradientMethod::Estimator(self.estimator_config(EstimatorKind::Es)),
            Method::Hybrid => GradientMethod::Estimator(self.estimator_config(EstimatorKind::Hybrid)),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            method: self.gradient_method(),
            schedule: self.schedule.to_schedule(),
            bounds: self.bounds.to_box(),
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            freeze_sigma: self.network.freeze_sigma,
            track_cosine: false,
            divergence_threshold: DIVERGENCE_THRESHOLD,
        }
    }
}

/// Output directory: explicit flag, then the config file, then the
/// environment variable, then a fixed fallback.
pub fn resolve_output_dir(flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    flag.or(config)
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(FALLBACK_OUTPUT_DIR))
}
