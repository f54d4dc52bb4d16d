//! Run configuration: every simulator parameter, its default, and the
//! line-oriented `key = value` file format.
//!
//! ```text
//! # comment
//! n_out = 100
//! theta0 = auto
//! p_pot = 0.01   # trailing comments are allowed
//! ```
//!
//! Keys that accept `auto` are resolved when a command runs (for example
//! `theta0` from the dataset's ink density). Unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};

use crate::crossbar::{InputVector, SubtractionConfig};
use crate::data::DEFAULT_BINARIZE_THRESHOLD;
use crate::device::{DeviceParams, SwitchingMode, SwitchingModel};
use crate::error::{Error, Result};
use crate::learning::StdpConfig;
use crate::network::{NetworkParams, DEFAULT_MAX_CYCLES};
use crate::neuron::NeuronParams;

/// Environment variable naming the MNIST directory when `mnist_dir = auto`.
pub const MNIST_DIR_ENV: &str = "MTJ_SNN_MNIST_DIR";
pub const DEFAULT_MNIST_DIR: &str = "data/mnist";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    VmmDemo,
    ClusterDemo,
    TrainEval,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::VmmDemo => "vmm-demo",
            Command::ClusterDemo => "cluster-demo",
            Command::TrainEval => "train-eval",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub n_out: usize,
    pub replicas: usize,
    pub g_ap: f64,
    pub ratio_rho: f64,
    pub read_noise_sigma: f64,
    /// `None` is the ideal factor `(1 + rho) / 2`.
    pub subtraction: Option<f64>,

    pub switching_mode: SwitchingMode,
    pub p_pot: f64,
    pub p_dep: f64,
    pub v50_pot: f64,
    pub v50_dep: f64,
    pub slope_pot: f64,
    pub slope_dep: f64,
    pub v_pot: Option<f64>,
    pub v_dep: Option<f64>,
    pub window_cycles: u64,

    pub leak_alpha: f64,
    /// `None`: 1.0 for the 2x2 demos, scaled to the dataset for training.
    pub theta0: Option<f64>,
    /// `None`: 0.15 * theta0.
    pub homeo_bump: Option<f64>,
    pub homeo_decay: f64,
    /// `None`: 0.1 * theta0.
    pub threshold_floor: Option<f64>,

    pub max_cycles: usize,
    pub seed: u64,
    pub threads: Option<usize>,

    pub cluster_init: InputVector,
    pub max_presentations: usize,
    pub runs: usize,

    pub epochs: usize,
    pub shuffle: bool,
    pub mnist_dir: Option<PathBuf>,
    pub train_images: Option<PathBuf>,
    pub train_labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    pub binarize_threshold: u8,
    pub train_limit: Option<usize>,
    pub test_limit: Option<usize>,
    pub metrics_every: usize,
    pub weight_maps: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let device = DeviceParams::default();
        let sw = SwitchingModel::default();
        let np = NeuronParams::default();
        let stdp = StdpConfig::default();
        RunConfig {
            n_out: 100,
            replicas: 1,
            g_ap: device.g_ap,
            ratio_rho: device.ratio_rho,
            read_noise_sigma: device.read_noise_sigma,
            subtraction: None,
            switching_mode: sw.mode,
            p_pot: sw.p_pot,
            p_dep: sw.p_dep,
            v50_pot: sw.v50_pot,
            v50_dep: sw.v50_dep,
            slope_pot: sw.slope_pot,
            slope_dep: sw.slope_dep,
            v_pot: sw.v_pot,
            v_dep: sw.v_dep,
            window_cycles: stdp.window_cycles,
            leak_alpha: np.leak_alpha,
            theta0: None,
            homeo_bump: None,
            homeo_decay: np.homeo_decay,
            threshold_floor: None,
            max_cycles: DEFAULT_MAX_CYCLES,
            seed: 1,
            threads: None,
            cluster_init: InputVector::parse("1100").expect("literal"),
            max_presentations: 200,
            runs: 1,
            epochs: 1,
            shuffle: false,
            mnist_dir: None,
            train_images: None,
            train_labels: None,
            test_images: None,
            test_labels: None,
            binarize_threshold: DEFAULT_BINARIZE_THRESHOLD,
            train_limit: None,
            test_limit: None,
            metrics_every: 10_000,
            weight_maps: true,
        }
    }
}

/// Every key accepted by [`RunConfig::set`], in file order.
pub const KEYS: &[&str] = &[
    "n_out",
    "replicas",
    "g_ap",
    "ratio_rho",
    "read_noise_sigma",
    "subtraction",
    "switching_mode",
    "p_pot",
    "p_dep",
    "v50_pot",
    "v50_dep",
    "slope_pot",
    "slope_dep",
    "v_pot",
    "v_dep",
    "window_cycles",
    "leak_alpha",
    "theta0",
    "homeo_bump",
    "homeo_decay",
    "threshold_floor",
    "max_cycles",
    "seed",
    "threads",
    "cluster_init",
    "max_presentations",
    "runs",
    "epochs",
    "shuffle",
    "mnist_dir",
    "train_images",
    "train_labels",
    "test_images",
    "test_labels",
    "binarize_threshold",
    "train_limit",
    "test_limit",
    "metrics_every",
    "weight_maps",
];

fn bad_value(key: &str, value: &str, what: &str) -> Error {
    Error::config("cli", format!("{key}: expected {what}, got {value:?}"))
}

fn num<T: std::str::FromStr>(key: &str, v: &str, what: &str) -> Result<T> {
    v.parse().map_err(|_| bad_value(key, v, what))
}

fn auto_or<T>(v: &str, f: impl FnOnce(&str) -> Result<T>) -> Result<Option<T>> {
    if v == "auto" {
        Ok(None)
    } else {
        f(v).map(Some)
    }
}

fn show<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "auto".to_string(), T::to_string)
}

fn show_path(v: &Option<PathBuf>) -> String {
    v.as_ref().map_or_else(|| "auto".to_string(), |p| p.display().to_string())
}

impl RunConfig {
    /// Defaults with the experiment-specific overrides for `cmd`.
    pub fn preset(cmd: Command) -> Self {
        let base = RunConfig::default();
        match cmd {
            Command::VmmDemo => RunConfig { n_out: 2, ..base },
            // Measured subtraction gives the 1100 start rows a small positive
            // drive; with the ideal factor they never fire.
            Command::ClusterDemo => RunConfig {
                n_out: 2,
                subtraction: Some(SubtractionConfig::MEASURED),
                theta0: Some(0.25),
                homeo_bump: Some(0.0),
                ..base
            },
            Command::TrainEval => RunConfig {
                p_pot: 0.01,
                p_dep: 0.0086,
                ..base
            },
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let real = |what| move |s: &str| num::<f64>(key, s, what);
        let count = |s: &str| num::<usize>(key, s, "a non-negative integer");
        match key {
            "n_out" => self.n_out = count(v)?,
            "replicas" => self.replicas = count(v)?,
            "g_ap" => self.g_ap = real("a number")(v)?,
            "ratio_rho" => self.ratio_rho = real("a number")(v)?,
            "read_noise_sigma" => self.read_noise_sigma = real("a number")(v)?,
            "subtraction" => {
                self.subtraction = match v {
                    "auto" | "ideal" => None,
                    "measured" => Some(SubtractionConfig::MEASURED),
                    _ => Some(real("a number, ideal, measured or auto")(v)?),
                }
            }
            "switching_mode" => {
                self.switching_mode = match v {
                    "fixed" => SwitchingMode::FixedProbability,
                    "voltage" => SwitchingMode::VoltageDependent,
                    _ => return Err(bad_value(key, v, "fixed or voltage")),
                }
            }
            "p_pot" => self.p_pot = real("a probability")(v)?,
            "p_dep" => self.p_dep = real("a probability")(v)?,
            "v50_pot" => self.v50_pot = real("a number")(v)?,
            "v50_dep" => self.v50_dep = real("a number")(v)?,
            "slope_pot" => self.slope_pot = real("a number")(v)?,
            "slope_dep" => self.slope_dep = real("a number")(v)?,
            "v_pot" => self.v_pot = auto_or(v, real("a voltage or auto"))?,
            "v_dep" => self.v_dep = auto_or(v, real("a voltage or auto"))?,
            "window_cycles" => self.window_cycles = num(key, v, "a cycle count")?,
            "leak_alpha" => self.leak_alpha = real("a number")(v)?,
            "theta0" => self.theta0 = auto_or(v, real("a number or auto"))?,
            "homeo_bump" => self.homeo_bump = auto_or(v, real("a number or auto"))?,
            "homeo_decay" => self.homeo_decay = real("a number")(v)?,
            "threshold_floor" => self.threshold_floor = auto_or(v, real("a number or auto"))?,
            "max_cycles" => self.max_cycles = count(v)?,
            "seed" => self.seed = num(key, v, "an unsigned 64-bit integer")?,
            "threads" => self.threads = auto_or(v, count)?,
            "cluster_init" => {
                self.cluster_init = InputVector::parse(v).map_err(|_| bad_value(key, v, "a bit string like 1100"))?
            }
            "max_presentations" => self.max_presentations = count(v)?,
            "runs" => self.runs = count(v)?,
            "epochs" => self.epochs = count(v)?,
            "shuffle" => self.shuffle = num(key, v, "true or false")?,
            "mnist_dir" => self.mnist_dir = auto_or(v, |s| Ok(PathBuf::from(s)))?,
            "train_images" => self.train_images = auto_or(v, |s| Ok(PathBuf::from(s)))?,
            "train_labels" => self.train_labels = auto_or(v, |s| Ok(PathBuf::from(s)))?,
            "test_images" => self.test_images = auto_or(v, |s| Ok(PathBuf::from(s)))?,
            "test_labels" => self.test_labels = auto_or(v, |s| Ok(PathBuf::from(s)))?,
            "binarize_threshold" => self.binarize_threshold = num(key, v, "a gray level 0-255")?,
            "train_limit" => self.train_limit = auto_or(v, count)?,
            "test_limit" => self.test_limit = auto_or(v, count)?,
            "metrics_every" => self.metrics_every = count(v)?,
            "weight_maps" => self.weight_maps = num(key, v, "true or false")?,
            _ => return Err(Error::config("cli", format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Apply a single `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::config("cli", format!("expected key=value, got {pair:?}")))?;
        self.set(k.trim(), v)
    }

    /// Apply every assignment in a config file's text. Errors name the line.
    pub fn apply_text(&mut self, text: &str, source: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let wrap = |e: Error| match e {
                Error::Config { owner, message } => Error::Config {
                    owner,
                    message: format!("{source}:{}: {message}", i + 1),
                },
                e => e,
            };
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::config("cli", format!("{source}:{}: expected key = value, got {line:?}", i + 1))
            })?;
            self.set(k.trim(), v).map_err(wrap)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// `(key, value)` for every key, in [`KEYS`] order, in the syntax
    /// [`set`](Self::set) accepts.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let mode = match self.switching_mode {
            SwitchingMode::FixedProbability => "fixed",
            SwitchingMode::VoltageDependent => "voltage",
        };
        let values = [
            self.n_out.to_string(),
            self.replicas.to_string(),
            self.g_ap.to_string(),
            self.ratio_rho.to_string(),
            self.read_noise_sigma.to_string(),
            show(&self.subtraction),
            mode.to_string(),
            self.p_pot.to_string(),
            self.p_dep.to_string(),
            self.v50_pot.to_string(),
            self.v50_dep.to_string(),
            self.slope_pot.to_string(),
            self.slope_dep.to_string(),
            show(&self.v_pot),
            show(&self.v_dep),
            self.window_cycles.to_string(),
            self.leak_alpha.to_string(),
            show(&self.theta0),
            show(&self.homeo_bump),
            self.homeo_decay.to_string(),
            show(&self.threshold_floor),
            self.max_cycles.to_string(),
            self.seed.to_string(),
            show(&self.threads),
            self.cluster_init.to_string(),
            self.max_presentations.to_string(),
            self.runs.to_string(),
            self.epochs.to_string(),
            self.shuffle.to_string(),
            show_path(&self.mnist_dir),
            show_path(&self.train_images),
            show_path(&self.train_labels),
            show_path(&self.test_images),
            show_path(&self.test_labels),
            self.binarize_threshold.to_string(),
            show(&self.train_limit),
            show(&self.test_limit),
            self.metrics_every.to_string(),
            self.weight_maps.to_string(),
        ];
        KEYS.iter().copied().zip(values).collect()
    }

    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn device(&self) -> DeviceParams {
        DeviceParams {
            g_ap: self.g_ap,
            ratio_rho: self.ratio_rho,
            read_noise_sigma: self.read_noise_sigma,
        }
    }

    /// Network parameters with `theta0 = auto` resolved to `auto_theta0`.
    /// Validates every owning module's constraints.
    pub fn network_params(&self, auto_theta0: f64) -> Result<NetworkParams> {
        self.validate()?;
        let device = self.device();
        let theta0 = self.theta0.unwrap_or(auto_theta0);
        let base = NeuronParams::with_theta0(theta0);
        let params = NetworkParams {
            device,
            subtraction: self
                .subtraction
                .map_or_else(|| SubtractionConfig::ideal(&device), |s| SubtractionConfig { s }),
            neuron: NeuronParams {
                leak_alpha: self.leak_alpha,
                theta0,
                homeo_bump: self.homeo_bump.unwrap_or(base.homeo_bump),
                homeo_decay: self.homeo_decay,
                threshold_floor: self.threshold_floor.unwrap_or(base.threshold_floor),
            },
            stdp: StdpConfig {
                window_cycles: self.window_cycles,
                model: SwitchingModel {
                    mode: self.switching_mode,
                    p_pot: self.p_pot,
                    p_dep: self.p_dep,
                    v50_pot: self.v50_pot,
                    v50_dep: self.v50_dep,
                    slope_pot: self.slope_pot,
                    slope_dep: self.slope_dep,
                    v_pot: self.v_pot,
                    v_dep: self.v_dep,
                },
            },
        };
        params.validate()?;
        Ok(params)
    }

    /// Checks for keys that are not owned by a simulator module.
    pub fn validate(&self) -> Result<()> {
        if self.n_out == 0 || self.replicas == 0 {
            return Err(Error::config(
                "crossbar",
                format!("n_out and replicas must be >= 1, got {} and {}", self.n_out, self.replicas),
            ));
        }
        if self.max_cycles == 0 {
            return Err(Error::config("network", "max_cycles must be >= 1"));
        }
        if self.threads == Some(0) {
            return Err(Error::config("cli", "threads must be >= 1 or auto"));
        }
        if self.runs == 0 {
            return Err(Error::config("cli", "runs must be >= 1"));
        }
        if self.metrics_every == 0 {
            return Err(Error::config("cli", "metrics_every must be >= 1"));
        }
        if self.train_limit == Some(0) || self.test_limit == Some(0) {
            return Err(Error::config("data", "train_limit and test_limit must be >= 1 or auto"));
        }
        Ok(())
    }

    /// MNIST directory: `mnist_dir`, else `$MTJ_SNN_MNIST_DIR`, else
    /// `data/mnist`.
    pub fn resolved_mnist_dir(&self) -> PathBuf {
        self.mnist_dir
            .clone()
            .or_else(|| std::env::var_os(MNIST_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_MNIST_DIR))
    }

    /// `(train_images, train_labels, test_images, test_labels)`. Unset paths
    /// use the standard MNIST file names in the MNIST directory, preferring
    /// an uncompressed file and falling back to `.gz`.
    pub fn dataset_paths(&self) -> [PathBuf; 4] {
        let dir = self.resolved_mnist_dir();
        let pick = |explicit: &Option<PathBuf>, name: &str| {
            explicit.clone().unwrap_or_else(|| {
                let plain = dir.join(name);
                let gz = dir.join(format!("{name}.gz"));
                if !plain.exists() && gz.exists() {
                    gz
                } else {
                    plain
                }
            })
        };
        [
            pick(&self.train_images, "train-images-idx3-ubyte"),
            pick(&self.train_labels, "train-labels-idx1-ubyte"),
            pick(&self.test_images, "t10k-images-idx3-ubyte"),
            pick(&self.test_labels, "t10k-labels-idx1-ubyte"),
        ]
    }
}
