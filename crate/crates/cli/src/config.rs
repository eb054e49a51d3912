//! Experiment configuration, read from TOML.
//!
//! Sections: `[problem]`, `[solver]`, `[plan]`, `[schedule]`, `[stop]`,
//! `[output]`. Plan and schedule values accept `"auto"`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub plan: PlanConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    pub stop: Option<StopConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    /// Directory that relative data paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Ls,
    Softmax,
    Pca,
    Homography,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: Kind,
    /// Fraction of examples kept (`h = keep * n`), or `"overestimate"` for
    /// `h = n (1 - (outlier_frac + 0.10))`.
    pub keep: Setting,
    /// CSV file to load instead of generating synthetic data.
    pub data: Option<PathBuf>,
    /// 0/1 outlier mask, one value per line, for scoring loaded data.
    pub truth: Option<PathBuf>,
    pub n: Option<usize>,
    /// Features (ls, softmax) or rows of the data matrix (pca).
    pub p: Option<usize>,
    pub classes: Option<usize>,
    pub rank: Option<usize>,
    #[serde(default)]
    pub outlier_frac: f64,
    pub noise: Option<f64>,
    #[serde(default = "default_separation")]
    pub separation: f64,
    #[serde(default = "default_magnitude")]
    pub magnitude: f64,
    /// Data seed; defaults to the solver seed.
    pub seed: Option<u64>,
    /// `lambda` in the ridge term `(lambda / 2n) ||x||^2` (ls, softmax).
    #[serde(default)]
    pub ridge: f64,
    #[serde(default = "default_residual")]
    pub residual: String,
    /// Refit the final homography on all kept pairs with normalized DLT.
    #[serde(default)]
    pub hartley: bool,
}

fn default_separation() -> f64 {
    2.5
}

fn default_magnitude() -> f64 {
    10.0
}

fn default_residual() -> String {
    "direct".into()
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// saga, svrg, full, palm, pspg or sg.
    #[serde(default = "default_method")]
    pub method: String,
    /// Methods for `compare`.
    pub methods: Option<Vec<String>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_exec")]
    pub exec: String,
    /// Restarts for `homography`.
    #[serde(default = "default_restarts")]
    pub restarts: usize,
}

fn default_method() -> String {
    "saga".into()
}

fn default_exec() -> String {
    "parallel".into()
}

fn default_restarts() -> usize {
    64
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: default_method(),
            methods: None,
            seed: 0,
            exec: default_exec(),
            restarts: default_restarts(),
        }
    }
}

/// A number or a keyword such as `"auto"`.
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(untagged)]
pub enum Setting {
    Number(f64),
    Word(String),
}

impl Default for Setting {
    fn default() -> Self {
        Setting::Word("auto".into())
    }
}

impl Setting {
    /// `None` for `"auto"`, the number otherwise.
    pub fn number_or_auto(&self, field: &str) -> Result<Option<f64>, CliError> {
        match self {
            Setting::Number(v) => Ok(Some(*v)),
            Setting::Word(w) if w == "auto" => Ok(None),
            Setting::Word(w) => Err(CliError::Config(format!(
                "{field}: expected a number or \"auto\", got \"{w}\""
            ))),
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConfig {
    #[serde(default)]
    pub batch: Setting,
    #[serde(default)]
    pub q: Setting,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(default)]
    pub gamma: Setting,
    #[serde(default)]
    pub tau: Setting,
    #[serde(default)]
    pub eta: Setting,
    /// `gamma = gamma_per_l / max_i L_i`; overrides `gamma`.
    pub gamma_per_l: Option<f64>,
    /// `tau = tau_per_n * n`; overrides `tau`.
    pub tau_per_n: Option<f64>,
    #[serde(default = "default_epsilon0")]
    pub epsilon0: f64,
    /// sublinear or linear.
    #[serde(default = "default_regime")]
    pub regime: String,
}

fn default_epsilon0() -> f64 {
    smart_core::stepsize::DEFAULT_EPSILON0
}

fn default_regime() -> String {
    "sublinear".into()
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            gamma: Setting::default(),
            tau: Setting::default(),
            eta: Setting::default(),
            gamma_per_l: None,
            tau_per_n: None,
            epsilon0: default_epsilon0(),
            regime: default_regime(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct StopConfig {
    pub max_epochs: f64,
    #[serde(default)]
    pub stationarity_tol: f64,
    pub log_every_epochs: Option<f64>,
    pub log_every_iterations: Option<u64>,
    pub max_iterations: Option<u64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: default_dir() }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Config::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Config, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))
    }

    pub fn stop(&self) -> Result<&StopConfig, CliError> {
        self.stop
            .as_ref()
            .ok_or_else(|| CliError::Config("missing section [stop] (needs stop.max_epochs)".into()))
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn data_seed(&self) -> u64 {
        self.problem.seed.unwrap_or(self.solver.seed)
    }
}
