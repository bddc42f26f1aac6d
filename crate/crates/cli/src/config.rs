//! Experiment configuration. A config fully determines an output file; the
//! worker count is deliberately not part of it.

use std::path::Path;

use serde::{Deserialize, Serialize};
use trapwalk_core::lyapunov::CrossingMethod;
use trapwalk_core::polymer::SurvivalMethod;
use trapwalk_core::ModelParams;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ModelSpec {
    pub d: usize,
    pub p: f64,
    #[serde(default)]
    pub drift: Vec<f64>,
    pub n: u64,
}

impl ModelSpec {
    pub fn drift(&self) -> Vec<f64> {
        if self.drift.is_empty() {
            vec![0.0; self.d]
        } else {
            self.drift.clone()
        }
    }

    pub fn params(&self) -> Result<ModelParams, CliError> {
        self.params_at(self.n)
    }

    pub fn params_at(&self, n: u64) -> Result<ModelParams, CliError> {
        ModelParams::new(self.d, self.p, &self.drift(), n).map_err(|e| CliError::Config(e.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct SurvivalSpec {
    pub n_list: Vec<u64>,
    pub method: SurvivalMethod,
}

impl Default for SurvivalSpec {
    fn default() -> Self {
        SurvivalSpec { n_list: vec![16, 64, 256, 1024], method: SurvivalMethod::Tilted { theta: None } }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct EigenSpec {
    pub radii: Vec<f64>,
    pub tol: f64,
    pub decay_radius: f64,
    pub decay_n: usize,
    pub decay_tolerance: f64,
}

impl Default for EigenSpec {
    fn default() -> Self {
        EigenSpec {
            radii: vec![4.0, 8.0, 12.0, 16.0, 20.0],
            tol: trapwalk_core::spectral::DEFAULT_TOL,
            decay_radius: 8.0,
            decay_n: 5000,
            decay_tolerance: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct LyapunovSpec {
    pub directions: Vec<Vec<i32>>,
    pub n_list: Vec<usize>,
    pub method: CrossingMethod,
    /// Cells with `n |v|_1` at most this are also enumerated exactly, with
    /// `exact_extra` steps allowed beyond the `l1` distance.
    pub exact_max_l1: usize,
    pub exact_extra: usize,
}

impl Default for LyapunovSpec {
    fn default() -> Self {
        LyapunovSpec {
            directions: vec![vec![1, 0], vec![1, 1]],
            n_list: vec![2, 4, 6, 8, 12],
            method: CrossingMethod::TiltedIs { theta: None },
            exact_max_l1: 2,
            exact_extra: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct ChainSpec {
    /// Window half-width in units of `rho_N`.
    pub window_factor: f64,
    /// Translation move range in units of `rho_N`.
    pub shift_range_factor: f64,
    pub burn_in_fraction: f64,
}

impl Default for ChainSpec {
    fn default() -> Self {
        ChainSpec { window_factor: 3.5, shift_range_factor: 0.5, burn_in_fraction: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct LdpSpec {
    pub n_list: Vec<u64>,
    /// Targets in units of `rho_N`.
    pub targets: Vec<Vec<f64>>,
    pub sweeps: u64,
    pub chain: ChainSpec,
    /// `beta(e_1)`; estimated when absent.
    pub beta_e1: Option<f64>,
    /// Band for measured/predicted rate at the largest N, for targets outside `B(0; 2)`.
    pub ratio_band: Option<[f64; 2]>,
}

impl Default for LdpSpec {
    fn default() -> Self {
        LdpSpec {
            n_list: vec![1024, 4096, 16384],
            targets: vec![vec![1.0, 0.0], vec![3.0, 0.0]],
            sweeps: 400,
            chain: ChainSpec { window_factor: 4.5, ..ChainSpec::default() },
            beta_e1: None,
            ratio_band: Some([0.5, 2.0]),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct ConfineSpec {
    pub n_list: Vec<u64>,
    /// Sweeps per scale, aligned with `n_list`.
    pub sweeps: Vec<u64>,
    pub chain: ChainSpec,
    pub epsilon: f64,
    pub beta_e1: Option<f64>,
    /// Run the vacant-ball detector every this many sweeps (0 = never).
    pub detect_every: u64,
    /// Require the projected mean to be nondecreasing in N.
    pub require_monotone: bool,
    /// Band for the projected mean at the largest N (ignored when `h = 0`).
    pub band: Option<[f64; 2]>,
    /// Require the sandwich frequency to be nondecreasing in N, up to
    /// `sandwichSlack` combined standard errors.
    pub sandwich_trend: bool,
    pub sandwich_slack: f64,
}

impl Default for ConfineSpec {
    fn default() -> Self {
        ConfineSpec {
            n_list: vec![1 << 10, 1 << 12, 1 << 14, 1 << 16],
            sweeps: vec![2000, 2000, 400, 120],
            chain: ChainSpec::default(),
            epsilon: 0.5,
            beta_e1: None,
            detect_every: 0,
            require_monotone: true,
            band: Some([1.0, 2.5]),
            sandwich_trend: true,
            sandwich_slack: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct DetectSpec {
    /// Target values of `rho_N`; N is chosen to match.
    pub rho_list: Vec<f64>,
    pub seeds: u64,
    pub iota: f64,
    pub rho: f64,
    pub center: Vec<f64>,
    pub window_factor: f64,
    pub min_hit_fraction: f64,
}

impl Default for DetectSpec {
    fn default() -> Self {
        DetectSpec {
            rho_list: vec![10.0, 20.0],
            seeds: 100,
            iota: 0.25,
            rho: 0.04,
            center: vec![2.4, -3.7],
            window_factor: 3.0,
            min_hit_fraction: 0.95,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct PinnedSpec {
    pub targets: Vec<Vec<i32>>,
    pub cap: usize,
    pub fields: u64,
}

impl Default for PinnedSpec {
    fn default() -> Self {
        PinnedSpec { targets: vec![vec![0, 0], vec![2, 0], vec![1, 1], vec![4, 2]], cap: 12, fields: 20 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct SuitesSpec {
    /// Eigensolver tolerance used by the heat-kernel decay check.
    pub eigen_tol: f64,
    pub random_domains: u64,
}

impl Default for SuitesSpec {
    fn default() -> Self {
        SuitesSpec { eigen_tol: trapwalk_core::spectral::DEFAULT_TOL, random_domains: 200 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", content = "settings", rename_all = "kebab-case")]
pub enum ExperimentSpec {
    Survival(#[serde(default)] SurvivalSpec),
    Eigen(#[serde(default)] EigenSpec),
    Lyapunov(#[serde(default)] LyapunovSpec),
    Ldp(#[serde(default)] LdpSpec),
    Confine(#[serde(default)] ConfineSpec),
    Detect(#[serde(default)] DetectSpec),
    PinnedCompare(#[serde(default)] PinnedSpec),
    Suites(#[serde(default)] SuitesSpec),
}

impl ExperimentSpec {
    pub const IDS: [&'static str; 8] =
        ["survival", "eigen", "lyapunov", "ldp", "confine", "detect", "pinned-compare", "suites"];

    pub fn id(&self) -> &'static str {
        match self {
            ExperimentSpec::Survival(_) => "survival",
            ExperimentSpec::Eigen(_) => "eigen",
            ExperimentSpec::Lyapunov(_) => "lyapunov",
            ExperimentSpec::Ldp(_) => "ldp",
            ExperimentSpec::Confine(_) => "confine",
            ExperimentSpec::Detect(_) => "detect",
            ExperimentSpec::PinnedCompare(_) => "pinned-compare",
            ExperimentSpec::Suites(_) => "suites",
        }
    }

    pub fn default_for(id: &str) -> Result<Self, CliError> {
        Ok(match id {
            "survival" => ExperimentSpec::Survival(Default::default()),
            "eigen" => ExperimentSpec::Eigen(Default::default()),
            "lyapunov" => ExperimentSpec::Lyapunov(Default::default()),
            "ldp" => ExperimentSpec::Ldp(Default::default()),
            "confine" => ExperimentSpec::Confine(Default::default()),
            "detect" => ExperimentSpec::Detect(Default::default()),
            "pinned-compare" => ExperimentSpec::PinnedCompare(Default::default()),
            "suites" => ExperimentSpec::Suites(Default::default()),
            other => {
                return Err(CliError::Config(format!(
                    "unknown experiment {other:?}; expected one of {}",
                    Self::IDS.join(", ")
                )))
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(flatten)]
    pub spec: ExperimentSpec,
    pub model: ModelSpec,
    pub seed: u64,
    #[serde(default = "one")]
    pub replicas: u64,
    /// Monte Carlo sample count, where an experiment uses one.
    #[serde(default = "default_samples")]
    pub samples: u64,
    #[serde(default)]
    pub format: Format,
}

fn one() -> u64 {
    1
}

fn default_samples() -> u64 {
    20_000
}

impl ExperimentConfig {
    pub fn new(spec: ExperimentSpec, model: ModelSpec, seed: u64) -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            spec,
            model,
            seed,
            replicas: 1,
            samples: default_samples(),
            format: Format::Json,
        }
    }

    /// Default config for an experiment id.
    pub fn default_for(id: &str) -> Result<Self, CliError> {
        let spec = ExperimentSpec::default_for(id)?;
        let model = match &spec {
            ExperimentSpec::Confine(_) => ModelSpec { d: 2, p: 0.7, drift: vec![0.4, 0.0], n: 1 << 16 },
            ExperimentSpec::Ldp(_) => ModelSpec { d: 2, p: 0.5, drift: vec![], n: 16384 },
            ExperimentSpec::PinnedCompare(_) => ModelSpec { d: 2, p: 0.5, drift: vec![], n: 8 },
            _ => ModelSpec { d: 2, p: 0.5, drift: vec![], n: 1024 },
        };
        Ok(ExperimentConfig::new(spec, model, 1))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schema version {} not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.model.params()?;
        if self.replicas == 0 {
            return Err(CliError::Config("replicas must be positive".into()));
        }
        if let ExperimentSpec::Confine(c) = &self.spec {
            if c.sweeps.len() != c.n_list.len() {
                return Err(CliError::Config("confine: sweeps and nList differ in length".into()));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let bad = |e: serde_json::Error| CliError::Config(e.to_string());
        let mut value: serde_json::Value = serde_json::from_str(text).map_err(bad)?;
        // Omitted settings mean all defaults.
        if let Some(obj) = value.as_object_mut() {
            obj.entry("settings").or_insert_with(|| serde_json::json!({}));
        }
        let cfg: ExperimentConfig = serde_json::from_value(value).map_err(bad)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
