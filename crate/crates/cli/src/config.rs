//! Run configuration: a versioned JSON document, validated before any work.

use std::path::{Path, PathBuf};

use adjrom::estimator::fnn::TrainConfig;
use adjrom::{
    Benchmark, HhtParams, LoadCase, MaterialParams, Objective, OptConfig, Problem, TimeGrid,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub rom: RomConfig,
    #[serde(default)]
    pub optimizer: OptConfig,
    #[serde(default)]
    pub gradcheck: GradcheckConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// A built-in benchmark, optionally with parts replaced.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub benchmark: Benchmark,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub material: Option<MaterialParams>,
    pub load: Option<LoadCase>,
    pub objective: Option<Objective>,
    pub filter_radius: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub n_steps: Option<usize>,
    pub total_time: Option<f64>,
    pub alpha: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorChoice {
    /// Trained network on residual norms.
    Fnn,
    /// Nearest-design ℓ₂-gain table.
    GainBaseline,
    /// No online estimate; the reduced model is trusted whenever selected.
    True,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RomConfig {
    pub enabled: bool,
    /// Size of the training set D_h.
    pub samples: usize,
    /// Full-order iterations run to generate D_h.
    pub sample_iterations: usize,
    pub tol: f64,
    pub max_basis: usize,
    pub seed: u64,
    pub estimator: EstimatorChoice,
    /// Fall back to the full adjoint when the relative estimated error
    /// exceeds this.
    pub fallback_tol: Option<f64>,
    /// Offline artifact directory read by `optimize`.
    pub artifacts: Option<PathBuf>,
    pub train: TrainSettings,
}

impl Default for RomConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            samples: 20,
            sample_iterations: 20,
            tol: 1e-3,
            max_basis: 40,
            seed: 0,
            estimator: EstimatorChoice::Fnn,
            fallback_tol: None,
            artifacts: None,
            train: TrainSettings::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSettings {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub epochs: usize,
    pub holdout_fraction: f64,
    pub per_step: bool,
    pub log_scale: bool,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            hidden: t.hidden,
            lr: t.lr,
            epochs: t.epochs,
            holdout_fraction: t.holdout_fraction,
            per_step: t.per_step,
            log_scale: t.log_scale,
        }
    }
}

impl TrainSettings {
    pub fn to_train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            hidden: self.hidden.clone(),
            lr: self.lr,
            epochs: self.epochs,
            holdout_fraction: self.holdout_fraction,
            seed,
            per_step: self.per_step,
            log_scale: self.log_scale,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradcheckConfig {
    pub probes: usize,
    pub fd_step: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            probes: 10,
            fd_step: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: Option<PathBuf>,
    pub vtk: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: None,
            vtk: true,
        }
    }
}

impl RunConfig {
    /// Parses and validates; errors name the offending key path.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Validation(format!("config error at `{path}`: {}", e.into_inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Validation(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_json(&text)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |key: &str, msg: &str| {
            Err(CliError::Validation(format!(
                "config error at `{key}`: {msg}"
            )))
        };
        if self.schema_version != SCHEMA_VERSION {
            return bad(
                "schema_version",
                &format!(
                    "unsupported version {} (expected {SCHEMA_VERSION})",
                    self.schema_version
                ),
            );
        }
        if matches!(self.problem.nx, Some(0)) || matches!(self.problem.ny, Some(0)) {
            return bad("problem.nx", "mesh dimensions must be positive");
        }
        if !(self.gradcheck.fd_step > 0.0 && self.gradcheck.fd_step.is_finite()) {
            return bad("gradcheck.fd_step", "must be positive");
        }
        if self.gradcheck.probes == 0 {
            return bad("gradcheck.probes", "must be positive");
        }
        if self.rom.samples == 0 {
            return bad("rom.samples", "must be positive");
        }
        if self.rom.max_basis == 0 {
            return bad("rom.max_basis", "must be positive");
        }
        if !(self.rom.tol >= 0.0) {
            return bad("rom.tol", "must be non-negative");
        }
        if let Some(t) = self.rom.fallback_tol {
            if !(t > 0.0) {
                return bad("rom.fallback_tol", "must be positive");
            }
        }
        self.optimizer
            .validate()
            .map_err(|e| CliError::Validation(format!("config error at `optimizer`: {e}")))?;
        Ok(())
    }

    /// The benchmark with every override applied.
    pub fn build_problem(&self) -> Result<Problem, CliError> {
        let p = &self.problem;
        let invalid =
            |e: adjrom::Error| CliError::Validation(format!("config error at `problem`: {e}"));
        let (dx, dy) = p.benchmark.default_mesh();
        let mut problem = p
            .benchmark
            .build(p.nx.unwrap_or(dx), p.ny.unwrap_or(dy))
            .map_err(invalid)?;
        if let Some(m) = p.material {
            problem.material = m;
        }
        if let Some(l) = &p.load {
            problem.load = l.clone();
        }
        if let Some(o) = p.objective {
            problem.objective = o;
        }
        let t = &self.time;
        let grid = TimeGrid::new(
            t.n_steps.unwrap_or(problem.grid.n_steps()),
            t.total_time.unwrap_or(problem.grid.total_time()),
        )
        .map_err(|e| CliError::Validation(format!("config error at `time`: {e}")))?;
        let hht = match t.alpha {
            Some(a) => HhtParams::from_alpha(a)
                .map_err(|e| CliError::Validation(format!("config error at `time.alpha`: {e}")))?,
            None => problem.hht,
        };
        let mut problem = Problem::new(
            problem.mesh,
            problem.material,
            problem.load,
            problem.objective,
            grid,
            hht,
        )
        .map_err(invalid)?;
        if let Some(r) = p.filter_radius {
            problem = problem.with_filter(r).map_err(|e| {
                CliError::Validation(format!("config error at `problem.filter_radius`: {e}"))
            })?;
        }
        Ok(problem)
    }

    /// Hex SHA-256 of the problem and time blocks, used to pair offline
    /// artifacts with the problem they were built for.
    pub fn problem_hash(&self) -> String {
        let canonical =
            serde_json::to_vec(&(&self.problem, &self.time)).expect("config serializes");
        Sha256::digest(&canonical)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
