//! Experiment configuration.
//!
//! The format is TOML restricted to one level of `[section]` tables with
//! scalar or flat-array values. Every key has a default, and unknown keys
//! are rejected. See `configs/` in the repository for complete examples.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ProjectionMode;
use crate::operators::OperatorSpec;
use crate::solvers::Subspace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Dps,
    Psld,
    Resample,
    Daps,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Dps => "dps",
            Self::Psld => "psld",
            Self::Resample => "resample",
            Self::Daps => "daps",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub solver: SolverKind,
    pub seeds: Vec<u64>,
    /// Parallel runs; 0 uses every available core.
    pub workers: usize,
    /// CSV destination, relative to the output directory unless absolute.
    pub output: String,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            solver: SolverKind::Dps,
            seeds: (0..20).collect(),
            workers: 0,
            output: "results.csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorSection {
    pub rows: usize,
    pub cols: usize,
    pub components: usize,
    /// Rank of each component mean.
    pub rank: usize,
    pub mean_rms: f64,
    /// Scalar component covariance.
    pub var: f64,
    pub seed: u64,
    /// Latent size of a fixed linear autoencoder; 0 runs in pixel space.
    pub latent_dim: usize,
}

impl Default for PriorSection {
    fn default() -> Self {
        Self {
            rows: 8,
            cols: 8,
            components: 4,
            rank: 2,
            mean_rms: 0.5,
            var: 1e-2,
            seed: 0,
            latent_dim: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    pub steps: usize,
    pub beta_min: f64,
    pub beta_max: f64,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self {
            steps: 200,
            beta_min: 1e-4,
            beta_max: 2e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuidanceSection {
    /// Base step size; swept values are multiples of it.
    pub step_size: f64,
    /// Optional per-step profile multiplied by the swept step size.
    pub step_profile: Vec<f64>,
    pub tau: f64,
    pub freq: usize,
    pub projection_enabled: bool,
    pub mode: ProjectionMode,
}

impl Default for GuidanceSection {
    fn default() -> Self {
        Self {
            step_size: 1.0,
            step_profile: Vec::new(),
            tau: 0.99,
            freq: 1,
            projection_enabled: true,
            mode: ProjectionMode::Full,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasurementSection {
    pub noise_sigma: f64,
}

impl Default for MeasurementSection {
    fn default() -> Self {
        Self { noise_sigma: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsldSection {
    pub gluing_weight: f64,
}

impl Default for PsldSection {
    fn default() -> Self {
        Self { gluing_weight: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResampleSection {
    /// Consistency runs at every `stride`-th DDIM index below `until`.
    pub stride: usize,
    /// 0 means all steps.
    pub until: usize,
    pub gd_iters: usize,
    pub gd_lr: f64,
    pub gamma: f64,
    pub ddim_eta: f64,
    pub ddim_delta: f64,
}

impl Default for ResampleSection {
    fn default() -> Self {
        Self {
            stride: 10,
            until: 0,
            gd_iters: 20,
            gd_lr: 0.5,
            gamma: 40.0,
            ddim_eta: 0.0,
            ddim_delta: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DapsSection {
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub levels: usize,
    pub langevin_iters: usize,
    pub langevin_lr: f64,
    /// Radius multiplier on `σ/√(1+σ²)`.
    pub radius_scale: f64,
    pub ode_steps: usize,
}

impl Default for DapsSection {
    fn default() -> Self {
        Self {
            sigma_max: 5.0,
            sigma_min: 0.01,
            levels: 40,
            langevin_iters: 50,
            langevin_lr: 0.5,
            radius_scale: 1.0,
            ode_steps: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub eta_multipliers: Vec<f64>,
    /// Empty uses `measurement.noise_sigma`.
    pub noise_sigmas: Vec<f64>,
    /// Empty uses `guidance.tau`.
    pub taus: Vec<f64>,
    /// Empty uses `state`, or `none` when projection is disabled.
    pub subspaces: Vec<Subspace>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            eta_multipliers: vec![1.0],
            noise_sigmas: Vec::new(),
            taus: Vec::new(),
            subspaces: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    pub failure_threshold_db: f64,
    /// Solver draws per truth instance; the highest-PSNR draw is kept.
    pub best_of: usize,
    /// Extra solver draws per truth used for the posterior moment error;
    /// 0 skips it. Needs a linear operator.
    pub posterior_samples: usize,
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self {
            failure_threshold_db: 20.0,
            best_of: 1,
            posterior_samples: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ManifoldSection {
    /// Manifold kinds: `linear_subspace`, `sphere`, `product_torus`.
    pub kinds: Vec<String>,
    pub dims: Vec<usize>,
    pub etas: Vec<f64>,
    pub eps_scales: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
}

impl Default for ManifoldSection {
    fn default() -> Self {
        Self {
            kinds: vec!["linear_subspace".into(), "sphere".into(), "product_torus".into()],
            dims: vec![16],
            etas: vec![1e-4, 1e-3, 1e-2],
            eps_scales: vec![0.0, 0.05],
            trials: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub prior: PriorSection,
    pub operator: OperatorSpec,
    pub schedule: ScheduleSection,
    pub guidance: GuidanceSection,
    pub measurement: MeasurementSection,
    pub psld: PsldSection,
    pub resample: ResampleSection,
    pub daps: DapsSection,
    pub sweep: SweepSection,
    pub metrics: MetricsSection,
    pub manifold: ManifoldSection,
}

impl ExperimentConfig {
    pub fn parse(src: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(src).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path)?;
        Self::parse(&src).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks everything that can be checked without running a solver.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        let seeds = &self.experiment.seeds;
        if seeds.is_empty() {
            return bad("experiment.seeds is empty");
        }
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != seeds.len() {
            return bad("experiment.seeds must be distinct");
        }
        let p = &self.prior;
        if p.rows == 0 || p.cols == 0 || p.components == 0 || p.rank == 0 || !(p.var >= 0.0) {
            return bad("prior needs positive sizes and a nonnegative variance");
        }
        if p.latent_dim > p.rows * p.cols {
            return bad("prior.latent_dim exceeds the image size");
        }
        if self.sweep.eta_multipliers.is_empty() || self.sweep.eta_multipliers.iter().any(|m| !(*m >= 0.0)) {
            return bad("sweep.eta_multipliers must be nonempty and nonnegative");
        }
        if self.sweep.noise_sigmas.iter().any(|s| !(*s >= 0.0)) || !(self.measurement.noise_sigma >= 0.0) {
            return bad("noise levels must be nonnegative");
        }
        if self.taus().iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
            return bad("taus must lie in (0, 1]");
        }
        if self.guidance.freq == 0 || !(self.guidance.step_size >= 0.0) {
            return bad("guidance needs freq >= 1 and a nonnegative step size");
        }
        if self.metrics.best_of == 0 {
            return bad("metrics.best_of must be >= 1");
        }
        if self.metrics.posterior_samples == 1 {
            return bad("metrics.posterior_samples must be 0 or >= 2");
        }
        if self.metrics.posterior_samples > 0 && !self.operator.kind.is_linear() {
            return bad("posterior moment error needs a linear operator");
        }
        if self.experiment.solver == SolverKind::Psld && !self.operator.kind.is_linear() {
            return bad("the psld solver needs a linear operator");
        }
        if self.metrics.posterior_samples > 0 && p.latent_dim > 0 {
            return bad("posterior moment error is only available in pixel space");
        }
        if self.experiment.solver == SolverKind::Daps {
            if self.noise_sigmas().iter().any(|s| !(*s > 0.0)) {
                return bad("daps needs positive measurement noise");
            }
            let d = &self.daps;
            if !(d.sigma_max > d.sigma_min && d.sigma_min > 0.0) || d.levels < 2 || !(d.radius_scale > 0.0) {
                return bad("daps needs sigma_max > sigma_min > 0, levels >= 2, radius_scale > 0");
            }
        }
        // Building the operator catches the remaining parameter errors.
        self.operator.build((p.rows, p.cols))?;
        crate::schedule::make_vp_schedule(self.schedule.steps, self.schedule.beta_min, self.schedule.beta_max)?;
        for k in &self.manifold.kinds {
            if !matches!(k.as_str(), "linear_subspace" | "sphere" | "product_torus") {
                return Err(Error::Config(format!("unknown manifold kind {k}")));
            }
        }
        Ok(())
    }

    pub fn noise_sigmas(&self) -> Vec<f64> {
        if self.sweep.noise_sigmas.is_empty() {
            vec![self.measurement.noise_sigma]
        } else {
            self.sweep.noise_sigmas.clone()
        }
    }

    pub fn taus(&self) -> Vec<f64> {
        if self.sweep.taus.is_empty() {
            vec![self.guidance.tau]
        } else {
            self.sweep.taus.clone()
        }
    }

    pub fn subspaces(&self) -> Vec<Subspace> {
        if !self.sweep.subspaces.is_empty() {
            self.sweep.subspaces.clone()
        } else if self.guidance.projection_enabled {
            vec![Subspace::State]
        } else {
            vec![Subspace::None]
        }
    }
}
