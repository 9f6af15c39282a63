//! Guided posterior samplers with optional state-subspace gradient projection.
//!
//! Three samplers share the projection machinery in this module:
//!
//! * [`run_dps`] / [`run_psld_style`]: ancestral sampling with a
//!   measurement gradient taken through the Tweedie denoiser,
//! * [`run_resample_style`]: DDIM sampling with hard data consistency by
//!   inner gradient descent followed by stochastic resampling,
//! * [`run_daps_style`]: annealed decoupled sampling with probability-flow
//!   denoising and Langevin refinement at each noise level.
//!
//! All randomness comes from the caller's RNG, except the random-matrix
//! subspace arm which draws from its own seeded stream so that paired arms
//! share identical diffusion noise.

mod autoencoder;
mod daps;
mod dps;
mod resample;
mod trajectory;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use autoencoder::Autoencoder;
pub use daps::{default_radius, pf_ode_denoise, run_daps_style, DapsConfig, PF_ODE_STEPS};
pub use dps::{run_dps, run_psld_style};
pub use resample::{run_resample_style, stochastic_resample, ResampleConfig};
pub use trajectory::{StepRecord, Trajectory};

use crate::error::{Error, Result};
use crate::linalg::{build_projector, Mat, ProjectionMode, StateProjector};
use crate::operators::ForwardOperator;
use crate::prior::GmmPrior;

/// Norm beyond which a run counts as diverged.
pub const DIVERGENCE_NORM: f64 = 1e6;

/// Which subspace the guidance gradient is projected onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subspace {
    /// Leading singular vectors of the current diffusion state.
    #[default]
    State,
    /// Leading singular vectors of a Gaussian random matrix.
    Random,
    /// Leading singular vectors of the gradient itself.
    Gradient,
    /// No projection.
    None,
}

impl Subspace {
    pub fn name(self) -> &'static str {
        match self {
            Self::State => "state",
            Self::Random => "random",
            Self::Gradient => "gradient",
            Self::None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepSize {
    Constant(f64),
    /// Indexed by 0-based step number; the last entry repeats.
    PerStep(Vec<f64>),
}

impl StepSize {
    pub fn at(&self, step: usize) -> f64 {
        match self {
            Self::Constant(v) => *v,
            Self::PerStep(v) => v[step.min(v.len() - 1)],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceConfig {
    pub step_size: StepSize,
    /// Variance retention threshold in `(0, 1]`.
    pub tau: f64,
    /// Projection is applied on steps whose 0-based index is a multiple of `freq`.
    pub freq: usize,
    pub projection_enabled: bool,
    pub mode: ProjectionMode,
    pub subspace: Subspace,
    /// Seed of the random-matrix subspace stream.
    pub subspace_seed: u64,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        Self {
            step_size: StepSize::Constant(1.0),
            tau: 0.99,
            freq: 1,
            projection_enabled: true,
            mode: ProjectionMode::Full,
            subspace: Subspace::State,
            subspace_seed: 0,
        }
    }
}

impl GuidanceConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = match &self.step_size {
            StepSize::Constant(v) => *v >= 0.0,
            StepSize::PerStep(v) => !v.is_empty() && v.iter().all(|s| *s >= 0.0),
        };
        if !positive {
            return Err(Error::InvalidParam("step sizes must be nonnegative".into()));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::InvalidParam(format!("tau must be in (0, 1], got {}", self.tau)));
        }
        if self.freq == 0 {
            return Err(Error::InvalidParam("freq must be >= 1".into()));
        }
        Ok(())
    }

    /// The subspace actually used; `None` when projection is disabled.
    pub fn effective_subspace(&self) -> Subspace {
        if self.projection_enabled {
            self.subspace
        } else {
            Subspace::None
        }
    }

    pub fn unprojected(mut self) -> Self {
        self.projection_enabled = false;
        self
    }
}

/// Everything a sampler needs to know about the inverse problem.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    /// Prior over diffusion states (latents when `ae` is not the identity).
    pub prior: &'a GmmPrior,
    pub op: &'a ForwardOperator,
    pub y: &'a Mat,
    pub ae: &'a Autoencoder,
    /// Ground truth in image space, used only for trajectory diagnostics.
    pub truth: Option<&'a Mat>,
}

impl<'a> Problem<'a> {
    pub fn new(prior: &'a GmmPrior, op: &'a ForwardOperator, y: &'a Mat, ae: &'a Autoencoder) -> Self {
        Self {
            prior,
            op,
            y,
            ae,
            truth: None,
        }
    }

    pub fn with_truth(mut self, truth: &'a Mat) -> Self {
        self.truth = Some(truth);
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        self.ae.check_shapes(self.prior.shape(), self.op.in_shape())?;
        self.y.ensure_shape(self.op.out_shape())
    }

    /// `∇_z ½‖y − A(D(z))‖²`.
    pub(crate) fn latent_data_grad(&self, z: &Mat) -> Result<Mat> {
        let x = self.ae.decode(z)?;
        let g = self.op.data_fit_grad(&x, self.y)?;
        self.ae.decode_adjoint(&g)
    }

    pub(crate) fn rmse_to_truth(&self, z0_hat: &Mat) -> Result<Option<f64>> {
        match self.truth {
            Some(truth) => {
                let x = self.ae.decode(z0_hat)?;
                Ok(Some(((&x - truth).norm_sq() / x.len() as f64).sqrt()))
            }
            None => Ok(None),
        }
    }
}

/// Builds projectors for one run according to the configured subspace.
pub(crate) struct ProjectorSource {
    tau: f64,
    mode: ProjectionMode,
    subspace: Subspace,
    aux: ChaCha8Rng,
}

impl ProjectorSource {
    pub(crate) fn new(cfg: &GuidanceConfig) -> Self {
        Self {
            tau: cfg.tau,
            mode: cfg.mode,
            subspace: cfg.effective_subspace(),
            aux: ChaCha8Rng::seed_from_u64(cfg.subspace_seed),
        }
    }

    pub(crate) fn enabled(&self) -> bool {
        self.subspace != Subspace::None
    }

    /// Projector for `state`, or for `grad` under the gradient arm.
    ///
    /// Returns `None` when projection is off, or when the gradient arm sees
    /// an all-zero gradient (which every projector maps to zero anyway).
    pub(crate) fn build(&mut self, state: &Mat, grad: &Mat) -> Result<Option<StateProjector>> {
        let p = match self.subspace {
            Subspace::None => return Ok(None),
            Subspace::State => build_projector(state, self.tau, 1)?,
            Subspace::Random => {
                let m = Mat::randn(state.rows(), state.cols(), &mut self.aux);
                build_projector(&m, self.tau, 1)?
            }
            Subspace::Gradient => {
                if grad.max_abs() == 0.0 {
                    return Ok(None);
                }
                build_projector(grad, self.tau, 1)?
            }
        };
        Ok(Some(p.with_mode(self.mode)))
    }

    /// Whether the subspace depends on the gradient (rebuilt per gradient).
    pub(crate) fn gradient_driven(&self) -> bool {
        self.subspace == Subspace::Gradient
    }
}

pub(crate) fn check_divergence(z: &Mat, step: usize) -> Result<()> {
    if !z.is_finite() || z.norm() > DIVERGENCE_NORM {
        return Err(Error::Diverged { step });
    }
    Ok(())
}
