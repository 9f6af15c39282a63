use std::collections::BTreeSet;

use rand::Rng;

use super::{check_divergence, GuidanceConfig, Problem, ProjectorSource, StepRecord, Trajectory};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::schedule::{ddim_step, NoiseSchedule};

#[derive(Debug, Clone, PartialEq)]
pub struct ResampleConfig {
    /// DDIM indices `t` (in `0..T`) at which hard data consistency runs.
    pub resample_steps: BTreeSet<usize>,
    pub gd_iters: usize,
    pub gd_lr: f64,
    /// Weight of the optimized estimate in stochastic resampling.
    pub gamma: f64,
    /// DDIM stochasticity `η`; the noise term is `η δ ε₁`.
    pub ddim_eta: f64,
    pub ddim_delta: f64,
}

impl Default for ResampleConfig {
    fn default() -> Self {
        Self {
            resample_steps: BTreeSet::new(),
            gd_iters: 20,
            gd_lr: 0.5,
            gamma: 40.0,
            ddim_eta: 0.0,
            ddim_delta: 0.0,
        }
    }
}

impl ResampleConfig {
    /// Consistency every `stride` steps for `t < until`, always including `t = 0`.
    pub fn with_stride(mut self, stride: usize, until: usize) -> Self {
        let stride = stride.max(1);
        self.resample_steps = (0..until).filter(|t| t % stride == 0).collect();
        self
    }

    fn validate(&self, steps: usize) -> Result<()> {
        if let Some(&t) = self.resample_steps.iter().next_back() {
            if t >= steps {
                return Err(Error::IndexOutOfRange {
                    index: t,
                    max: steps - 1,
                });
            }
        }
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidParam("resampling gamma must be positive".into()));
        }
        if !(self.gd_lr >= 0.0) {
            return Err(Error::InvalidParam("gd_lr must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Draws from `N((γ√ᾱ_t z0_y + (1−ᾱ_t) z'_t)/(γ+1−ᾱ_t), γ(1−ᾱ_t)/(γ+1−ᾱ_t) I)`.
pub fn stochastic_resample<R: Rng + ?Sized>(
    z0_y: &Mat,
    z_prime: &Mat,
    t: usize,
    gamma: f64,
    sched: &NoiseSchedule,
    rng: &mut R,
) -> Result<Mat> {
    sched.check_index(t)?;
    z_prime.ensure_shape(z0_y.shape())?;
    if !(gamma > 0.0) {
        return Err(Error::InvalidParam("resampling gamma must be positive".into()));
    }
    let ab = sched.alpha_bar(t);
    let denom = gamma + 1.0 - ab;
    let mut out = z0_y.scale(gamma * ab.sqrt() / denom).axpy((1.0 - ab) / denom, z_prime);
    let var = gamma * (1.0 - ab) / denom;
    if var > 0.0 {
        let eps = Mat::randn(out.rows(), out.cols(), rng);
        out.add_scaled_inplace(var.sqrt(), &eps);
    }
    Ok(out)
}

/// DDIM sampling with hard data consistency at the steps in `rcfg.resample_steps`.
///
/// At such a step the clean estimate is refined by `gd_iters` gradient
/// steps on `½‖y − A(D(ẑ0))‖²`. The projector is built once per step from
/// the DDIM state, and applied on inner iterations whose index is a multiple
/// of `cfg.freq`.
pub fn run_resample_style<R: Rng + ?Sized>(
    problem: &Problem<'_>,
    sched: &NoiseSchedule,
    cfg: &GuidanceConfig,
    rcfg: &ResampleConfig,
    rng: &mut R,
) -> Result<(Mat, Trajectory)> {
    cfg.validate()?;
    problem.validate()?;
    let steps = sched.steps();
    rcfg.validate(steps)?;
    let (rows, cols) = problem.prior.shape();
    let mut source = ProjectorSource::new(cfg);
    let mut traj = Trajectory::default();
    let mut z = Mat::randn(rows, cols, rng);

    for t in (0..steps).rev() {
        let step = steps - 1 - t;
        let z0 = problem.prior.tweedie_denoise(&z, t + 1, sched);
        let (a, b) = sched.marginal_scales(t + 1);
        let eps_hat = z.axpy(-a, &z0).scale(1.0 / b);
        let z_prime = ddim_step(&z0, &eps_hat, t, rcfg.ddim_eta, rcfg.ddim_delta, sched, rng)?;

        let mut record = StepRecord {
            step,
            t,
            grad_norm: 0.0,
            proj_grad_norm: 0.0,
            rank: 0,
            state_rmse_to_truth: problem.rmse_to_truth(&z0)?,
            mode_distance: problem.prior.nearest_mode_distance(&z0),
            state: Mat::zeros(0, 0),
        };

        z = if rcfg.resample_steps.contains(&t) {
            let fixed = if source.enabled() && !source.gradient_driven() {
                source.build(&z_prime, &z_prime)?
            } else {
                None
            };
            let mut z0y = z0;
            for it in 0..rcfg.gd_iters {
                let g = problem.latent_data_grad(&z0y)?;
                let projector = if it % cfg.freq != 0 {
                    None
                } else if source.gradient_driven() {
                    source.build(&z_prime, &g)?
                } else {
                    fixed.clone()
                };
                let (applied, rank) = match &projector {
                    Some(p) => (p.project(&g)?, p.rank()),
                    None => (g.clone(), 0),
                };
                if it == 0 {
                    record.grad_norm = g.norm();
                    record.proj_grad_norm = applied.norm();
                    record.rank = rank;
                }
                z0y.add_scaled_inplace(-rcfg.gd_lr, &applied);
                check_divergence(&z0y, step)?;
            }
            stochastic_resample(&z0y, &z_prime, t, rcfg.gamma, sched, rng)?
        } else {
            z_prime
        };
        check_divergence(&z, step)?;
        record.state = z.clone();
        traj.push(record);
    }
    Ok((problem.ae.decode(&z)?, traj))
}
