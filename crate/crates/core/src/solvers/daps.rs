use rand::Rng;

use super::{check_divergence, GuidanceConfig, Problem, ProjectorSource, StepRecord, Trajectory};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::prior::GmmPrior;

/// Default number of Euler steps of the probability-flow ODE.
pub const PF_ODE_STEPS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct DapsConfig {
    /// Strictly decreasing positive noise levels; sampling ends at 0.
    pub sigmas: Vec<f64>,
    pub langevin_iters: usize,
    /// Langevin step at level `i` is `langevin_lr / (1/r_i² + 1/σ_y²)`.
    pub langevin_lr: f64,
    /// Gaussian prior-proximity radius per level.
    pub radii: Vec<f64>,
    /// Likelihood noise level `σ_y`.
    pub likelihood_sigma: f64,
    pub ode_steps: usize,
}

impl DapsConfig {
    /// Geometric levels from `sigma_max` to `sigma_min` with radii `σ/√(1+σ²)`.
    pub fn geometric(
        sigma_max: f64,
        sigma_min: f64,
        levels: usize,
        langevin_iters: usize,
        langevin_lr: f64,
        likelihood_sigma: f64,
    ) -> Result<Self> {
        if !(sigma_max > sigma_min && sigma_min > 0.0) || levels < 2 {
            return Err(Error::InvalidParam(
                "need sigma_max > sigma_min > 0 and at least two levels".into(),
            ));
        }
        let ratio = (sigma_min / sigma_max).ln() / (levels - 1) as f64;
        let sigmas: Vec<f64> = (0..levels).map(|i| sigma_max * (ratio * i as f64).exp()).collect();
        let radii = sigmas.iter().map(|s| default_radius(*s)).collect();
        Ok(Self {
            sigmas,
            langevin_iters,
            langevin_lr,
            radii,
            likelihood_sigma,
            ode_steps: PF_ODE_STEPS,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.sigmas.is_empty() || self.sigmas.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidParam("noise levels must be positive".into()));
        }
        if self.sigmas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidParam("noise levels must be strictly decreasing".into()));
        }
        if self.radii.len() != self.sigmas.len() || self.radii.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::InvalidParam("need one positive radius per level".into()));
        }
        if !(self.likelihood_sigma > 0.0) || !(self.langevin_lr >= 0.0) || self.ode_steps == 0 {
            return Err(Error::InvalidParam(
                "likelihood sigma must be positive, lr nonnegative, ode steps >= 1".into(),
            ));
        }
        Ok(())
    }
}

pub fn default_radius(sigma: f64) -> f64 {
    sigma / (1.0 + sigma * sigma).sqrt()
}

/// Clean estimate by Euler integration of `dx/dσ = −σ ∇log p_σ(x)` from
/// `sigma` down to 0 in `steps` uniform steps.
pub fn pf_ode_denoise(prior: &GmmPrior, x: &Mat, sigma: f64, steps: usize) -> Mat {
    let h = sigma / steps as f64;
    let mut out = x.clone();
    for k in 0..steps {
        let s = sigma - k as f64 * h;
        let score = prior.score_ve(&out, s);
        out.add_scaled_inplace(h * s, &score);
    }
    out
}

/// Annealed sampling: at each level, denoise by the probability-flow ODE,
/// run Langevin dynamics on `p(x0 | x_σ, y)` with the projected drift, then
/// renoise to the next level.
///
/// The projector is built once per level from the ODE estimate.
pub fn run_daps_style<R: Rng + ?Sized>(
    problem: &Problem<'_>,
    cfg: &GuidanceConfig,
    dcfg: &DapsConfig,
    rng: &mut R,
) -> Result<(Mat, Trajectory)> {
    cfg.validate()?;
    dcfg.validate()?;
    problem.validate()?;
    let (rows, cols) = problem.prior.shape();
    let mut source = ProjectorSource::new(cfg);
    let mut traj = Trajectory::default();
    let inv_var_y = 1.0 / (dcfg.likelihood_sigma * dcfg.likelihood_sigma);
    let mut x = Mat::randn(rows, cols, rng).scale(dcfg.sigmas[0]);
    let levels = dcfg.sigmas.len();

    for (i, &sigma) in dcfg.sigmas.iter().enumerate() {
        let x0 = pf_ode_denoise(problem.prior, &x, sigma, dcfg.ode_steps);
        let r = dcfg.radii[i];
        let lr = dcfg.langevin_lr / (1.0 / (r * r) + inv_var_y);
        let fixed = if source.enabled() && !source.gradient_driven() {
            source.build(&x0, &x0)?
        } else {
            None
        };

        let mut record = StepRecord {
            step: i,
            t: levels - i,
            grad_norm: 0.0,
            proj_grad_norm: 0.0,
            rank: 0,
            state_rmse_to_truth: problem.rmse_to_truth(&x0)?,
            mode_distance: problem.prior.nearest_mode_distance(&x0),
            state: Mat::zeros(0, 0),
        };
        let mut xj = x0.clone();
        for j in 0..dcfg.langevin_iters {
            let mut g = (&x0 - &xj).scale(1.0 / (r * r));
            g.add_scaled_inplace(-inv_var_y, &problem.latent_data_grad(&xj)?);
            let projector = if source.gradient_driven() {
                source.build(&x0, &g)?
            } else {
                fixed.clone()
            };
            let (applied, rank) = match &projector {
                Some(p) => (p.project(&g)?, p.rank()),
                None => (g.clone(), 0),
            };
            if j == 0 {
                record.grad_norm = g.norm();
                record.proj_grad_norm = applied.norm();
                record.rank = rank;
            }
            let eps = Mat::randn(rows, cols, rng);
            xj.add_scaled_inplace(lr, &applied);
            xj.add_scaled_inplace((2.0 * lr).sqrt(), &eps);
            check_divergence(&xj, i)?;
        }

        x = match dcfg.sigmas.get(i + 1) {
            Some(&next) => xj.axpy(next, &Mat::randn(rows, cols, rng)),
            None => xj,
        };
        check_divergence(&x, i)?;
        record.state = x.clone();
        traj.push(record);
    }
    Ok((problem.ae.decode(&x)?, traj))
}
