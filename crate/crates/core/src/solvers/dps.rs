use rand::Rng;

use super::{check_divergence, GuidanceConfig, Problem, ProjectorSource, StepRecord, StepSize, Trajectory};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::operators::OperatorKind;
use crate::schedule::{ancestral_step, NoiseSchedule};

/// Guided ancestral sampling: `z_{t−1} = z'_{t−1} − η_t P(g_t)` with `g_t`
/// the gradient of `½‖y − A(D(ẑ0(z_t)))‖²` taken through the exact Tweedie
/// denoiser, and `P` rebuilt from `z_t` on steps that are multiples of `freq`.
///
/// Returns the decoded final state and the per-step trajectory.
pub fn run_dps<R: Rng + ?Sized>(
    problem: &Problem<'_>,
    sched: &NoiseSchedule,
    cfg: &GuidanceConfig,
    rng: &mut R,
) -> Result<(Mat, Trajectory)> {
    guided_ancestral(problem, sched, cfg, None, cfg.freq, rng)
}

/// PSLD-style sampling: the measurement gradient plus a gluing term
/// `γ_t ∇ ½‖ẑ0 − E(Aᵀy + (I − AᵀA) D(ẑ0))‖²`, projected every step.
///
/// The gluing term needs `AᵀA x0` which is only recoverable as `Aᵀy` for
/// masks; blur and downsampling run with the gluing term off. Nonlinear
/// operators are rejected.
pub fn run_psld_style<R: Rng + ?Sized>(
    problem: &Problem<'_>,
    sched: &NoiseSchedule,
    cfg: &GuidanceConfig,
    gluing_weight: &StepSize,
    rng: &mut R,
) -> Result<(Mat, Trajectory)> {
    let kind = problem.op.kind();
    if !kind.is_linear() {
        return Err(Error::InvalidParam(format!(
            "PSLD-style sampling needs a linear operator, got {}",
            kind.name()
        )));
    }
    let gluing = match kind {
        OperatorKind::BoxMask | OperatorKind::RandomMask => Some(gluing_weight),
        _ => None,
    };
    guided_ancestral(problem, sched, cfg, gluing, 1, rng)
}

/// Gradient of `½‖ẑ0 − E(Aᵀy + (I − AᵀA) D ẑ0)‖²` with respect to `ẑ0`,
/// for mask operators (`AᵀA = diag(mask)`).
pub(crate) fn gluing_grad(problem: &Problem<'_>, z0: &Mat) -> Result<Mat> {
    let mask = problem
        .op
        .mask()
        .ok_or_else(|| Error::InvalidParam("gluing needs a mask operator".into()))?;
    let decoded = problem.ae.decode(z0)?;
    let aty = problem.op.adjoint(problem.y)?;
    let keep = mask.map(|m| 1.0 - m);
    let glued = &aty + &decoded.hadamard(&keep);
    let w = z0 - &problem.ae.encode(&glued)?;
    // ∂/∂ẑ0 = w − Dᵀ (I − AᵀA) Eᵀ w
    let back = problem
        .ae
        .decode_adjoint(&problem.ae.encode_adjoint(&w)?.hadamard(&keep))?;
    Ok(&w - &back)
}

fn guided_ancestral<R: Rng + ?Sized>(
    problem: &Problem<'_>,
    sched: &NoiseSchedule,
    cfg: &GuidanceConfig,
    gluing: Option<&StepSize>,
    freq: usize,
    rng: &mut R,
) -> Result<(Mat, Trajectory)> {
    cfg.validate()?;
    problem.validate()?;
    let (rows, cols) = problem.prior.shape();
    let steps = sched.steps();
    let mut source = ProjectorSource::new(cfg);
    let mut traj = Trajectory::default();
    let mut z = Mat::randn(rows, cols, rng);

    for t in (1..=steps).rev() {
        let step = steps - t;
        let z0 = problem.prior.tweedie_denoise(&z, t, sched);
        let eta = cfg.step_size.at(step);
        let mut inner = problem.latent_data_grad(&z0)?.scale(eta);
        if let Some(gamma) = gluing {
            let weight = gamma.at(step);
            if weight != 0.0 {
                inner.add_scaled_inplace(weight, &gluing_grad(problem, &z0)?);
            }
        }
        let g = problem.prior.tweedie_vjp(&z, t, sched, &inner);
        let z_prime = ancestral_step(&z, &z0, t, sched, rng)?;

        let projector = if source.enabled() && step % freq == 0 {
            source.build(&z, &g)?
        } else {
            None
        };
        let (applied, rank) = match &projector {
            Some(p) => (p.project(&g)?, p.rank()),
            None => (g.clone(), 0),
        };
        z = &z_prime - &applied;
        check_divergence(&z, step)?;
        traj.push(StepRecord {
            step,
            t,
            grad_norm: g.norm(),
            proj_grad_norm: applied.norm(),
            rank,
            state_rmse_to_truth: problem.rmse_to_truth(&z0)?,
            mode_distance: problem.prior.nearest_mode_distance(&z0),
            state: z.clone(),
        });
    }
    Ok((problem.ae.decode(&z)?, traj))
}
