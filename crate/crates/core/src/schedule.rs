//! Discrete variance-preserving noise schedule and reverse-step updates.
//!
//! Indices run `0..=T`; index 0 is the clean state with `ᾱ_0 = 1`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::Mat;

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    /// `β_1..β_T` stored at `beta[t - 1]`.
    beta: Vec<f64>,
    /// `ᾱ_0..ᾱ_T`.
    alpha_bar: Vec<f64>,
    /// `σ̃_1..σ̃_T` stored at `sigma_tilde[t - 1]`.
    sigma_tilde: Vec<f64>,
}

/// Linear β schedule from `beta_min` to `beta_max` over `steps` steps.
pub fn make_vp_schedule(steps: usize, beta_min: f64, beta_max: f64) -> Result<NoiseSchedule> {
    if steps < 2 {
        return Err(Error::InvalidParam(format!("schedule needs T >= 2, got {steps}")));
    }
    if !(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0) {
        return Err(Error::InvalidParam(format!(
            "need 0 < beta_min <= beta_max < 1, got [{beta_min}, {beta_max}]"
        )));
    }
    let beta: Vec<f64> = (0..steps)
        .map(|i| beta_min + (beta_max - beta_min) * i as f64 / (steps - 1) as f64)
        .collect();
    NoiseSchedule::from_betas(beta)
}

impl NoiseSchedule {
    pub fn from_betas(beta: Vec<f64>) -> Result<Self> {
        if beta.is_empty() || beta.iter().any(|b| !(*b > 0.0 && *b < 1.0)) {
            return Err(Error::InvalidParam("every beta must lie in (0, 1)".into()));
        }
        if beta.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidParam("betas must be nondecreasing".into()));
        }
        let mut alpha_bar = Vec::with_capacity(beta.len() + 1);
        alpha_bar.push(1.0);
        for b in &beta {
            let prev = *alpha_bar.last().expect("nonempty");
            alpha_bar.push(prev * (1.0 - b));
        }
        let sigma_tilde = beta
            .iter()
            .enumerate()
            .map(|(i, b)| (b * (1.0 - alpha_bar[i]) / (1.0 - alpha_bar[i + 1])).sqrt())
            .collect();
        Ok(Self {
            beta,
            alpha_bar,
            sigma_tilde,
        })
    }

    /// Number of diffusion steps `T`.
    pub fn steps(&self) -> usize {
        self.beta.len()
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t]
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bar
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.beta[t - 1]
    }

    pub fn sigma_tilde(&self, t: usize) -> f64 {
        self.sigma_tilde[t - 1]
    }

    pub fn check_index(&self, t: usize) -> Result<()> {
        if t > self.steps() {
            return Err(Error::IndexOutOfRange {
                index: t,
                max: self.steps(),
            });
        }
        Ok(())
    }

    /// Signal and noise scales `(√ᾱ_t, √(1−ᾱ_t))` of the marginal at `t`.
    pub fn marginal_scales(&self, t: usize) -> (f64, f64) {
        let ab = self.alpha_bar[t];
        (ab.sqrt(), (1.0 - ab).sqrt())
    }

    /// Posterior-mean coefficients `(c_z, c_x0)` of the ancestral step at `t ≥ 1`.
    pub fn ancestral_coefficients(&self, t: usize) -> (f64, f64) {
        let beta = self.beta(t);
        let alpha = 1.0 - beta;
        let ab_t = self.alpha_bar[t];
        let ab_prev = self.alpha_bar[t - 1];
        (
            alpha.sqrt() * (1.0 - ab_prev) / (1.0 - ab_t),
            ab_prev.sqrt() * beta / (1.0 - ab_t),
        )
    }
}

/// Forward marginal draw `√ᾱ_t x0 + √(1−ᾱ_t) eps`.
pub fn add_noise(x0: &Mat, t: usize, eps: &Mat, sched: &NoiseSchedule) -> Result<Mat> {
    sched.check_index(t)?;
    eps.ensure_shape(x0.shape())?;
    let (a, b) = sched.marginal_scales(t);
    Ok(x0.scale(a).axpy(b, eps))
}

/// DDIM update `√ᾱ_t ẑ0 + √(1−ᾱ_t−ηδ²) ε̂ + ηδ ε₁`.
///
/// `ε₁` is drawn from `rng` only when `ηδ ≠ 0`.
pub fn ddim_step<R: Rng + ?Sized>(
    z0_hat: &Mat,
    eps_hat: &Mat,
    t: usize,
    eta: f64,
    delta: f64,
    sched: &NoiseSchedule,
    rng: &mut R,
) -> Result<Mat> {
    sched.check_index(t)?;
    eps_hat.ensure_shape(z0_hat.shape())?;
    let ab = sched.alpha_bar(t);
    let radicand = 1.0 - ab - eta * delta * delta;
    if radicand < 0.0 {
        return Err(Error::NegativeRadicand(radicand));
    }
    let mut out = z0_hat.scale(ab.sqrt()).axpy(radicand.sqrt(), eps_hat);
    let noise_scale = eta * delta;
    if noise_scale != 0.0 {
        let eps1 = Mat::randn(out.rows(), out.cols(), rng);
        out.add_scaled_inplace(noise_scale, &eps1);
    }
    Ok(out)
}

/// Deterministic part of the ancestral step.
pub fn ancestral_mean(z_t: &Mat, z0_hat: &Mat, t: usize, sched: &NoiseSchedule) -> Result<Mat> {
    if t == 0 {
        return Err(Error::InvalidParam("ancestral step needs t >= 1".into()));
    }
    sched.check_index(t)?;
    z0_hat.ensure_shape(z_t.shape())?;
    let (cz, cx) = sched.ancestral_coefficients(t);
    Ok(z_t.scale(cz).axpy(cx, z0_hat))
}

/// DDPM ancestral step: posterior mean plus `σ̃_t ε`.
pub fn ancestral_step<R: Rng + ?Sized>(
    z_t: &Mat,
    z0_hat: &Mat,
    t: usize,
    sched: &NoiseSchedule,
    rng: &mut R,
) -> Result<Mat> {
    let mut out = ancestral_mean(z_t, z0_hat, t, sched)?;
    let eps = Mat::randn(z_t.rows(), z_t.cols(), rng);
    out.add_scaled_inplace(sched.sigma_tilde(t), &eps);
    Ok(out)
}
