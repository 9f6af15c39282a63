//! Diffusion-state subspace projection of guidance gradients.
//!
//! The state `Z` is factored as `U S Vᵀ`; the leading `r` singular pairs,
//! with `r` the smallest rank retaining a fraction `tau` of the squared
//! singular-value energy, define the projector
//! `G ↦ U_r U_rᵀ G V_r V_rᵀ`.

use serde::{Deserialize, Serialize};

use super::mat::Mat;
use super::svd::{svd, SvdFactors};
use crate::error::{Error, Result};

/// Which sides of the gradient are projected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMode {
    #[default]
    Full,
    Left,
    Right,
}

/// Smallest `k` (1-based) whose cumulative energy fraction reaches `tau`.
///
/// Energies are squared singular values. Ties at exactly `tau` select `k`.
pub fn select_rank(singular_values: &[f64], tau: f64) -> Result<usize> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidParam(format!("tau must be in (0, 1], got {tau}")));
    }
    if singular_values.is_empty() {
        return Err(Error::Empty);
    }
    if singular_values.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return Err(Error::InvalidParam(
            "singular values must be finite and nonnegative".into(),
        ));
    }
    if singular_values.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::InvalidParam("singular values must be nonincreasing".into()));
    }
    let energies: Vec<f64> = singular_values.iter().map(|s| s * s).collect();
    // Summed in the same order as the partial sums so the last one equals the total exactly.
    let total: f64 = energies.iter().fold(0.0, |acc, e| acc + e);
    if total == 0.0 {
        return Err(Error::ZeroSpectrum);
    }
    let mut partial = 0.0;
    for (k, e) in energies.iter().enumerate() {
        partial += e;
        if partial / total >= tau {
            return Ok(k + 1);
        }
    }
    Ok(energies.len())
}

/// Rank-`r` left/right bases of a diffusion state plus the settings that built it.
#[derive(Debug, Clone)]
pub struct StateProjector {
    u_r: Mat,
    v_r: Mat,
    rank: usize,
    tau: f64,
    freq: usize,
    mode: ProjectionMode,
}

impl StateProjector {
    /// Builds the projector from an already computed factorization.
    pub fn from_factors(factors: &SvdFactors, tau: f64, freq: usize) -> Result<Self> {
        if freq == 0 {
            return Err(Error::InvalidParam("projection frequency must be >= 1".into()));
        }
        let rank = select_rank(&factors.s, tau)?;
        Ok(Self {
            u_r: factors.u.leading_cols(rank),
            v_r: factors.v.leading_cols(rank),
            rank,
            tau,
            freq,
            mode: ProjectionMode::Full,
        })
    }

    /// Builds a projector from explicit orthonormal bases.
    pub fn from_bases(u_r: Mat, v_r: Mat) -> Result<Self> {
        if u_r.cols() != v_r.cols() || u_r.cols() == 0 {
            return Err(Error::InvalidParam("bases must have the same nonzero rank".into()));
        }
        let rank = u_r.cols();
        Ok(Self {
            u_r,
            v_r,
            rank,
            tau: 1.0,
            freq: 1,
            mode: ProjectionMode::Full,
        })
    }

    pub fn with_mode(mut self, mode: ProjectionMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn freq(&self) -> usize {
        self.freq
    }

    pub fn mode(&self) -> ProjectionMode {
        self.mode
    }

    pub fn left_basis(&self) -> &Mat {
        &self.u_r
    }

    pub fn right_basis(&self) -> &Mat {
        &self.v_r
    }

    pub fn state_shape(&self) -> (usize, usize) {
        (self.u_r.rows(), self.v_r.rows())
    }

    /// True when the projection is applied at this (0-based) step.
    pub fn active_at(&self, step: usize) -> bool {
        step % self.freq == 0
    }

    /// Projects `g` onto the state subspace according to the mode.
    pub fn project(&self, g: &Mat) -> Result<Mat> {
        g.ensure_shape(self.state_shape())?;
        let left = |m: &Mat| -> Mat {
            // U_r (U_rᵀ m)
            let coeff = self.u_r.t_matmul(m).expect("shape checked");
            self.u_r.matmul(&coeff).expect("shape checked")
        };
        let right = |m: &Mat| -> Mat {
            // (m V_r) V_rᵀ
            let coeff = m.matmul(&self.v_r).expect("shape checked");
            coeff.matmul_t(&self.v_r).expect("shape checked")
        };
        Ok(match self.mode {
            ProjectionMode::Full => right(&left(g)),
            ProjectionMode::Left => left(g),
            ProjectionMode::Right => right(g),
        })
    }
}

/// SVD of `state`, adaptive rank selection, leading singular vectors.
pub fn build_projector(state: &Mat, tau: f64, freq: usize) -> Result<StateProjector> {
    let factors = svd(state)?;
    StateProjector::from_factors(&factors, tau, freq)
}

pub fn project_gradient(g: &Mat, p: &StateProjector) -> Result<Mat> {
    p.project(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rank_examples() {
        assert_eq!(select_rank(&[2.0, 1.0, 1.0], 0.6).unwrap(), 1);
        assert_eq!(select_rank(&[2.0, 1.0, 1.0], 0.7).unwrap(), 2);
        assert_eq!(select_rank(&[3.0, 2.0, 0.0, 0.0], 1.0).unwrap(), 2);
        assert_eq!(select_rank(&[1.0, 0.0, 0.0], 0.5).unwrap(), 1);
        // c_1 = 0.5 exactly: ties select k.
        assert_eq!(select_rank(&[1.0, 1.0], 0.5).unwrap(), 1);
    }

    #[test]
    fn rank_errors() {
        assert!(matches!(select_rank(&[0.0, 0.0], 0.9), Err(Error::ZeroSpectrum)));
        assert!(select_rank(&[1.0, 2.0], 0.9).is_err());
        assert!(select_rank(&[1.0], 0.0).is_err());
        assert!(select_rank(&[1.0], 1.5).is_err());
    }

    #[test]
    fn projector_examples() {
        let u = [1.0, -2.0, 0.5];
        let v = [0.0, 3.0, 1.0, -1.0];
        let state = Mat::from_fn(3, 4, |i, j| u[i] * v[j]);
        let p = build_projector(&state, 0.9, 1).unwrap();
        assert_eq!(p.rank(), 1);
        let un = (u.iter().map(|x| x * x).sum::<f64>()).sqrt();
        let cos = (0..3).map(|i| p.left_basis()[(i, 0)] * u[i]).sum::<f64>() / un;
        assert!((cos.abs() - 1.0).abs() < 1e-12);

        assert_eq!(build_projector(&Mat::identity(4), 0.99, 1).unwrap().rank(), 4);
        assert_eq!(build_projector(&Mat::diag(&[10.0, 1.0]), 0.95, 1).unwrap().rank(), 1);
        assert!(matches!(
            build_projector(&Mat::zeros(3, 3), 0.9, 1),
            Err(Error::ZeroSpectrum)
        ));
    }

    #[test]
    fn fixed_point_and_annihilation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let state = Mat::randn(6, 5, &mut rng);
        let p = build_projector(&state, 0.7, 1).unwrap();
        let c = Mat::randn(p.rank(), p.rank(), &mut rng);
        let inside = p.left_basis().matmul(&c).unwrap().matmul_t(p.right_basis()).unwrap();
        assert!((&p.project(&inside).unwrap() - &inside).max_abs() < 1e-10);

        // Columns of g orthogonal to U_r.
        let raw = Mat::randn(6, 5, &mut rng);
        let coeff = p.left_basis().t_matmul(&raw).unwrap();
        let outside = &raw - &p.left_basis().matmul(&coeff).unwrap();
        assert!(p.project(&outside).unwrap().max_abs() < 1e-12);

        assert!(p.project(&Mat::zeros(5, 6)).is_err());
    }

    #[test]
    fn one_sided_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let state = Mat::randn(5, 5, &mut rng);
        let g = Mat::randn(5, 5, &mut rng);
        let p = build_projector(&state, 0.6, 1).unwrap();
        let full = p.project(&g).unwrap();
        let left = p.clone().with_mode(ProjectionMode::Left).project(&g).unwrap();
        let right = p.clone().with_mode(ProjectionMode::Right).project(&g).unwrap();
        let pr = p.clone().with_mode(ProjectionMode::Right);
        assert!((&pr.project(&left).unwrap() - &full).max_abs() < 1e-12);
        assert!(left.norm() <= g.norm() + 1e-12);
        assert!(right.norm() <= g.norm() + 1e-12);
    }
}
