//! Gaussian-mixture priors with exact noised scores.
//!
//! A state `x = a·x0 + b·n` with `x0 ~ Σ_i w_i N(μ_i, Σ_i)` and `n ~ N(0, I)` is
//! again a mixture, `Σ_i w_i N(a μ_i, a² Σ_i + b² I)`. The VP marginal at step
//! `t` uses `(a, b) = (√ᾱ_t, √(1−ᾱ_t))`, the variance-exploding form used by
//! the annealed sampler uses `(1, σ)`. Everything here is closed form.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{psd_eigen, text, Cholesky, Mat};
use crate::schedule::NoiseSchedule;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone)]
pub enum Covariance {
    /// `c · I`.
    Scalar(f64),
    /// Full symmetric PSD matrix with its eigendecomposition.
    Full {
        matrix: Mat,
        eigvecs: Mat,
        eigvals: Vec<f64>,
    },
}

impl Covariance {
    pub fn full(matrix: Mat) -> Result<Self> {
        let sym = matrix.symmetrize();
        let (eigvecs, eigvals) = psd_eigen(&sym)?;
        Ok(Self::Full {
            matrix: sym,
            eigvecs,
            eigvals,
        })
    }

    pub fn trace(&self, dim: usize) -> f64 {
        match self {
            Self::Scalar(c) => c * dim as f64,
            Self::Full { matrix, .. } => matrix.trace(),
        }
    }

    pub fn to_matrix(&self, dim: usize) -> Mat {
        match self {
            Self::Scalar(c) => Mat::identity(dim).scale(*c),
            Self::Full { matrix, .. } => matrix.clone(),
        }
    }

    /// `(a² Σ + b² I)^{-1} v` and `log det(a² Σ + b² I)`.
    fn noised_solve(&self, a: f64, b: f64, v: &[f64]) -> (Vec<f64>, f64) {
        let (a2, b2) = (a * a, b * b);
        match self {
            Self::Scalar(c) => {
                let d = a2 * c + b2;
                (v.iter().map(|x| x / d).collect(), v.len() as f64 * d.ln())
            }
            Self::Full { eigvecs, eigvals, .. } => {
                let coeff = eigvecs.t_matvec(v);
                let mut logdet = 0.0;
                let scaled: Vec<f64> = coeff
                    .iter()
                    .zip(eigvals)
                    .map(|(c, l)| {
                        let d = a2 * l + b2;
                        logdet += d.ln();
                        c / d
                    })
                    .collect();
                (eigvecs.matvec(&scaled), logdet)
            }
        }
    }

    /// `Σ v`.
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Self::Scalar(c) => v.iter().map(|x| c * x).collect(),
            Self::Full { matrix, .. } => matrix.matvec(v),
        }
    }

    /// `Σ^{1/2} z`.
    fn sqrt_apply(&self, z: &[f64]) -> Vec<f64> {
        match self {
            Self::Scalar(c) => z.iter().map(|x| c.sqrt() * x).collect(),
            Self::Full { eigvecs, eigvals, .. } => {
                let scaled: Vec<f64> = z.iter().zip(eigvals).map(|(x, l)| x * l.max(0.0).sqrt()).collect();
                eigvecs.matvec(&scaled)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Component {
    pub weight: f64,
    /// Mean in state (matrix) form.
    pub mean: Mat,
    pub cov: Covariance,
}

/// Gaussian mixture over matrix-shaped states.
#[derive(Debug, Clone)]
pub struct GmmPrior {
    components: Vec<Component>,
    shape: (usize, usize),
}

/// Conditioned mixture; same representation as the prior.
pub type PosteriorGmm = GmmPrior;

/// Per-component quantities at a noised state.
struct Local {
    resp: Vec<f64>,
    /// `−(a²Σ_i + b²I)^{-1}(x − a μ_i)` for each component (empty for zero weight).
    scores: Vec<Vec<f64>>,
    log_density: f64,
}

impl GmmPrior {
    pub fn new(components: Vec<Component>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidParam("mixture needs at least one component".into()))?;
        let shape = first.mean.shape();
        let dim = shape.0 * shape.1;
        let mut total = 0.0;
        for (i, c) in components.iter().enumerate() {
            c.mean.ensure_shape(shape)?;
            c.mean.check_finite()?;
            if !(c.weight >= 0.0 && c.weight.is_finite()) {
                return Err(Error::InvalidParam(format!("component {i}: bad weight")));
            }
            total += c.weight;
            match &c.cov {
                Covariance::Scalar(v) if !(*v >= 0.0 && v.is_finite()) => {
                    return Err(Error::InvalidParam(format!("component {i}: bad variance")));
                }
                Covariance::Full { matrix, eigvals, .. } => {
                    matrix.ensure_shape((dim, dim))?;
                    let top = eigvals.first().copied().unwrap_or(0.0);
                    if eigvals.iter().any(|l| *l < -1e-10 * top.max(1.0)) {
                        return Err(Error::InvalidParam(format!("component {i}: covariance is not PSD")));
                    }
                }
                _ => {}
            }
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParam(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { components, shape })
    }

    /// Builds from unnormalized weights.
    pub fn normalized(mut components: Vec<Component>) -> Result<Self> {
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if !(total > 0.0) {
            return Err(Error::InvalidParam("weights must have positive sum".into()));
        }
        components.iter_mut().for_each(|c| c.weight /= total);
        Self::new(components)
    }

    /// Single Gaussian `N(mean, var · I)`.
    pub fn gaussian(mean: Mat, var: f64) -> Result<Self> {
        Self::new(vec![Component {
            weight: 1.0,
            mean,
            cov: Covariance::Scalar(var),
        }])
    }

    /// Equal-weight mixture of random rank-`rank` means with entry RMS
    /// `mean_rms` and isotropic variance `var`.
    pub fn random_low_rank<R: Rng + ?Sized>(
        rows: usize,
        cols: usize,
        components: usize,
        rank: usize,
        mean_rms: f64,
        var: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if components == 0 || rank == 0 {
            return Err(Error::InvalidParam("need at least one component and rank >= 1".into()));
        }
        let comps = (0..components)
            .map(|_| {
                let left = Mat::randn(rows, rank, rng);
                let right = Mat::randn(cols, rank, rng);
                let m = left.matmul_t(&right).expect("conforming factors");
                let rms = (m.norm_sq() / m.len() as f64).sqrt();
                Component {
                    weight: 1.0 / components as f64,
                    mean: m.scale(mean_rms / rms),
                    cov: Covariance::Scalar(var),
                }
            })
            .collect();
        Self::normalized(comps)
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.shape.0 * self.shape.1
    }

    fn local(&self, x: &Mat, a: f64, b: f64) -> Local {
        let dim = self.dim();
        let mut logs = Vec::with_capacity(self.components.len());
        let mut scores = Vec::with_capacity(self.components.len());
        for c in &self.components {
            if c.weight == 0.0 {
                logs.push(f64::NEG_INFINITY);
                scores.push(Vec::new());
                continue;
            }
            let diff: Vec<f64> = x
                .as_slice()
                .iter()
                .zip(c.mean.as_slice())
                .map(|(xv, m)| xv - a * m)
                .collect();
            let (solved, logdet) = c.cov.noised_solve(a, b, &diff);
            let quad: f64 = diff.iter().zip(&solved).map(|(d, s)| d * s).sum();
            logs.push(c.weight.ln() - 0.5 * (quad + logdet + dim as f64 * LN_2PI));
            scores.push(solved.into_iter().map(|s| -s).collect());
        }
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let unnorm: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let z: f64 = unnorm.iter().sum();
        Local {
            resp: unnorm.iter().map(|u| u / z).collect(),
            scores,
            log_density: top + z.ln(),
        }
    }

    /// `log p(x)` for `x = a·x0 + b·n`.
    pub fn log_density_scaled(&self, x: &Mat, a: f64, b: f64) -> f64 {
        self.local(x, a, b).log_density
    }

    /// `∇_x log p(x)` for `x = a·x0 + b·n`.
    pub fn score_scaled(&self, x: &Mat, a: f64, b: f64) -> Mat {
        let loc = self.local(x, a, b);
        self.mix_scores(&loc)
    }

    fn mix_scores(&self, loc: &Local) -> Mat {
        let mut out = vec![0.0; self.dim()];
        for (r, s) in loc.resp.iter().zip(&loc.scores) {
            if *r == 0.0 {
                continue;
            }
            out.iter_mut().zip(s).for_each(|(o, v)| *o += r * v);
        }
        Mat::from_vec(self.shape.0, self.shape.1, out).expect("dim matches shape")
    }

    /// Hessian of `log p` at `x` applied to `v`.
    ///
    /// `H = Σ r_i (−C_i^{-1} + s_i s_iᵀ) − s̄ s̄ᵀ` with `C_i = a²Σ_i + b²I`.
    pub fn hessian_vec_scaled(&self, x: &Mat, a: f64, b: f64, v: &Mat) -> Mat {
        let loc = self.local(x, a, b);
        let mean_score = self.mix_scores(&loc);
        let vs = v.as_slice();
        let mut out = vec![0.0; self.dim()];
        for ((c, r), s) in self.components.iter().zip(&loc.resp).zip(&loc.scores) {
            if *r == 0.0 {
                continue;
            }
            let (cinv_v, _) = c.cov.noised_solve(a, b, vs);
            let sv: f64 = s.iter().zip(vs).map(|(p, q)| p * q).sum();
            for k in 0..out.len() {
                out[k] += r * (-cinv_v[k] + s[k] * sv);
            }
        }
        let mv = mean_score.dot(v);
        for (o, m) in out.iter_mut().zip(mean_score.as_slice()) {
            *o -= m * mv;
        }
        Mat::from_vec(self.shape.0, self.shape.1, out).expect("dim matches shape")
    }

    /// `E[x0 | x]` for `x = a·x0 + b·n`, from per-component conditional means.
    pub fn posterior_mean_scaled(&self, x: &Mat, a: f64, b: f64) -> Mat {
        let loc = self.local(x, a, b);
        let mut out = vec![0.0; self.dim()];
        for ((c, r), s) in self.components.iter().zip(&loc.resp).zip(&loc.scores) {
            if *r == 0.0 {
                continue;
            }
            // μ_i + a Σ_i C_i^{-1}(x − a μ_i) = μ_i − a Σ_i s_i
            let sig_s = c.cov.apply(s);
            for (k, o) in out.iter_mut().enumerate() {
                *o += r * (c.mean.as_slice()[k] - a * sig_s[k]);
            }
        }
        Mat::from_vec(self.shape.0, self.shape.1, out).expect("dim matches shape")
    }

    /// Exact score of the VP marginal at step `t`.
    pub fn score(&self, x: &Mat, t: usize, sched: &NoiseSchedule) -> Mat {
        let (a, b) = sched.marginal_scales(t);
        self.score_scaled(x, a, b)
    }

    /// Tweedie denoiser `(x_t + (1−ᾱ_t) ∇log p_t(x_t)) / √ᾱ_t`.
    pub fn tweedie_denoise(&self, x_t: &Mat, t: usize, sched: &NoiseSchedule) -> Mat {
        let ab = sched.alpha_bar(t);
        if ab == 1.0 {
            return x_t.clone();
        }
        let s = self.score(x_t, t, sched);
        x_t.axpy(1.0 - ab, &s).scale(1.0 / ab.sqrt())
    }

    /// Transposed Jacobian of the Tweedie denoiser applied to `v`.
    ///
    /// The Jacobian `(I + (1−ᾱ_t) H)/√ᾱ_t` is symmetric.
    pub fn tweedie_vjp(&self, x_t: &Mat, t: usize, sched: &NoiseSchedule, v: &Mat) -> Mat {
        let ab = sched.alpha_bar(t);
        if ab == 1.0 {
            return v.clone();
        }
        let (a, b) = sched.marginal_scales(t);
        let hv = self.hessian_vec_scaled(x_t, a, b, v);
        v.axpy(1.0 - ab, &hv).scale(1.0 / a)
    }

    /// Score of the variance-exploding marginal `x0 + σ n`.
    pub fn score_ve(&self, x: &Mat, sigma: f64) -> Mat {
        self.score_scaled(x, 1.0, sigma)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Mat {
        self.sample_with_component(rng).0
    }

    /// Draws a component by weight, then a Gaussian sample from it.
    pub fn sample_with_component<R: Rng + ?Sized>(&self, rng: &mut R) -> (Mat, usize) {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut idx = self.components.len() - 1;
        for (i, c) in self.components.iter().enumerate() {
            acc += c.weight;
            if u < acc && c.weight > 0.0 {
                idx = i;
                break;
            }
        }
        let c = &self.components[idx];
        let z: Vec<f64> = (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect();
        let noise = c.cov.sqrt_apply(&z);
        let data = c.mean.as_slice().iter().zip(&noise).map(|(m, n)| m + n).collect();
        (
            Mat::from_vec(self.shape.0, self.shape.1, data).expect("dim matches shape"),
            idx,
        )
    }

    /// Mixture mean `Σ w_i μ_i`.
    pub fn mean(&self) -> Mat {
        let mut out = Mat::zeros(self.shape.0, self.shape.1);
        for c in &self.components {
            out.add_scaled_inplace(c.weight, &c.mean);
        }
        out
    }

    /// Trace of the mixture covariance.
    pub fn cov_trace(&self) -> f64 {
        let mean = self.mean();
        let second: f64 = self
            .components
            .iter()
            .map(|c| c.weight * (c.cov.trace(self.dim()) + c.mean.norm_sq()))
            .sum();
        second - mean.norm_sq()
    }

    /// RMS distance from `x` to the nearest component mean.
    pub fn nearest_mode_distance(&self, x: &Mat) -> f64 {
        let d = self
            .components
            .iter()
            .map(|c| (x - &c.mean).norm_sq())
            .fold(f64::INFINITY, f64::min);
        (d / self.dim() as f64).sqrt()
    }

    /// Serializes a mixture with scalar covariances.
    pub fn to_text(&self) -> Result<String> {
        let mut out = format!("gmm {} {} {}\n", self.components.len(), self.shape.0, self.shape.1);
        for (i, c) in self.components.iter().enumerate() {
            let Covariance::Scalar(v) = c.cov else {
                return Err(Error::InvalidParam(format!(
                    "component {i}: only scalar covariances serialize"
                )));
            };
            out.push_str(&format!("component {} {}\n", text::fmt_f64(c.weight), text::fmt_f64(v)));
            out.push_str(&text::write_matrix(&c.mean));
        }
        Ok(out)
    }

    pub fn from_text(src: &str) -> Result<Self> {
        let mut lines = src.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty prior".into()))?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        let ["gmm", k, _, _] = toks[..] else {
            return Err(Error::Parse(format!("bad prior header {header:?}")));
        };
        let k: usize = k.parse().map_err(|e| Error::Parse(format!("component count: {e}")))?;
        let mut comps = Vec::with_capacity(k);
        for i in 0..k {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing component {i}")))?;
            let toks: Vec<&str> = line.split_whitespace().collect();
            let ["component", w, v] = toks[..] else {
                return Err(Error::Parse(format!("bad component line {line:?}")));
            };
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("component {i}: {e}")))
            };
            let weight = parse(w)?;
            let var = parse(v)?;
            let mean = text::read_matrix_lines(&mut lines)?;
            comps.push(Component {
                weight,
                mean,
                cov: Covariance::Scalar(var),
            });
        }
        Self::new(comps)
    }
}

/// Conditions every component on `y = A vec(x) + σ n` and reweights by evidence.
///
/// `a` is the `m x d` operator matrix acting on row-major flattened states.
pub fn exact_linear_posterior(prior: &GmmPrior, a: &Mat, y: &[f64], noise_sigma: f64) -> Result<PosteriorGmm> {
    let dim = prior.dim();
    if a.cols() != dim || a.rows() != y.len() {
        return Err(Error::Shape {
            expected: (y.len(), dim),
            got: a.shape(),
        });
    }
    if !(noise_sigma > 0.0) {
        return Err(Error::InvalidParam("noise_sigma must be positive".into()));
    }
    let m = a.rows();
    let mut comps = Vec::with_capacity(prior.components().len());
    let mut log_weights = Vec::with_capacity(prior.components().len());
    for (i, c) in prior.components().iter().enumerate() {
        let sigma = c.cov.to_matrix(dim);
        // S = A Σ Aᵀ + σ² I
        let sig_at = sigma.matmul_t(a)?;
        let mut s = a.matmul(&sig_at)?;
        for k in 0..m {
            s[(k, k)] += noise_sigma * noise_sigma;
        }
        let chol = Cholesky::new(&s.symmetrize()).map_err(|_| Error::SingularUpdate { component: i })?;
        let resid: Vec<f64> = a
            .matvec(c.mean.as_slice())
            .iter()
            .zip(y)
            .map(|(p, yv)| yv - p)
            .collect();
        let white = chol.solve_lower(&resid);
        let quad: f64 = white.iter().map(|w| w * w).sum();
        let log_ev = -0.5 * (quad + chol.log_det() + m as f64 * LN_2PI);
        // Gain K = Σ Aᵀ S^{-1}
        let gain = chol.solve_mat(&sig_at.transpose()).transpose();
        let shift = gain.matvec(&resid);
        let mean_data: Vec<f64> = c.mean.as_slice().iter().zip(&shift).map(|(mu, d)| mu + d).collect();
        let cov = &sigma - &gain.matmul(&sig_at.transpose())?;
        if !cov.is_finite() || mean_data.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularUpdate { component: i });
        }
        log_weights.push(if c.weight > 0.0 {
            c.weight.ln() + log_ev
        } else {
            f64::NEG_INFINITY
        });
        comps.push(Component {
            weight: 0.0,
            mean: Mat::from_vec(prior.shape().0, prior.shape().1, mean_data)?,
            cov: Covariance::full(cov)?,
        });
    }
    let top = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let unnorm: Vec<f64> = log_weights.iter().map(|l| (l - top).exp()).collect();
    let z: f64 = unnorm.iter().sum();
    for (c, u) in comps.iter_mut().zip(&unnorm) {
        c.weight = u / z;
    }
    // Renormalize exactly so the sum check holds to rounding.
    GmmPrior::normalized(comps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{add_noise, make_vp_schedule};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_symmetric(shape: (usize, usize), offset: f64, var: f64) -> GmmPrior {
        let m = Mat::filled(shape.0, shape.1, offset);
        GmmPrior::new(vec![
            Component {
                weight: 0.5,
                mean: m.clone(),
                cov: Covariance::Scalar(var),
            },
            Component {
                weight: 0.5,
                mean: m.scale(-1.0),
                cov: Covariance::Scalar(var),
            },
        ])
        .unwrap()
    }

    #[test]
    fn gaussian_score_closed_form() {
        let s = make_vp_schedule(50, 1e-3, 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mu = Mat::randn(3, 3, &mut rng);
        let prior = GmmPrior::gaussian(mu.clone(), 1.0).unwrap();
        let x = Mat::randn(3, 3, &mut rng);
        let t = 17;
        let a = s.alpha_bar(t).sqrt();
        let expect = (&x - &mu.scale(a)).scale(-1.0);
        assert!((&prior.score(&x, t, &s) - &expect).max_abs() < 1e-12);
        assert!(prior.score(&mu.scale(a), t, &s).max_abs() < 1e-12);
    }

    #[test]
    fn tweedie_limits_and_symmetry() {
        let s = make_vp_schedule(50, 1e-3, 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let prior = two_symmetric((2, 2), 1.0, 0.1);
        let x = Mat::randn(2, 2, &mut rng);
        assert_eq!(prior.tweedie_denoise(&x, 0, &s), x);
        assert!(prior.tweedie_denoise(&Mat::zeros(2, 2), 30, &s).max_abs() < 1e-14);
    }

    #[test]
    fn tweedie_inverts_noising_for_point_mass_limit() {
        // Vanishing prior variance: the denoiser recovers x0 from add_noise.
        let s = make_vp_schedule(50, 1e-3, 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x0 = Mat::randn(3, 2, &mut rng);
        let prior = GmmPrior::gaussian(x0.clone(), 0.0).unwrap();
        let eps = Mat::randn(3, 2, &mut rng);
        let xt = add_noise(&x0, 25, &eps, &s).unwrap();
        assert!((&prior.tweedie_denoise(&xt, 25, &s) - &x0).max_abs() < 1e-6);
    }

    #[test]
    fn tweedie_matches_component_posterior_means() {
        let s = make_vp_schedule(40, 1e-3, 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let prior = GmmPrior::random_low_rank(4, 4, 3, 2, 0.5, 0.02, &mut rng).unwrap();
        for t in [1, 10, 25, 40] {
            let x = Mat::randn(4, 4, &mut rng);
            let (a, b) = s.marginal_scales(t);
            let direct = prior.posterior_mean_scaled(&x, a, b);
            assert!((&prior.tweedie_denoise(&x, t, &s) - &direct).max_abs() < 1e-10);
        }
    }

    #[test]
    fn hessian_matches_score_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let prior = GmmPrior::random_low_rank(3, 3, 3, 1, 0.6, 0.05, &mut rng).unwrap();
        let x = Mat::randn(3, 3, &mut rng).scale(0.5);
        let v = Mat::randn(3, 3, &mut rng);
        let (a, b) = (0.8, 0.6);
        let h = 1e-5;
        let fd =
            (&prior.score_scaled(&x.axpy(h, &v), a, b) - &prior.score_scaled(&x.axpy(-h, &v), a, b)).scale(0.5 / h);
        let hv = prior.hessian_vec_scaled(&x, a, b, &v);
        assert!(hv.rel_diff(&fd) < 1e-6, "{}", hv.rel_diff(&fd));
    }

    #[test]
    fn identity_measurement_posterior() {
        let prior = GmmPrior::gaussian(Mat::zeros(2, 2), 1.0).unwrap();
        let y = [1.0, -2.0, 0.5, 3.0];
        let post = exact_linear_posterior(&prior, &Mat::identity(4), &y, 1.0).unwrap();
        let c = &post.components()[0];
        for (m, yv) in c.mean.as_slice().iter().zip(&y) {
            assert!((m - yv / 2.0).abs() < 1e-14);
        }
        assert!((&c.cov.to_matrix(4) - &Mat::identity(4).scale(0.5)).max_abs() < 1e-14);

        let post = exact_linear_posterior(&prior, &Mat::identity(4), &y, 1e-4).unwrap();
        for (m, yv) in post.components()[0].mean.as_slice().iter().zip(&y) {
            assert!((m - yv).abs() < 1e-7);
        }
    }

    #[test]
    fn evidence_selects_consistent_component() {
        let prior = two_symmetric((2, 2), 1.0, 0.01);
        let y = [1.0, 1.0, 1.0, 1.0];
        let post = exact_linear_posterior(&prior, &Mat::identity(4), &y, 0.3).unwrap();
        assert!(post.components()[0].weight >= 0.99);
        let sum: f64 = post.components().iter().map(|c| c.weight).sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_update_is_reported() {
        // Zero prior covariance and a vanishing noise floor leave S singular.
        let prior = GmmPrior::gaussian(Mat::zeros(1, 2), 0.0).unwrap();
        let err = exact_linear_posterior(&prior, &Mat::identity(2), &[0.0, 0.0], 1e-300);
        assert!(matches!(err, Err(Error::SingularUpdate { component: 0 })));
    }

    #[test]
    fn sampling_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mean = Mat::from_fn(2, 2, |i, j| (i * 2 + j) as f64);
        let point = GmmPrior::gaussian(mean.clone(), 0.0).unwrap();
        assert_eq!(point.sample(&mut rng), mean);

        let mut comps = two_symmetric((2, 2), 1.0, 0.1).components().to_vec();
        comps[0].weight = 1.0;
        comps[1].weight = 0.0;
        let lopsided = GmmPrior::new(comps).unwrap();
        assert!((0..200).all(|_| lopsided.sample_with_component(&mut rng).1 == 0));
    }

    #[test]
    fn text_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let prior = GmmPrior::random_low_rank(3, 4, 2, 1, 0.5, 0.01, &mut rng).unwrap();
        let back = GmmPrior::from_text(&prior.to_text().unwrap()).unwrap();
        assert_eq!(back.components().len(), 2);
        for (a, b) in prior.components().iter().zip(back.components()) {
            assert_eq!(a.mean, b.mean);
            assert_eq!(a.weight, b.weight);
        }
        assert!(GmmPrior::from_text("gmm 1 2 2\ncomponent 1 0\n2 2\n1 2\n").is_err());
    }

    #[test]
    fn weights_must_sum_to_one() {
        let bad = GmmPrior::new(vec![Component {
            weight: 0.5,
            mean: Mat::zeros(1, 1),
            cov: Covariance::Scalar(1.0),
        }]);
        assert!(bad.is_err());
    }
}
