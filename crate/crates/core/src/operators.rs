//! Measurement operators `y = A(x) + n` with exact data-fit gradients.

use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    BoxMask,
    RandomMask,
    GaussianBlur,
    Downsample,
    PhaseRetrieval,
    HdrClip,
}

impl OperatorKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::BoxMask => "box_mask",
            Self::RandomMask => "random_mask",
            Self::GaussianBlur => "gaussian_blur",
            Self::Downsample => "downsample",
            Self::PhaseRetrieval => "phase_retrieval",
            Self::HdrClip => "hdr_clip",
        }
    }

    pub fn is_linear(self) -> bool {
        !matches!(self, Self::PhaseRetrieval | Self::HdrClip)
    }
}

/// Operator description as it appears in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorSpec {
    pub kind: OperatorKind,
    /// Fraction of pixels observed by `random_mask`.
    pub keep_ratio: f64,
    /// Seed of the random mask pattern.
    pub mask_seed: u64,
    /// Box side as a fraction of the image side (`0.5` covers a quarter of the area).
    pub box_fraction: f64,
    pub kernel_size: usize,
    pub kernel_sigma: f64,
    pub factor: usize,
    pub oversampling: f64,
    pub scale: f64,
}

impl Default for OperatorSpec {
    fn default() -> Self {
        Self {
            kind: OperatorKind::RandomMask,
            keep_ratio: 0.3,
            mask_seed: 0,
            box_fraction: 0.5,
            kernel_size: 7,
            kernel_sigma: 1.0,
            factor: 2,
            oversampling: 2.0,
            scale: 2.0,
        }
    }
}

impl OperatorSpec {
    pub fn of_kind(kind: OperatorKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn build(&self, shape: (usize, usize)) -> Result<ForwardOperator> {
        match self.kind {
            OperatorKind::BoxMask => ForwardOperator::box_mask(shape, self.box_fraction),
            OperatorKind::RandomMask => {
                let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(self.mask_seed);
                ForwardOperator::random_mask(shape, self.keep_ratio, &mut rng)
            }
            OperatorKind::GaussianBlur => ForwardOperator::gaussian_blur(shape, self.kernel_size, self.kernel_sigma),
            OperatorKind::Downsample => ForwardOperator::downsample(shape, self.factor),
            OperatorKind::PhaseRetrieval => ForwardOperator::phase_retrieval(shape, self.oversampling),
            OperatorKind::HdrClip => ForwardOperator::hdr_clip(shape, self.scale),
        }
    }
}

#[derive(Clone)]
struct Fft2 {
    rows: usize,
    cols: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fft2({}x{})", self.rows, self.cols)
    }
}

impl Fft2 {
    fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            rows,
            cols,
            row_fwd: planner.plan_fft_forward(cols),
            row_inv: planner.plan_fft_inverse(cols),
            col_fwd: planner.plan_fft_forward(rows),
            col_inv: planner.plan_fft_inverse(rows),
        }
    }

    /// Unnormalized 2-D transform in place; `inverse` computes `Fᴴ`.
    fn run(&self, buf: &mut [Complex64], inverse: bool) {
        let (row_plan, col_plan) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        for chunk in buf.chunks_mut(self.cols) {
            row_plan.process(chunk);
        }
        let mut column = vec![Complex64::new(0.0, 0.0); self.rows];
        for j in 0..self.cols {
            for i in 0..self.rows {
                column[i] = buf[i * self.cols + j];
            }
            col_plan.process(&mut column);
            for i in 0..self.rows {
                buf[i * self.cols + j] = column[i];
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Op {
    Mask {
        mask: Mat,
    },
    Blur {
        kernel: Mat,
    },
    Downsample {
        factor: usize,
        w_rows: Mat,
        w_cols: Mat,
    },
    Phase {
        oversampling: f64,
        offset: (usize, usize),
        fft: Fft2,
    },
    Hdr {
        scale: f64,
    },
}

/// A measurement map from `in_shape` states to `out_shape` observations.
#[derive(Debug, Clone)]
pub struct ForwardOperator {
    kind: OperatorKind,
    op: Op,
    in_shape: (usize, usize),
    out_shape: (usize, usize),
}

/// Observation plus the noise level it was drawn with.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub y: Mat,
    pub noise_sigma: f64,
}

fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut k = i.rem_euclid(period);
    if k >= n as isize {
        k = period - k;
    }
    k as usize
}

/// Keys cubic convolution kernel with `a = -0.5`.
fn cubic(x: f64) -> f64 {
    let a = -0.5;
    let x = x.abs();
    if x <= 1.0 {
        (a + 2.0) * x.powi(3) - (a + 3.0) * x.powi(2) + 1.0
    } else if x < 2.0 {
        a * x.powi(3) - 5.0 * a * x.powi(2) + 8.0 * a * x - 4.0 * a
    } else {
        0.0
    }
}

/// Row-stochastic `n/factor x n` antialiased bicubic weights.
fn bicubic_weights(n: usize, factor: usize) -> Mat {
    let out = n / factor;
    let f = factor as f64;
    let mut w = Mat::zeros(out, n);
    for o in 0..out {
        let center = (o as f64 + 0.5) * f - 0.5;
        let mut total = 0.0;
        for j in 0..n {
            let v = cubic((j as f64 - center) / f);
            w[(o, j)] = v;
            total += v;
        }
        for j in 0..n {
            w[(o, j)] /= total;
        }
    }
    w
}

impl ForwardOperator {
    /// Observes every pixel where `mask` is 1 and zeroes the rest.
    pub fn from_mask(mask: Mat, kind: OperatorKind) -> Result<Self> {
        if mask.as_slice().iter().any(|v| *v != 0.0 && *v != 1.0) {
            return Err(Error::InvalidParam("mask entries must be 0 or 1".into()));
        }
        let shape = mask.shape();
        Ok(Self {
            kind,
            op: Op::Mask { mask },
            in_shape: shape,
            out_shape: shape,
        })
    }

    /// Hides a centered box whose side is `fraction` of the image side.
    pub fn box_mask(shape: (usize, usize), fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::InvalidParam("box fraction must be in (0, 1)".into()));
        }
        let bh = ((shape.0 as f64) * fraction).round() as usize;
        let bw = ((shape.1 as f64) * fraction).round() as usize;
        let (r0, c0) = ((shape.0 - bh) / 2, (shape.1 - bw) / 2);
        let mask = Mat::from_fn(shape.0, shape.1, |i, j| {
            let inside = i >= r0 && i < r0 + bh && j >= c0 && j < c0 + bw;
            if inside {
                0.0
            } else {
                1.0
            }
        });
        Self::from_mask(mask, OperatorKind::BoxMask)
    }

    /// Observes exactly `round(keep_ratio · n)` pixels chosen uniformly.
    pub fn random_mask<R: Rng + ?Sized>(shape: (usize, usize), keep_ratio: f64, rng: &mut R) -> Result<Self> {
        if !(0.0..=1.0).contains(&keep_ratio) {
            return Err(Error::InvalidParam("keep ratio must be in [0, 1]".into()));
        }
        let n = shape.0 * shape.1;
        let keep = (keep_ratio * n as f64).round() as usize;
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(rng);
        let mut mask = Mat::zeros(shape.0, shape.1);
        for &k in &idx[..keep] {
            mask.as_mut_slice()[k] = 1.0;
        }
        Self::from_mask(mask, OperatorKind::RandomMask)
    }

    /// Normalized isotropic Gaussian kernel with reflective boundaries.
    pub fn gaussian_blur(shape: (usize, usize), size: usize, sigma: f64) -> Result<Self> {
        if size % 2 == 0 || !(sigma > 0.0) {
            return Err(Error::InvalidParam("kernel size must be odd and sigma positive".into()));
        }
        let c = (size / 2) as f64;
        let mut kernel = Mat::from_fn(size, size, |i, j| {
            let (di, dj) = (i as f64 - c, j as f64 - c);
            (-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp()
        });
        let total = kernel.sum();
        kernel = kernel.scale(1.0 / total);
        Self::convolution(shape, kernel)
    }

    /// Arbitrary odd-sized kernel with reflective boundaries.
    pub fn convolution(shape: (usize, usize), kernel: Mat) -> Result<Self> {
        let (kr, kc) = kernel.shape();
        if kr % 2 == 0 || kc % 2 == 0 {
            return Err(Error::InvalidParam("kernel dimensions must be odd".into()));
        }
        if kr / 2 >= shape.0.max(2) || kc / 2 >= shape.1.max(2) {
            return Err(Error::InvalidParam("kernel radius exceeds image size".into()));
        }
        Ok(Self {
            kind: OperatorKind::GaussianBlur,
            op: Op::Blur { kernel },
            in_shape: shape,
            out_shape: shape,
        })
    }

    pub fn downsample(shape: (usize, usize), factor: usize) -> Result<Self> {
        if factor == 0 || shape.0 % factor != 0 || shape.1 % factor != 0 {
            return Err(Error::InvalidParam(format!("factor {factor} must divide {shape:?}")));
        }
        Ok(Self {
            kind: OperatorKind::Downsample,
            op: Op::Downsample {
                factor,
                w_rows: bicubic_weights(shape.0, factor),
                w_cols: bicubic_weights(shape.1, factor),
            },
            in_shape: shape,
            out_shape: (shape.0 / factor, shape.1 / factor),
        })
    }

    /// Fourier magnitude of the `[0, 1]`-normalized state, zero-padded to
    /// `round(oversampling · side)` per axis and centered.
    pub fn phase_retrieval(shape: (usize, usize), oversampling: f64) -> Result<Self> {
        if !(oversampling >= 1.0) {
            return Err(Error::InvalidParam("oversampling must be >= 1".into()));
        }
        let pr = (shape.0 as f64 * oversampling).round() as usize;
        let pc = (shape.1 as f64 * oversampling).round() as usize;
        Ok(Self {
            kind: OperatorKind::PhaseRetrieval,
            op: Op::Phase {
                oversampling,
                offset: ((pr - shape.0) / 2, (pc - shape.1) / 2),
                fft: Fft2::new(pr, pc),
            },
            in_shape: shape,
            out_shape: (pr, pc),
        })
    }

    pub fn hdr_clip(shape: (usize, usize), scale: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::InvalidParam("HDR scale must be positive".into()));
        }
        Ok(Self {
            kind: OperatorKind::HdrClip,
            op: Op::Hdr { scale },
            in_shape: shape,
            out_shape: shape,
        })
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn is_linear(&self) -> bool {
        self.kind.is_linear()
    }

    pub fn in_shape(&self) -> (usize, usize) {
        self.in_shape
    }

    pub fn out_shape(&self) -> (usize, usize) {
        self.out_shape
    }

    pub fn mask(&self) -> Option<&Mat> {
        match &self.op {
            Op::Mask { mask } => Some(mask),
            _ => None,
        }
    }

    pub fn oversampling(&self) -> Option<f64> {
        match &self.op {
            Op::Phase { oversampling, .. } => Some(*oversampling),
            _ => None,
        }
    }

    pub fn downsample_factor(&self) -> Option<usize> {
        match &self.op {
            Op::Downsample { factor, .. } => Some(*factor),
            _ => None,
        }
    }

    pub fn apply(&self, x: &Mat) -> Result<Mat> {
        x.ensure_shape(self.in_shape)?;
        Ok(match &self.op {
            Op::Mask { mask } => x.hadamard(mask),
            Op::Blur { kernel } => self.convolve(x, kernel, false),
            Op::Downsample { w_rows, w_cols, .. } => w_rows.matmul(x)?.matmul_t(w_cols)?,
            Op::Phase { .. } => {
                let spec = self.spectrum(x);
                let data = spec.iter().map(|c| c.norm()).collect();
                Mat::from_vec(self.out_shape.0, self.out_shape.1, data)?
            }
            Op::Hdr { scale } => x.map(|v| (scale * v).clamp(0.0, 1.0)),
        })
    }

    /// `Aᵀ u` for linear kinds.
    pub fn adjoint(&self, u: &Mat) -> Result<Mat> {
        u.ensure_shape(self.out_shape)?;
        match &self.op {
            Op::Mask { mask } => Ok(u.hadamard(mask)),
            Op::Blur { kernel } => Ok(self.convolve(u, kernel, true)),
            Op::Downsample { w_rows, w_cols, .. } => w_rows.t_matmul(u)?.matmul(w_cols),
            _ => Err(Error::InvalidParam(format!("{} has no adjoint", self.kind.name()))),
        }
    }

    /// Explicit `m x d` matrix on row-major flattened states (linear kinds).
    pub fn matrix(&self) -> Result<Mat> {
        if !self.is_linear() {
            return Err(Error::InvalidParam(format!("{} is nonlinear", self.kind.name())));
        }
        let d = self.in_shape.0 * self.in_shape.1;
        let m = self.out_shape.0 * self.out_shape.1;
        let mut out = Mat::zeros(m, d);
        let mut e = Mat::zeros(self.in_shape.0, self.in_shape.1);
        for k in 0..d {
            e.as_mut_slice()[k] = 1.0;
            let col = self.apply(&e)?;
            out.set_col(k, col.as_slice());
            e.as_mut_slice()[k] = 0.0;
        }
        Ok(out)
    }

    /// Gradient of `½‖y − A(x)‖²` with respect to `x`.
    pub fn data_fit_grad(&self, x: &Mat, y: &Mat) -> Result<Mat> {
        y.ensure_shape(self.out_shape)?;
        let ax = self.apply(x)?;
        let resid = &ax - y;
        match &self.op {
            Op::Mask { .. } | Op::Blur { .. } | Op::Downsample { .. } => self.adjoint(&resid),
            Op::Hdr { scale } => Ok(Mat::from_fn(x.rows(), x.cols(), |i, j| {
                let v = scale * x[(i, j)];
                if v > 0.0 && v < 1.0 {
                    scale * resid[(i, j)]
                } else {
                    0.0
                }
            })),
            Op::Phase { offset, fft, .. } => {
                let spec = self.spectrum(x);
                // w_k = (|u_k| − y_k) u_k / |u_k|, zero where |u_k| = 0
                let mut w: Vec<Complex64> = spec
                    .iter()
                    .zip(y.as_slice())
                    .map(|(u, yk)| {
                        let mag = u.norm();
                        if mag == 0.0 {
                            Complex64::new(0.0, 0.0)
                        } else {
                            u * ((mag - yk) / mag)
                        }
                    })
                    .collect();
                fft.run(&mut w, true);
                let (r0, c0) = *offset;
                let pc = self.out_shape.1;
                // d(x̃)/dx = 1/2 for the [0, 1] normalization.
                Ok(Mat::from_fn(x.rows(), x.cols(), |i, j| {
                    0.5 * w[(r0 + i) * pc + c0 + j].re
                }))
            }
        }
    }

    /// Adds `σ ε` to `A(x_true)`.
    pub fn make_measurement<R: Rng + ?Sized>(
        &self,
        x_true: &Mat,
        noise_sigma: f64,
        rng: &mut R,
    ) -> Result<Measurement> {
        if !(noise_sigma >= 0.0) {
            return Err(Error::InvalidParam("noise sigma must be >= 0".into()));
        }
        let clean = self.apply(x_true)?;
        let y = if noise_sigma == 0.0 {
            clean
        } else {
            let eps = Mat::randn(clean.rows(), clean.cols(), rng);
            clean.axpy(noise_sigma, &eps)
        };
        Ok(Measurement { y, noise_sigma })
    }

    fn spectrum(&self, x: &Mat) -> Vec<Complex64> {
        let Op::Phase { offset, fft, .. } = &self.op else {
            unreachable!("spectrum is only used by phase retrieval")
        };
        let (pr, pc) = self.out_shape;
        let mut buf = vec![Complex64::new(0.0, 0.0); pr * pc];
        for i in 0..x.rows() {
            for j in 0..x.cols() {
                buf[(offset.0 + i) * pc + offset.1 + j] = Complex64::new(0.5 * (x[(i, j)] + 1.0), 0.0);
            }
        }
        fft.run(&mut buf, false);
        buf
    }

    fn convolve(&self, x: &Mat, kernel: &Mat, adjoint: bool) -> Mat {
        let (n, m) = self.in_shape;
        let (kr, kc) = kernel.shape();
        let (hr, hc) = ((kr / 2) as isize, (kc / 2) as isize);
        let mut out = Mat::zeros(n, m);
        for i in 0..n {
            for j in 0..m {
                for a in 0..kr {
                    let si = reflect(i as isize + a as isize - hr, n);
                    for b in 0..kc {
                        let sj = reflect(j as isize + b as isize - hc, m);
                        let k = kernel[(a, b)];
                        if adjoint {
                            out[(si, sj)] += k * x[(i, j)];
                        } else {
                            out[(i, j)] += k * x[(si, sj)];
                        }
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reflect_indices() {
        let got: Vec<usize> = (-3..7).map(|i| reflect(i, 4)).collect();
        assert_eq!(got, vec![3, 2, 1, 0, 1, 2, 3, 2, 1, 0]);
    }

    #[test]
    fn identity_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Mat::randn(8, 8, &mut rng);
        let full = ForwardOperator::random_mask((8, 8), 1.0, &mut rng).unwrap();
        assert_eq!(full.apply(&x).unwrap(), x);
        let delta = Mat::from_fn(3, 3, |i, j| if i == 1 && j == 1 { 1.0 } else { 0.0 });
        let blur = ForwardOperator::convolution((8, 8), delta).unwrap();
        assert!((&blur.apply(&x).unwrap() - &x).max_abs() < 1e-15);
    }

    #[test]
    fn mask_geometry() {
        let b = ForwardOperator::box_mask((8, 8), 0.5).unwrap();
        let mask = b.mask().unwrap();
        assert_eq!(mask.sum(), 48.0);
        assert_eq!(mask[(2, 2)], 0.0);
        assert_eq!(mask[(5, 5)], 0.0);
        assert_eq!(mask[(1, 4)], 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = ForwardOperator::random_mask((8, 8), 0.3, &mut rng).unwrap();
        assert_eq!(r.mask().unwrap().sum(), 19.0);
    }

    #[test]
    fn phase_flip_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let op = ForwardOperator::phase_retrieval((8, 8), 2.0).unwrap();
        assert_eq!(op.out_shape(), (16, 16));
        let x = Mat::randn(8, 8, &mut rng);
        let a = op.apply(&x).unwrap();
        let b = op.apply(&x.flip()).unwrap();
        assert!((&a - &b).max_abs() < 1e-12);
    }

    #[test]
    fn downsample_preserves_constants() {
        let op = ForwardOperator::downsample((8, 8), 4).unwrap();
        let y = op.apply(&Mat::filled(8, 8, 0.3)).unwrap();
        assert_eq!(y.shape(), (2, 2));
        assert!(y.as_slice().iter().all(|v| (v - 0.3).abs() < 1e-14));
        assert!(ForwardOperator::downsample((8, 8), 3).is_err());
    }

    #[test]
    fn hdr_gradient_support() {
        let op = ForwardOperator::hdr_clip((1, 4), 2.0).unwrap();
        let x = Mat::from_vec(1, 4, vec![-0.2, 0.25, 0.7, 0.5]).unwrap();
        let y = Mat::zeros(1, 4);
        let g = op.data_fit_grad(&x, &y).unwrap();
        assert_eq!(g.as_slice(), &[0.0, 2.0 * 0.5, 0.0, 0.0]);
    }

    #[test]
    fn zero_residual_gives_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Mat::randn(8, 8, &mut rng).scale(0.3);
        for spec in [
            OperatorSpec::of_kind(OperatorKind::BoxMask),
            OperatorSpec::of_kind(OperatorKind::GaussianBlur),
            OperatorSpec::of_kind(OperatorKind::PhaseRetrieval),
            OperatorSpec::of_kind(OperatorKind::HdrClip),
        ] {
            let op = spec.build((8, 8)).unwrap();
            let y = op.apply(&x).unwrap();
            assert!(op.data_fit_grad(&x, &y).unwrap().max_abs() < 1e-12);
        }
    }

    #[test]
    fn measurement_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let op = ForwardOperator::box_mask((8, 8), 0.5).unwrap();
        let x = Mat::randn(8, 8, &mut rng);
        let clean = op.make_measurement(&x, 0.0, &mut rng).unwrap();
        assert_eq!(clean.y, op.apply(&x).unwrap());
        let draw = |seed| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            op.make_measurement(&x, 0.1, &mut r).unwrap()
        };
        assert_eq!(draw(8), draw(8));
        assert!(op.make_measurement(&x, -1.0, &mut rng).is_err());
    }

    #[test]
    fn nonlinear_has_no_matrix() {
        let op = ForwardOperator::hdr_clip((2, 2), 2.0).unwrap();
        assert!(op.matrix().is_err());
        assert!(op.adjoint(&Mat::zeros(2, 2)).is_err());
        assert!(op.apply(&Mat::zeros(3, 2)).is_err());
    }
}
