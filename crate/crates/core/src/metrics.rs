//! Reconstruction and posterior-quality metrics.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::prior::PosteriorGmm;

/// Side of the square SSIM window.
pub const SSIM_WINDOW: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    /// dB; `+inf` for an exact reconstruction.
    pub psnr: f64,
    pub ssim: f64,
    pub nmse: f64,
}

impl MetricReport {
    pub fn compute(x: &Mat, reference: &Mat, peak: f64) -> Result<Self> {
        Ok(Self {
            psnr: psnr(x, reference, peak)?,
            ssim: ssim_with_peak(x, reference, peak)?,
            nmse: nmse(x, reference)?,
        })
    }
}

fn mse(x: &Mat, reference: &Mat) -> Result<f64> {
    x.ensure_shape(reference.shape())?;
    Ok((x - reference).norm_sq() / x.len() as f64)
}

pub fn psnr(x: &Mat, reference: &Mat, peak: f64) -> Result<f64> {
    if !(peak > 0.0) {
        return Err(Error::InvalidParam("peak must be positive".into()));
    }
    let err = mse(x, reference)?;
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / err).log10())
}

/// Mean windowed SSIM with peak 1.
pub fn ssim(x: &Mat, reference: &Mat) -> Result<f64> {
    ssim_with_peak(x, reference, 1.0)
}

pub fn ssim_with_peak(x: &Mat, reference: &Mat, peak: f64) -> Result<f64> {
    let (lum, cs) = ssim_terms(x, reference, peak)?;
    Ok(lum.iter().zip(&cs).map(|(l, c)| l * c).sum::<f64>() / lum.len() as f64)
}

/// Per-window luminance and contrast-structure terms.
///
/// Windows are `SSIM_WINDOW` squares at stride 1, clipped to the image when
/// it is smaller than a window.
pub fn ssim_terms(x: &Mat, reference: &Mat, peak: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    x.ensure_shape(reference.shape())?;
    let c1 = (0.01 * peak).powi(2);
    let c2 = (0.03 * peak).powi(2);
    let (n, m) = x.shape();
    let (wr, wc) = (SSIM_WINDOW.min(n), SSIM_WINDOW.min(m));
    let mut lum = Vec::new();
    let mut cs = Vec::new();
    for i0 in 0..=n - wr {
        for j0 in 0..=m - wc {
            let cnt = (wr * wc) as f64;
            let (mut sx, mut sy) = (0.0, 0.0);
            for i in i0..i0 + wr {
                for j in j0..j0 + wc {
                    sx += x[(i, j)];
                    sy += reference[(i, j)];
                }
            }
            let (mx, my) = (sx / cnt, sy / cnt);
            let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
            for i in i0..i0 + wr {
                for j in j0..j0 + wc {
                    let (dx, dy) = (x[(i, j)] - mx, reference[(i, j)] - my);
                    vx += dx * dx;
                    vy += dy * dy;
                    cxy += dx * dy;
                }
            }
            let (vx, vy, cxy) = (vx / cnt, vy / cnt, cxy / cnt);
            lum.push((2.0 * mx * my + c1) / (mx * mx + my * my + c1));
            cs.push((2.0 * cxy + c2) / (vx + vy + c2));
        }
    }
    Ok((lum, cs))
}

/// `‖x − ref‖² / ‖ref‖²`.
pub fn nmse(x: &Mat, reference: &Mat) -> Result<f64> {
    x.ensure_shape(reference.shape())?;
    let denom = reference.norm_sq();
    if denom == 0.0 {
        return Err(Error::InvalidParam("nmse reference is zero".into()));
    }
    Ok((x - reference).norm_sq() / denom)
}

/// Fraction of values strictly below `threshold_db`.
pub fn failure_rate(psnrs: &[f64], threshold_db: f64) -> Result<f64> {
    if psnrs.is_empty() {
        return Err(Error::InvalidParam("failure rate of an empty list".into()));
    }
    let failed = psnrs.iter().filter(|p| **p < threshold_db).count();
    Ok(failed as f64 / psnrs.len() as f64)
}

/// Relative error of the sample mean plus relative error of the sample
/// covariance trace, both against the exact mixture.
///
/// Falls back to absolute norms when the exact mean (or trace) is zero.
pub fn posterior_moment_error(samples: &[Mat], exact: &PosteriorGmm) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::InvalidParam("need at least two samples".into()));
    }
    let n = samples.len() as f64;
    let shape = exact.shape();
    let mut mean = Mat::zeros(shape.0, shape.1);
    for s in samples {
        s.ensure_shape(shape)?;
        mean.add_scaled_inplace(1.0 / n, s);
    }
    let trace = samples.iter().map(|s| (s - &mean).norm_sq()).sum::<f64>() / (n - 1.0);

    let exact_mean = exact.mean();
    let exact_trace = exact.cov_trace();
    let mean_err = (&mean - &exact_mean).norm();
    let mean_term = match exact_mean.norm() {
        d if d > 0.0 => mean_err / d,
        _ => mean_err,
    };
    let trace_term = if exact_trace > 0.0 {
        (trace - exact_trace).abs() / exact_trace
    } else {
        (trace - exact_trace).abs()
    };
    Ok(mean_term + trace_term)
}

/// Returns whichever of `x` and its flip is closer to `reference`.
///
/// Resolves the flip ambiguity of Fourier-magnitude measurements.
pub fn align_flip(x: &Mat, reference: &Mat) -> Result<Mat> {
    let flipped = x.flip();
    Ok(if mse(&flipped, reference)? < mse(x, reference)? {
        flipped
    } else {
        x.clone()
    })
}

/// Maps `[-1, 1]` states to `[0, 1]` images.
pub fn to_unit_range(x: &Mat) -> Mat {
    x.map(|v| 0.5 * (v + 1.0))
}
