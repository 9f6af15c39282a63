use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::ManifoldSection;
use crate::error::{Error, Result};
use crate::linalg::{text::fmt_f64, Mat};
use crate::manifold::{compare_steps, perturbed_projector, Manifold, StepComparison};

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldTrialRow {
    pub kind: &'static str,
    pub dim: usize,
    pub trial: usize,
    pub eta: f64,
    pub eps_scale: f64,
    pub outcome: StepComparison,
}

/// Builds a manifold of the named kind in `dim` ambient dimensions.
///
/// Linear subspaces have half the ambient dimension; tori use unit circles
/// and need an even `dim`.
pub fn make_manifold<R: rand::Rng + ?Sized>(kind: &str, dim: usize, rng: &mut R) -> Result<Manifold> {
    match kind {
        "linear_subspace" => Manifold::linear_subspace(&Mat::randn(dim, (dim / 2).max(1), rng)),
        "sphere" => Manifold::sphere(dim, 1.0),
        "product_torus" => {
            if dim % 2 != 0 {
                return Err(Error::Config(format!("torus needs an even dimension, got {dim}")));
            }
            Manifold::product_torus(vec![1.0; dim / 2])
        }
        other => Err(Error::Config(format!("unknown manifold kind {other}"))),
    }
}

/// Random trials: each draws an on-manifold point, a unit gradient and a
/// projector, then evaluates every step size on that triple.
pub fn run_manifold_trials(cfg: &ManifoldSection) -> Result<Vec<ManifoldTrialRow>> {
    let mut cells = Vec::new();
    for (ki, kind) in cfg.kinds.iter().enumerate() {
        for (di, &dim) in cfg.dims.iter().enumerate() {
            for (ei, &eps) in cfg.eps_scales.iter().enumerate() {
                cells.push((ki, kind.as_str(), di, dim, ei, eps));
            }
        }
    }
    let chunks: Vec<Result<Vec<ManifoldTrialRow>>> = cells
        .par_iter()
        .map(|&(ki, kind, di, dim, ei, eps)| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(((ki * 1000 + di) * 1000 + ei) as u64);
            let man = make_manifold(kind, dim, &mut rng)?;
            let kind_name = man.kind_name();
            let mut rows = Vec::with_capacity(cfg.trials * cfg.etas.len());
            for trial in 0..cfg.trials {
                let z = man.random_point(&mut rng);
                let g = Mat::randn(dim, 1, &mut rng);
                let g = g.scale(1.0 / g.norm()).into_vec();
                let frame = man.tangent_frame(&z)?;
                let proj = perturbed_projector(&frame, eps, &mut rng)?;
                for &eta in &cfg.etas {
                    rows.push(ManifoldTrialRow {
                        kind: kind_name,
                        dim,
                        trial,
                        eta,
                        eps_scale: eps,
                        outcome: compare_steps(&man, &z, &g, eta, &proj)?,
                    });
                }
            }
            Ok(rows)
        })
        .collect();
    let mut out = Vec::new();
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

pub fn write_manifold_csv<W: Write>(rows: &[ManifoldTrialRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kind", "eta", "eps_scale", "dist_std", "dist_proj", "margin"])?;
    for r in rows {
        w.write_record([
            r.kind.to_string(),
            fmt_f64(r.eta),
            fmt_f64(r.eps_scale),
            fmt_f64(r.outcome.dist_std),
            fmt_f64(r.outcome.dist_proj),
            fmt_f64(r.outcome.margin),
        ])?;
    }
    w.flush()?;
    Ok(())
}
