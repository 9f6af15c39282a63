use std::io::Write;

use crate::error::Result;
use crate::linalg::{text::fmt_f64, Mat};

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// 0-based step number.
    pub step: usize,
    /// Diffusion index (or annealing level for the annealed sampler).
    pub t: usize,
    pub grad_norm: f64,
    /// Norm of the gradient actually applied; equals `grad_norm` when unprojected.
    pub proj_grad_norm: f64,
    /// Selected rank, 0 when no projection was applied.
    pub rank: usize,
    /// RMSE of the current clean estimate against the truth, when known.
    pub state_rmse_to_truth: Option<f64>,
    /// Distance of the clean estimate to the nearest prior mode, per entry.
    pub mode_distance: f64,
    pub state: Mat,
}

/// Per-step diagnostics of one sampler run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub records: Vec<StepRecord>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, record: StepRecord) {
        self.records.push(record);
    }

    /// CSV with columns `step,t,grad_norm,proj_grad_norm,rank,state_rmse_to_truth`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "step",
            "t",
            "grad_norm",
            "proj_grad_norm",
            "rank",
            "state_rmse_to_truth",
        ])?;
        for r in &self.records {
            w.write_record([
                r.step.to_string(),
                r.t.to_string(),
                fmt_f64(r.grad_norm),
                fmt_f64(r.proj_grad_norm),
                r.rank.to_string(),
                r.state_rmse_to_truth.map(fmt_f64).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
