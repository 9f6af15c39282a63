//! Config-driven sweeps over solvers, step sizes, noise levels, retention
//! thresholds and projection subspaces, with CSV output.

mod config;
mod manifold_trials;
mod runner;
mod stats;

pub use config::{
    DapsSection, ExperimentConfig, ExperimentSection, GuidanceSection, ManifoldSection, MeasurementSection,
    MetricsSection, PriorSection, PsldSection, ResampleSection, ScheduleSection, SolverKind, SweepSection,
};
pub use manifold_trials::{make_manifold, run_manifold_trials, write_manifold_csv, ManifoldTrialRow};
pub use runner::{
    best_of_k, run_experiment, run_one, solve, subspace_ablation, sweep_points, write_csv, ResultRow, SweepPoint,
    Testbed, CSV_HEADER, SCHEMA_VERSION,
};
pub use stats::{mean, sign_test_less, summarize, PointSummary, SignTest};
