use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dsg_core::experiment::{
    run_experiment, run_manifold_trials, subspace_ablation, summarize, write_csv, write_manifold_csv, ExperimentConfig,
    ResultRow,
};

#[derive(Parser)]
#[command(
    name = "bench",
    version,
    about = "Sweeps for state-guided projected diffusion solvers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a config file.
    Run(Common),
    /// Run the config with all four projection subspaces.
    Ablate(Common),
    /// Run the manifold-distance trials of the config's [manifold] section.
    Manifold(Common),
}

#[derive(Args)]
struct Common {
    config: PathBuf,
    /// Seeds as `a..b` (half open) or a comma list; overrides the config.
    #[arg(long)]
    seeds: Option<String>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory for the CSV.
    #[arg(long, env = "DSG_OUT_DIR", default_value = ".")]
    out: PathBuf,
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = spec.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
        if a >= b {
            bail!("empty seed range {spec}");
        }
        return Ok((a..b).collect());
    }
    spec.split(',')
        .map(|s| s.trim().parse::<u64>().with_context(|| format!("bad seed {s:?}")))
        .collect()
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(s) = &common.seeds {
        cfg.experiment.seeds = parse_seeds(s)?;
    }
    if let Some(w) = common.workers {
        cfg.experiment.workers = w;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn output_path(out_dir: &Path, name: &str) -> Result<PathBuf> {
    let path = Path::new(name);
    let path = if path.is_absolute() {
        path.to_path_buf()
    } else {
        out_dir.join(path)
    };
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(path)
}

fn report(rows: &[ResultRow], path: &Path) {
    println!("{} rows -> {}", rows.len(), path.display());
    println!(
        "{:>8} {:>9} {:>6} {:>9} {:>5} {:>10} {:>10} {:>10} {:>8}",
        "eta_x", "sigma_y", "tau", "subspace", "runs", "psnr", "nmse", "pme", "fail"
    );
    for s in summarize(rows) {
        println!(
            "{:>8.3} {:>9.4} {:>6.3} {:>9} {:>5} {:>10.3} {:>10.5} {:>10.5} {:>8.3}",
            s.point.eta_multiplier,
            s.point.noise_sigma,
            s.point.tau,
            s.point.subspace.name(),
            s.runs,
            s.mean_psnr,
            s.mean_nmse,
            s.mean_posterior_moment_error,
            s.failure_rate
        );
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(c) | Command::Ablate(c) => {
            let cfg = load(c)?;
            let rows = match cli.command {
                Command::Ablate(_) => subspace_ablation(&cfg)?,
                _ => run_experiment(&cfg)?,
            };
            let path = output_path(&c.out, &cfg.experiment.output)?;
            let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            write_csv(&rows, BufWriter::new(file))?;
            report(&rows, &path);
        }
        Command::Manifold(c) => {
            let cfg = load(c)?;
            let rows = run_manifold_trials(&cfg.manifold)?;
            let path = output_path(&c.out, &cfg.experiment.output)?;
            let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            write_manifold_csv(&rows, BufWriter::new(file))?;
            let positive = rows.iter().filter(|r| r.outcome.margin > 0.0).count();
            println!(
                "{} trials -> {}; margin > 0 in {:.2}%",
                rows.len(),
                path.display(),
                100.0 * positive as f64 / rows.len().max(1) as f64
            );
        }
    }
    Ok(())
}
