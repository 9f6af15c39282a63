//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so every criterion is reported even when an
//! earlier one fails. The exit status is nonzero on failure only when
//! `ACCEPTANCE_STRICT` is set; the default run is a report.

use std::time::Instant;

use dsg_core::experiment::{run_experiment, sign_test_less, subspace_ablation, write_csv, ExperimentConfig, ResultRow};
use dsg_core::manifold::{compare_steps, fit_exponent, perturbed_projector, GradientProjector, Manifold};
use dsg_core::solvers::{run_daps_style, Autoencoder, DapsConfig, GuidanceConfig, Problem, Subspace};
use dsg_core::{build_projector, make_vp_schedule, select_rank, ForwardOperator, GmmPrior, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_shape(r: &mut ChaCha8Rng) -> (usize, usize) {
    (r.random_range(2..=12), r.random_range(2..=12))
}

/// Low-rank signal plus a small full-rank floor, like a diffusion state.
fn random_state(rows: usize, cols: usize, r: &mut ChaCha8Rng) -> Mat {
    let k = r.random_range(1..=rows.min(cols));
    let lr = Mat::randn(rows, k, r).matmul(&Mat::randn(k, cols, r)).unwrap();
    let floor = 10f64.powf(r.random_range(-4.0..0.0));
    lr.axpy(floor, &Mat::randn(rows, cols, r))
}

fn projection_algebra() -> Outcome {
    let start = Instant::now();
    let mut r = rng(1);
    let mut worst = [0.0f64; 4];
    for _ in 0..1000 {
        let (m, n) = random_shape(&mut r);
        let state = random_state(m, n, &mut r);
        let tau = r.random_range(0.05..1.0);
        let p = build_projector(&state, tau, 1).unwrap();
        let g = Mat::randn(m, n, &mut r);
        let pg = p.project(&g).unwrap();

        let twice = p.project(&pg).unwrap();
        worst[0] = worst[0].max((&twice - &pg).norm() / g.norm());
        worst[1] = worst[1].max(pg.norm() / g.norm());

        let u = p.left_basis();
        let v = p.right_basis();
        let left = &pg - &u.matmul(&u.t_matmul(&pg).unwrap()).unwrap();
        let right = &pg - &pg.matmul(v).unwrap().matmul_t(v).unwrap();
        worst[3] = worst[3].max(left.norm()).max(right.norm());

        // Thin factors of a rectangular state cannot span both sides, so
        // full retention is checked on square states.
        let full = Mat::randn(m, m, &mut r);
        let gs = Mat::randn(m, m, &mut r);
        let p1 = build_projector(&full, 1.0, 1).unwrap();
        worst[2] = worst[2].max((&p1.project(&gs).unwrap() - &gs).norm() / gs.norm());
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst[0] <= 1e-10 && worst[1] <= 1.0 + 1e-12 && worst[2] <= 1e-8 && worst[3] <= 1e-8 && secs < 10.0;
    Outcome {
        id: 1,
        name: "projection algebra",
        pass,
        detail: format!(
            "idempotence {:.1e}, max gain {:.12}, full retention {:.1e}, containment {:.1e}, {secs:.2}s",
            worst[0], worst[1], worst[2], worst[3]
        ),
    }
}

fn brute_force_rank(s: &[f64], tau: f64) -> usize {
    let e: Vec<f64> = s.iter().map(|v| v * v).collect();
    let total = e.iter().fold(0.0, |a, v| a + v);
    (1..=e.len())
        .find(|&k| e[..k].iter().fold(0.0, |a, v| a + v) / total >= tau)
        .unwrap_or(e.len())
}

fn rank_oracle() -> Outcome {
    let mut r = rng(2);
    let mut mismatches = 0;
    let mut ties = 0;
    for case in 0..1000 {
        let n = r.random_range(1..=24);
        let mut s: Vec<f64> = if case % 3 == 0 {
            // Small integer levels produce repeated values and exact fractions.
            (0..n).map(|_| r.random_range(0..4) as f64).collect()
        } else {
            (0..n).map(|_| r.random::<f64>().powi(3) * 10.0).collect()
        };
        s.sort_by(|a, b| b.total_cmp(a));
        if s[0] == 0.0 {
            s[0] = 1.0;
        }
        let tau = if case % 3 == 0 {
            // Land exactly on a cumulative fraction.
            let e: Vec<f64> = s.iter().map(|v| v * v).collect();
            let total: f64 = e.iter().sum();
            let k = r.random_range(1..=n);
            let frac = e[..k].iter().sum::<f64>() / total;
            if frac > 0.0 {
                ties += 1;
                frac
            } else {
                0.5
            }
        } else {
            r.random_range(0.01..=1.0)
        };
        if select_rank(&s, tau).unwrap() != brute_force_rank(&s, tau) {
            mismatches += 1;
        }
    }
    Outcome {
        id: 2,
        name: "rank selection oracle",
        pass: mismatches == 0,
        detail: format!("{mismatches} mismatches in 1000 spectra ({ties} on exact cumulative fractions)"),
    }
}

fn linear_manifolds() -> Outcome {
    let mut r = rng(3);
    let mut worst_proj = 0.0f64;
    let mut worst_rel = 0.0f64;
    for trial in 0..10_000 {
        let eta = 10f64.powf(r.random_range(-4.0..0.0));
        let (man, proj) = if trial % 2 == 0 {
            let d = [3, 16, 64][trial % 3];
            let k = r.random_range(1..d);
            let man = Manifold::linear_subspace(&Mat::randn(d, k, &mut r)).unwrap();
            (man, None)
        } else {
            // Matrix subspace whose projector comes from a state's SVD.
            let (m, n) = (r.random_range(3..=8), r.random_range(3..=8));
            let k = r.random_range(1..m.min(n));
            let state = Mat::randn(m, k, &mut r).matmul(&Mat::randn(k, n, &mut r)).unwrap();
            let p = build_projector(&state, 1.0, 1).unwrap();
            let man = Manifold::matrix_subspace(p.left_basis(), p.right_basis()).unwrap();
            (
                man,
                Some(GradientProjector::State {
                    projector: p,
                    shape: (m, n),
                }),
            )
        };
        let z = man.random_point(&mut r);
        let g = Mat::randn(z.len(), 1, &mut r)
            .scale(r.random_range(0.1..10.0))
            .into_vec();
        let frame = man.tangent_frame(&z).unwrap();
        let proj = proj.unwrap_or_else(|| GradientProjector::exact(&frame));
        let o = compare_steps(&man, &z, &g, eta, &proj).unwrap();
        worst_proj = worst_proj.max(o.dist_proj);
        let expected = eta * o.normal_grad;
        worst_rel = worst_rel.max((o.dist_std - expected).abs() / expected);
    }
    Outcome {
        id: 3,
        name: "distance argument, linear manifolds",
        pass: worst_proj <= 1e-10 && worst_rel <= 1e-8,
        detail: format!("max projected distance {worst_proj:.1e}, max relative error of raw distance {worst_rel:.1e}"),
    }
}

fn spheres() -> Outcome {
    let start = Instant::now();
    let mut r = rng(4);
    let mut lines = Vec::new();
    let mut pass = true;
    for d in [3, 16, 64] {
        let man = Manifold::sphere(d, 1.0).unwrap();
        for (eps, need) in [(0.0, 0.99), (0.05, 0.95)] {
            let mut positive = 0;
            for _ in 0..10_000 {
                let z = man.random_point(&mut r);
                let g = Mat::randn(d, 1, &mut r);
                let g = g.scale(1.0 / g.norm()).into_vec();
                let frame = man.tangent_frame(&z).unwrap();
                let proj = perturbed_projector(&frame, eps, &mut r).unwrap();
                if compare_steps(&man, &z, &g, 1e-3, &proj).unwrap().margin > 0.0 {
                    positive += 1;
                }
            }
            let frac = positive as f64 / 1e4;
            pass &= frac >= need;
            lines.push(format!("d={d} eps={eps}: {:.2}%", 100.0 * frac));
        }

        // Mean second-order residual across a log grid of step sizes.
        let etas: Vec<f64> = (0..9).map(|i| 10f64.powf(-4.0 + 0.25 * i as f64)).collect();
        let mut resid = vec![0.0; etas.len()];
        for _ in 0..200 {
            let z = man.random_point(&mut r);
            let g = Mat::randn(d, 1, &mut r);
            let g = g.scale(1.0 / g.norm()).into_vec();
            let proj = GradientProjector::exact(&man.tangent_frame(&z).unwrap());
            for (k, &eta) in etas.iter().enumerate() {
                resid[k] += compare_steps(&man, &z, &g, eta, &proj).unwrap().curvature_residual(eta);
            }
        }
        let slope = fit_exponent(&etas, &resid).unwrap();
        pass &= (1.8..=2.2).contains(&slope);
        lines.push(format!("d={d} exponent {slope:.3}"));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 60.0;
    Outcome {
        id: 4,
        name: "distance argument, spheres",
        pass,
        detail: format!("{}; {secs:.1}s", lines.join(", ")),
    }
}

fn central_diff(f: impl Fn(&Mat) -> f64, x: &Mat, h: f64) -> Mat {
    let mut out = Mat::zeros(x.rows(), x.cols());
    for k in 0..x.len() {
        let mut p = x.clone();
        let mut m = x.clone();
        p.as_mut_slice()[k] += h;
        m.as_mut_slice()[k] -= h;
        out.as_mut_slice()[k] = (f(&p) - f(&m)) / (2.0 * h);
    }
    out
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let mut r = rng(5);
    let sched = make_vp_schedule(200, 1e-4, 2e-2).unwrap();
    let prior = GmmPrior::random_low_rank(8, 8, 4, 2, 0.5, 1e-2, &mut r).unwrap();
    let mut score_worst = 0.0f64;
    for _ in 0..100 {
        let t = r.random_range(0..200);
        let (a, b) = sched.marginal_scales(t);
        let x = prior.sample(&mut r).scale(a).axpy(b, &Mat::randn(8, 8, &mut r));
        let s = prior.score(&x, t, &sched);
        let fd = central_diff(|p| prior.log_density_scaled(p, a, b), &x, 1e-5);
        score_worst = score_worst.max((&s - &fd).norm() / (1.0 + s.norm()));
    }
    let mut pass = score_worst <= 1e-4;
    let mut lines = vec![format!("score {score_worst:.1e}")];

    let shape = (8, 8);
    let ops = [
        ("box_mask", ForwardOperator::box_mask(shape, 0.5).unwrap(), 1e-5),
        (
            "random_mask",
            ForwardOperator::random_mask(shape, 0.3, &mut r).unwrap(),
            1e-5,
        ),
        (
            "gaussian_blur",
            ForwardOperator::gaussian_blur(shape, 7, 3.0).unwrap(),
            1e-5,
        ),
        ("downsample", ForwardOperator::downsample(shape, 2).unwrap(), 1e-5),
        (
            "phase_retrieval",
            ForwardOperator::phase_retrieval(shape, 2.0).unwrap(),
            1e-4,
        ),
        ("hdr_clip", ForwardOperator::hdr_clip(shape, 2.0).unwrap(), 1e-5),
    ];
    for (name, op, tol) in ops {
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let x = Mat::randn(8, 8, &mut r).scale(0.5);
            let y = op.apply(&Mat::randn(8, 8, &mut r).scale(0.5)).unwrap();
            let grad = op.data_fit_grad(&x, &y).unwrap();
            let loss = |p: &Mat| 0.5 * (&op.apply(p).unwrap() - &y).norm_sq();
            let fd = central_diff(loss, &x, 1e-6);
            worst = worst.max((&grad - &fd).norm() / grad.norm().max(1e-12));
        }
        pass &= worst <= tol;
        lines.push(format!("{name} {worst:.1e}"));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 60.0;
    Outcome {
        id: 5,
        name: "score and data-fit gradients vs finite differences",
        pass,
        detail: format!("{}; {secs:.1}s", lines.join(", ")),
    }
}

fn conjugate_posterior() -> Outcome {
    let mut r = rng(6);
    // Unit prior variance makes the default radius the exact conditional spread.
    let (var, sigma_y) = (1.0, 0.5);
    let mean = Mat::randn(3, 3, &mut r).scale(0.5);
    let prior = GmmPrior::gaussian(mean.clone(), var).unwrap();
    let op = ForwardOperator::random_mask((3, 3), 1.0, &mut r).unwrap();
    let y = prior.sample(&mut r).axpy(sigma_y, &Mat::randn(3, 3, &mut r));
    let ae = Autoencoder::Identity;
    let problem = Problem::new(&prior, &op, &y, &ae);

    let w = var / (var + sigma_y * sigma_y);
    let exact = mean.scale(1.0 - w).axpy(w, &y);
    let cfg = GuidanceConfig::default().unprojected();
    let dcfg = DapsConfig::geometric(5.0, 0.01, 40, 50, 0.5, sigma_y).unwrap();

    let n = 200;
    let samples: Vec<Mat> = (0..n)
        .map(|s| run_daps_style(&problem, &cfg, &dcfg, &mut rng(1000 + s)).unwrap().0)
        .collect();
    let mut avg = Mat::zeros(3, 3);
    for s in &samples {
        avg.add_scaled_inplace(1.0 / n as f64, s);
    }
    let spread: f64 = samples.iter().map(|s| (s - &avg).norm_sq()).sum::<f64>() / (n as f64 - 1.0);
    let se = (spread / n as f64).sqrt();
    let err = (&avg - &exact).norm();
    Outcome {
        id: 6,
        name: "conjugate posterior mean",
        pass: err <= 3.0 * se,
        detail: format!("|mean error| {err:.4} vs 3 SE {:.4} over {n} samples", 3.0 * se),
    }
}

/// Shared toy testbed for the trend criteria.
fn testbed(solver: &str, operator: &str, seeds: u64) -> ExperimentConfig {
    let src = format!(
        r#"
[experiment]
solver = "{solver}"
[prior]
rows = 16
cols = 16
var = 1e-3
[operator]
kind = "{operator}"
[schedule]
beta_max = 0.06
"#
    );
    let mut cfg = ExperimentConfig::parse(&src).unwrap();
    cfg.experiment.seeds = (0..seeds).collect();
    cfg
}

const STEP_GRID: [f64; 9] = [0.001, 0.003, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0];

/// Grid multiplier with the best unprojected mean PSNR.
fn tuned_multiplier(cfg: &ExperimentConfig) -> f64 {
    let mut cfg = cfg.clone();
    cfg.sweep.eta_multipliers = STEP_GRID.to_vec();
    cfg.sweep.subspaces = vec![Subspace::None];
    let rows = run_experiment(&cfg).unwrap();
    let mean_psnr = |m: f64| {
        let v: Vec<f64> = rows
            .iter()
            .filter(|r| r.point.eta_multiplier == m)
            .map(|r| r.psnr)
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    STEP_GRID
        .iter()
        .copied()
        .max_by(|a, b| mean_psnr(*a).total_cmp(&mean_psnr(*b)))
        .unwrap()
}

fn metric_by_seed(
    rows: &[ResultRow],
    keep: impl Fn(&ResultRow) -> bool,
    metric: impl Fn(&ResultRow) -> f64,
) -> Vec<f64> {
    let mut sel: Vec<&ResultRow> = rows.iter().filter(|r| keep(r)).collect();
    sel.sort_by_key(|r| r.seed);
    sel.into_iter().map(metric).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn step_size_robustness(default: f64, cfg: &ExperimentConfig) -> Outcome {
    let mut cfg = cfg.clone();
    cfg.sweep.eta_multipliers = vec![default, 10.0 * default];
    cfg.sweep.subspaces = vec![Subspace::None, Subspace::State];
    let rows = run_experiment(&cfg).unwrap();
    let arm = |m: f64, s: Subspace| {
        metric_by_seed(
            &rows,
            |r| r.point.eta_multiplier == m && r.point.subspace == s,
            |r| r.nmse,
        )
    };

    let (on, off) = (arm(default, Subspace::State), arm(default, Subspace::None));
    let ratio = mean(&on) / mean(&off);
    let (on_big, off_big) = (
        arm(10.0 * default, Subspace::State),
        arm(10.0 * default, Subspace::None),
    );
    let test = sign_test_less(&on_big, &off_big).unwrap();
    let pass = ratio <= 1.2 && mean(&on_big) < mean(&off_big) && test.p_value < 0.05;
    Outcome {
        id: 7,
        name: "step-size robustness",
        pass,
        detail: format!(
            "tuned multiplier {default}; default NMSE ratio {ratio:.3}; 10x NMSE {:.4e} vs {:.4e}, wins {}/{} p={:.1e}",
            mean(&on_big),
            mean(&off_big),
            test.wins,
            on_big.len(),
            test.p_value
        ),
    }
}

fn noise_robustness() -> Outcome {
    let mut cfg = testbed("daps", "box_mask", 24);
    cfg.measurement.noise_sigma = 0.5;
    cfg.metrics.posterior_samples = 8;
    cfg.sweep.subspaces = vec![Subspace::None, Subspace::State];
    let rows = run_experiment(&cfg).unwrap();
    let arm = |s: Subspace| metric_by_seed(&rows, |r| r.point.subspace == s, |r| r.posterior_moment_error);
    let (on, off) = (arm(Subspace::State), arm(Subspace::None));
    let test = sign_test_less(&on, &off).unwrap();
    Outcome {
        id: 8,
        name: "measurement-noise robustness",
        pass: test.p_value < 0.05,
        detail: format!(
            "posterior moment error {:.3} vs {:.3}, wins {}/{} p={:.2}",
            mean(&on),
            mean(&off),
            test.wins,
            on.len(),
            test.p_value
        ),
    }
}

fn failure_rate() -> Outcome {
    let mut cfg = testbed("resample", "phase_retrieval", 50);
    cfg.metrics.best_of = 4;
    let default = tuned_multiplier(&cfg);
    cfg.sweep.eta_multipliers = vec![default];
    cfg.sweep.subspaces = vec![Subspace::None, Subspace::State];
    let rows = run_experiment(&cfg).unwrap();
    let rate = |s: Subspace| {
        mean(&metric_by_seed(
            &rows,
            |r| r.point.subspace == s,
            |r| r.failed as u8 as f64,
        ))
    };
    let psnr = |s: Subspace| mean(&metric_by_seed(&rows, |r| r.point.subspace == s, |r| r.psnr));
    let (on, off) = (rate(Subspace::State), rate(Subspace::None));
    let pass = on <= off && (off <= 0.15 || off - on >= 0.05);
    Outcome {
        id: 9,
        name: "failure rate",
        pass,
        detail: format!(
            "tuned multiplier {default}; failure rate {on:.2} vs {off:.2}; mean PSNR {:.1} vs {:.1} dB",
            psnr(Subspace::State),
            psnr(Subspace::None)
        ),
    }
}

fn subspace_choice(default: f64, cfg: &ExperimentConfig) -> Outcome {
    let mut cfg = cfg.clone();
    cfg.sweep.eta_multipliers = vec![10.0 * default];
    let rows = subspace_ablation(&cfg).unwrap();
    let arm = |s: Subspace| mean(&metric_by_seed(&rows, |r| r.point.subspace == s, |r| r.nmse));
    let (none, random, gradient, state) = (
        arm(Subspace::None),
        arm(Subspace::Random),
        arm(Subspace::Gradient),
        arm(Subspace::State),
    );
    let pass = state < none && random >= 0.9 * none && (gradient - none).abs() <= 0.1 * none;
    Outcome {
        id: 10,
        name: "subspace choice",
        pass,
        detail: format!(
            "NMSE at 10x: none {none:.4e}, random {random:.4e}, gradient {gradient:.4e}, state {state:.4e}"
        ),
    }
}

fn tau_robustness() -> Outcome {
    let mut cfg = testbed("dps", "box_mask", 24);
    let default = tuned_multiplier(&cfg);
    cfg.sweep.eta_multipliers = vec![default];
    cfg.sweep.taus = vec![0.6, 0.8, 0.9, 0.99];
    let rows = run_experiment(&cfg).unwrap();
    let per_tau: Vec<f64> = cfg
        .sweep
        .taus
        .iter()
        .map(|&t| mean(&metric_by_seed(&rows, |r| r.point.tau == t, |r| r.nmse)))
        .collect();
    let lo = per_tau.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = per_tau.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = (hi - lo) / lo;
    Outcome {
        id: 11,
        name: "threshold robustness",
        pass: spread <= 0.25,
        detail: format!(
            "tuned multiplier {default}; NMSE by tau {}; spread {:.1}%",
            per_tau.iter().map(|v| format!("{v:.4e}")).collect::<Vec<_>>().join(" "),
            100.0 * spread
        ),
    }
}

/// CSV text with the timing column removed.
fn csv_without_timing(rows: &[ResultRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).unwrap();
    String::from_utf8(buf)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

fn determinism() -> Outcome {
    let mut differing = Vec::new();
    let tasks = [
        ("dps", "random_mask"),
        ("psld", "box_mask"),
        ("resample", "phase_retrieval"),
        ("daps", "box_mask"),
    ];
    for (solver, op) in tasks {
        let mut cfg = testbed(solver, op, 4);
        cfg.prior.rows = 8;
        cfg.prior.cols = 8;
        cfg.schedule.steps = 60;
        cfg.schedule.beta_max = 0.2;
        cfg.daps.levels = 10;
        cfg.daps.langevin_iters = 10;
        cfg.sweep.eta_multipliers = vec![0.1, 1.0];
        cfg.sweep.subspaces = vec![Subspace::None, Subspace::Random, Subspace::Gradient, Subspace::State];
        if op == "phase_retrieval" {
            cfg.metrics.best_of = 2;
            cfg.guidance.step_size = 0.02;
        }
        if solver == "daps" {
            cfg.metrics.posterior_samples = 3;
        }
        cfg.experiment.workers = 1;
        let serial = csv_without_timing(&run_experiment(&cfg).unwrap());
        cfg.experiment.workers = 0;
        let first = csv_without_timing(&run_experiment(&cfg).unwrap());
        let second = csv_without_timing(&run_experiment(&cfg).unwrap());
        if serial != first || first != second {
            differing.push(solver);
        }
    }
    Outcome {
        id: 12,
        name: "determinism",
        pass: differing.is_empty(),
        detail: if differing.is_empty() {
            "metric columns identical across reruns and worker counts for all four solvers".into()
        } else {
            format!("differs for {}", differing.join(", "))
        },
    }
}

fn report(o: &Outcome) {
    println!(
        "AC{:<2} {} {}: {}",
        o.id,
        if o.pass { "PASS" } else { "FAIL" },
        o.name,
        o.detail
    );
}

fn main() {
    // Positional arguments like `AC7` select criteria; libtest flags are ignored.
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let wanted = |id: usize| filters.is_empty() || filters.iter().any(|f| f.eq_ignore_ascii_case(&format!("AC{id}")));

    let start = Instant::now();
    let random_mask = testbed("dps", "random_mask", 24);
    let mut tuned = None;
    let mut default = || *tuned.get_or_insert_with(|| tuned_multiplier(&random_mask));
    let mut outcomes = Vec::new();
    for id in 1..=12 {
        if !wanted(id) {
            continue;
        }
        let o = match id {
            1 => projection_algebra(),
            2 => rank_oracle(),
            3 => linear_manifolds(),
            4 => spheres(),
            5 => gradients(),
            6 => conjugate_posterior(),
            7 => step_size_robustness(default(), &random_mask),
            8 => noise_robustness(),
            9 => failure_rate(),
            10 => subspace_choice(default(), &random_mask),
            11 => tau_robustness(),
            _ => determinism(),
        };
        report(&o);
        outcomes.push(o);
    }

    let failed: Vec<String> = outcomes
        .iter()
        .filter(|o| !o.pass)
        .map(|o| format!("AC{}", o.id))
        .collect();
    println!(
        "{}/{} criteria pass in {:.0}s{}",
        outcomes.len() - failed.len(),
        outcomes.len(),
        start.elapsed().as_secs_f64(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; failing: {}", failed.join(" "))
        }
    );
    if !failed.is_empty() && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
