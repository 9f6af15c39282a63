use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dsg_core::solvers::{run_dps, Autoencoder, GuidanceConfig, Problem, StepSize};
use dsg_core::{make_vp_schedule, ForwardOperator, GmmPrior};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

// Full 50-step guided trajectories, with and without projection.
fn bench_dps(c: &mut Criterion) {
    let mut group = c.benchmark_group("dps_50_steps");
    group.sample_size(20);
    let sched = make_vp_schedule(50, 1e-4, 0.24).unwrap();
    for n in [8, 16] {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let prior = GmmPrior::random_low_rank(n, n, 4, 2, 0.5, 1e-3, &mut rng).unwrap();
        let op = ForwardOperator::random_mask((n, n), 0.3, &mut rng).unwrap();
        let y = op.make_measurement(&prior.sample(&mut rng), 0.05, &mut rng).unwrap().y;
        let ae = Autoencoder::Identity;
        let problem = Problem::new(&prior, &op, &y, &ae);
        let on = GuidanceConfig {
            step_size: StepSize::Constant(0.3),
            ..GuidanceConfig::default()
        };
        for (label, cfg) in [("state", on.clone()), ("none", on.clone().unprojected())] {
            group.bench_with_input(BenchmarkId::new(label, n), &cfg, |b, cfg| {
                b.iter(|| run_dps(&problem, &sched, cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, bench_dps);
criterion_main!(benches);
