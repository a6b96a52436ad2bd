use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use macrostate::evolve::{evolve_with, InitialState};
use macrostate::mppp::{compute_mppp, disconnected_partitions};
use macrostate::numerics::Tolerance;
use macrostate::par::Execution;
use macrostate::quantum::{Channel, DensityMatrix};
use macrostate::random::{
    random_channel, random_density_matrix, random_frame_inputs, random_hermitian, random_povm, seeded, FrameKind,
};
use macrostate::resources::{classify_batch, scenario_coherence};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn bench_partitions(c: &mut Criterion) {
    let mut rng = seeded(1);
    let p = random_povm(4, 8, &mut rng);
    let g = random_density_matrix(4, &mut rng);
    let tol = Tolerance::default();
    let mut group = c.benchmark_group("brute_force_partitions");
    for (name, mode) in MODES {
        group.bench_function(BenchmarkId::new(name, p.len()), |b| {
            b.iter(|| disconnected_partitions(&p, &g, &tol, mode).unwrap())
        });
    }
    group.finish();
}

fn bench_classify(c: &mut Criterion) {
    let mut rng = seeded(2);
    let (p, g) = random_frame_inputs(4, 5, FrameKind::Block, &mut rng);
    let frame = compute_mppp(&p, &g).unwrap();
    let channels: Vec<Channel> = (0..200).map(|_| random_channel(4, 4, 2, &mut rng)).collect();
    let mut group = c.benchmark_group("classify_batch");
    for (name, mode) in MODES {
        group.bench_function(BenchmarkId::new(name, channels.len()), |b| {
            b.iter(|| classify_batch(&channels, &frame, mode).unwrap())
        });
    }
    group.finish();
}

fn bench_evolve(c: &mut Criterion) {
    let mut rng = seeded(3);
    let frame = scenario_coherence(4).unwrap();
    let h = random_hermitian(4, &mut rng);
    let init = InitialState::State(DensityMatrix::from_diagonal(&[1.0, 0.0, 0.0, 0.0]).unwrap());
    let mut group = c.benchmark_group("evolve");
    for (name, mode) in MODES {
        group.bench_function(BenchmarkId::new(name, 2000), |b| {
            b.iter(|| evolve_with(&frame, &h, 10.0, 2000, &init, mode).unwrap())
        });
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_partitions, bench_classify, bench_evolve
}

criterion_main!(benches);
