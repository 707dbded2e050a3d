use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};

use gaitq_core::dynamics::step;
use gaitq_core::qlearn::train;
use gaitq_core::rng::{stream, Stream};
use gaitq_core::{
    FeedbackParticleFilter, LearnConfig, OscillatorEnsemble, PhaseModel, PhysicalParams, Pipeline, PipelineConfig,
    SensorConfig, SimState,
};

fn config(particles: usize) -> PipelineConfig {
    PipelineConfig {
        physical: PhysicalParams::default(),
        sensor: SensorConfig::new(0.1, 0.01).unwrap(),
        phase: PhaseModel::default(),
        particles,
        delta: 0.12,
    }
}

fn dynamics(c: &mut Criterion) {
    let p = PhysicalParams::default();
    let s = SimState { x: 0.3, x_dot: -0.2, q: 0.0, t: 1.0 };
    c.bench_function("rk4 step", |b| b.iter(|| step(black_box(&s), black_box(0.1), &p, 0.01).unwrap()));
}

fn filter(c: &mut Criterion) {
    let ens = OscillatorEnsemble::init(1000, 1.0, 0.12, &mut stream(1, Stream::ParticleInit)).unwrap();
    let base = FeedbackParticleFilter::new(ens, PhaseModel::default(), 0.1, 0.01);
    c.bench_function("fpf update, N=1000", |b| {
        b.iter_batched_ref(|| base.clone(), |f| f.update(black_box(0.003)).unwrap(), BatchSize::SmallInput)
    });
}

fn pipeline(c: &mut Criterion) {
    let cfg = config(1000);
    let base = Pipeline::new(&cfg, 3).unwrap();
    c.bench_function("pipeline step, N=1000", |b| {
        b.iter_batched_ref(|| base.clone(), |p| p.step(black_box(0.1)).unwrap(), BatchSize::SmallInput)
    });
}

fn training(c: &mut Criterion) {
    let cfg = config(200);
    let learn = LearnConfig { horizon_periods: 2.0, warmup_periods: 1.0, ..Default::default() };
    let mut group = c.benchmark_group("training");
    group.sample_size(20);
    group.bench_function("two periods, N=200", |b| b.iter(|| train(&cfg, &learn, 5, |_| {}).unwrap()));
    group.finish();
}

criterion_group!(benches, dynamics, filter, pipeline, training);
criterion_main!(benches);
