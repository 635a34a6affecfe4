//! Compares the data-parallel batch paths against their sequential
//! twins on the three hot workloads: frame rendering, flow warping,
//! and per-sample training gradients.
//!
//! Build with the default `parallel` feature to get both arms; without
//! it the `parallel` arm degenerates to the sequential path.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use echopt_core::dataset::{generate_dataset, make_stacks, FrameStack, GenOptions};
use echopt_core::flow::flow_warp;
use echopt_core::net::{build_model, sample_loss_and_grads, EchoPTConfig};
use echopt_core::parallel::{par_map, par_map_range, seq_map, seq_map_range};
use echopt_core::sim::render::render_energyscape;
use echopt_core::{Pose2D, ReflectorMap, SensorConfig, VelocityCommand};

fn render_poses() -> (ReflectorMap, SensorConfig, Vec<Pose2D>) {
    let world = ReflectorMap::corridor(12.0, 1.25, 1.0);
    let sensor = SensorConfig::default();
    let poses: Vec<Pose2D> = (0..32)
        .map(|i| Pose2D::new(0.4 + 0.3 * i as f64, 0.1 * ((i % 5) as f64 - 2.0), 0.05).unwrap())
        .collect();
    (world, sensor, poses)
}

fn bench_render(c: &mut Criterion) {
    let (world, sensor, poses) = render_poses();
    let mut group = c.benchmark_group("render_32_frames");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        b.iter(|| {
            black_box(seq_map(&poses, |p| {
                render_energyscape(&world, *p, &sensor).unwrap()
            }))
        })
    });
    group.bench_function("parallel", |b| {
        b.iter(|| {
            black_box(par_map(&poses, |p| {
                render_energyscape(&world, *p, &sensor).unwrap()
            }))
        })
    });
    group.finish();
}

fn bench_flow_warp(c: &mut Criterion) {
    let (world, sensor, poses) = render_poses();
    let frames: Vec<_> = poses
        .iter()
        .map(|p| render_energyscape(&world, *p, &sensor).unwrap())
        .collect();
    let cmd = VelocityCommand::new(0.25, 0.4);
    let mut group = c.benchmark_group("flow_warp_32_frames");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(seq_map(&frames, |f| flow_warp(f, cmd, 0.2).unwrap())))
    });
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(par_map(&frames, |f| flow_warp(f, cmd, 0.2).unwrap())))
    });
    group.finish();
}

fn training_batch() -> (echopt_core::net::ModelParams, Vec<FrameStack>) {
    let world = ReflectorMap::corridor(12.0, 1.25, 1.0);
    let sensor = SensorConfig::default();
    let ds = generate_dataset(
        &world,
        &sensor,
        12.0,
        5,
        &GenOptions {
            snr_db: Some(5.0),
            ..GenOptions::default()
        },
    )
    .unwrap();
    let stacks = make_stacks(&ds, 3);
    let cfg = EchoPTConfig::toy();
    let params = build_model(&cfg, 1).unwrap();
    (params, stacks.into_iter().take(8).collect())
}

fn bench_minibatch_gradients(c: &mut Criterion) {
    let (params, stacks) = training_batch();
    let mut group = c.benchmark_group("minibatch_8_gradients");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        b.iter(|| {
            black_box(seq_map_range(stacks.len(), |i| {
                sample_loss_and_grads(&params, &stacks[i]).unwrap().0
            }))
        })
    });
    group.bench_function("parallel", |b| {
        b.iter(|| {
            black_box(par_map_range(stacks.len(), |i| {
                sample_loss_and_grads(&params, &stacks[i]).unwrap().0
            }))
        })
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_render,
    bench_flow_warp,
    bench_minibatch_gradients
);
criterion_main!(benches);
