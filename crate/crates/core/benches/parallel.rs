use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use skyclust::clustering::elbow_curve;
use skyclust::config::PipelineConfig;
use skyclust::headselect::{assign_radios, select_heads, HeadParams};
use skyclust::mobility::{simulate_random_waypoint_with, ArenaConfig};
use skyclust::par::Execution;
use skyclust::pipeline::run_all;
use skyclust::traffic::{generate_workload, TrafficParams};
use skyclust::Point;

const STRATEGIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn points(n: usize) -> Vec<Point> {
    let cfg = ArenaConfig {
        num_stations: n,
        duration: 1.0,
        seed: 7,
        ..ArenaConfig::default()
    };
    let t = simulate_random_waypoint_with(Execution::Sequential, &cfg).unwrap();
    t.stations().map(|s| s[0].position()).collect()
}

fn mobility(c: &mut Criterion) {
    let cfg = ArenaConfig {
        num_stations: 64,
        duration: 600.0,
        seed: 1,
        ..ArenaConfig::default()
    };
    let mut g = c.benchmark_group("mobility");
    for (name, exec) in STRATEGIES {
        g.bench_function(name, |b| b.iter(|| simulate_random_waypoint_with(exec, &cfg).unwrap()));
    }
    g.finish();
}

fn elbow(c: &mut Criterion) {
    let pts = points(200);
    let mut g = c.benchmark_group("elbow");
    for (name, exec) in STRATEGIES {
        g.bench_function(name, |b| b.iter(|| elbow_curve(exec, &pts, 10, 10, 3).unwrap()));
    }
    g.finish();
}

fn heads(c: &mut Criterion) {
    let pts = points(800);
    let radios = assign_radios(&pts, (60.0, 80.0), 5);
    let clusters: Vec<Vec<usize>> = (0..8)
        .map(|c| (0..pts.len()).filter(|i| i % 8 == c).collect())
        .collect();
    let params = HeadParams::default();
    let mut g = c.benchmark_group("heads");
    for (name, exec) in STRATEGIES {
        g.bench_function(name, |b| {
            b.iter(|| select_heads(exec, &clusters, &radios, &params).unwrap())
        });
    }
    g.finish();
}

fn workload(c: &mut Criterion) {
    let params = TrafficParams {
        packets_per_station: 2000,
        ..TrafficParams::default()
    };
    let mut g = c.benchmark_group("workload");
    for (name, exec) in STRATEGIES {
        g.bench_function(name, |b| b.iter(|| generate_workload(exec, 64, &params).unwrap()));
    }
    g.finish();
}

fn pipeline(c: &mut Criterion) {
    let cfg = PipelineConfig::default();
    let mut g = c.benchmark_group("pipeline");
    g.sample_size(10);
    for (name, exec) in STRATEGIES {
        g.bench_with_input(BenchmarkId::new("run_all", name), &cfg, |b, cfg| {
            b.iter(|| run_all(exec, cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, mobility, elbow, heads, workload, pipeline);
criterion_main!(benches);
