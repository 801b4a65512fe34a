use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use tedsim::circuit::{quantize, CircuitParams, FluxPoint};
use tedsim::protocols::{
    emission_drive, reflection, run_protocol, simulate_emission, NetworkOptions, NetworkParams, ProtocolSpec, RunOptions,
};
use tedsim::ted::TedParams;
use tedsim_bench::excited;

fn circuit(c: &mut Criterion) {
    let p = CircuitParams::table_one();
    c.bench_function("quantize", |b| b.iter(|| quantize(black_box(&p), &FluxPoint::dc(0.3)).unwrap()));
}

fn steady(c: &mut Criterion) {
    let ted = TedParams::table_one_detector();
    c.bench_function("reflection_w3", |b| b.iter(|| reflection(black_box(&ted), 0.1, 0.0, 3).unwrap()));
}

fn emission(c: &mut Criterion) {
    let ted = TedParams::table_one_source();
    let eff = emission_drive(&ted, 0.472, 1e-6, 2e-6).unwrap();
    let opts = RunOptions::default();
    let psi = excited();
    c.bench_function("emission_2us", |b| b.iter(|| simulate_emission(&eff, &psi, (0.0, 3e-6), &opts).unwrap()));
}

fn network(c: &mut Criterion) {
    let params = NetworkParams::table_one();
    let proto = ProtocolSpec::pitch_detect(2e-6, 3e-6, 2e-6, 1.5e-6, 4e-6);
    let opts = NetworkOptions::default();
    let mut g = c.benchmark_group("network");
    g.sample_size(10);
    g.bench_function("pitch_detect_run", |b| b.iter(|| run_protocol(&params, &proto, &opts).unwrap()));
    g.finish();
}

criterion_group!(benches, circuit, steady, emission, network);
criterion_main!(benches);
