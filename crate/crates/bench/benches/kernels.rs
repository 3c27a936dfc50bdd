use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use hcon::data::{synth_planted, SynthConfig};
use hcon::experiments::build_context;
use hcon::trainer::{draw_randomization, init_params, sgd_train, SgdConfig};
use hcon::{Activation, IncidenceScale, Loss, NormalizedIncidence};

fn kernels(c: &mut Criterion) {
    let ds = synth_planted(&SynthConfig { n: 1000, m: 750, ..Default::default() }).unwrap().dataset;
    let ni = NormalizedIncidence::new(ds.hypergraph(), IncidenceScale::Normalized);
    c.bench_function("spectral_norm_n1000", |b| b.iter(|| black_box(&ni).spectral_norm_default().unwrap()));
    c.bench_function("context_build_n1000", |b| {
        b.iter(|| build_context(black_box(&ds), 0.5, IncidenceScale::Normalized).unwrap())
    });

    let ctx = build_context(&ds, 0.5, IncidenceScale::Normalized).unwrap();
    let s = ds.training_set(&(0..500).collect::<Vec<_>>()).unwrap();
    let cfg = SgdConfig { iterations: 10_000, ..Default::default() };
    let theta0 = init_params(ctx.vertex_dim(), ctx.edge_dim(), 1, 1, 0.1).unwrap();
    let order = draw_randomization(s.len(), cfg.iterations, 2).unwrap();
    let loss = Loss::Squared { y_min: 0.0, y_max: 1.0 };
    c.bench_function("sgd_10k_steps", |b| {
        b.iter(|| sgd_train(&ctx, &theta0, &s, &order, &cfg, Activation::Sigmoid, loss).unwrap())
    });
}

criterion_group!(benches, kernels);
criterion_main!(benches);
