use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use fdi_core::case_study::{CaseStudy, DEFAULT_K};
use fdi_core::causal::Dag;
use fdi_core::eb::{build_features, train};
use fdi_core::mb::{diagnose, evaluate_residuals};
use fdi_core::{simulate, ForestConfig, Label, Method, NoiseSpec, SimConfig};

fn simulation(c: &mut Criterion) {
    let cs = CaseStudy::default();
    let fault = Label::R0Down.default_fault();
    let noise = NoiseSpec::new(0.02, 42).unwrap();
    c.bench_function("simulate/closed_form", |b| {
        b.iter(|| simulate(&cs.params, &cs.schedule, fault.as_ref(), Some(&noise), &cs.sim).unwrap())
    });
    let rk = SimConfig {
        method: Method::RungeKutta4,
        ..cs.sim
    };
    c.bench_function("simulate/rk4", |b| {
        b.iter(|| simulate(&cs.params, &cs.schedule, fault.as_ref(), None, &rk).unwrap())
    });
}

fn residuals(c: &mut Criterion) {
    let cs = CaseStudy::default();
    let thr = cs.calibrated_thresholds(DEFAULT_K).unwrap();
    let noise = NoiseSpec::new(0.02, 7).unwrap();
    let trace = cs.scenario(Label::CapUp, Some(&noise)).unwrap();
    c.bench_function("mb/evaluate_residuals", |b| {
        b.iter(|| evaluate_residuals(black_box(&trace), &cs.params, &thr).unwrap())
    });
    c.bench_function("mb/diagnose", |b| {
        b.iter(|| diagnose(black_box(&trace), &cs.params, &thr).unwrap())
    });
}

fn forest(c: &mut Criterion) {
    let cs = CaseStudy::default();
    let fm = build_features(&cs.training_traces().unwrap()).unwrap();
    let cfg = ForestConfig {
        n_trees: 20,
        ..ForestConfig::default()
    };
    let mut group = c.benchmark_group("eb");
    group.sample_size(10);
    group.bench_function("train_20_trees", |b| b.iter(|| train(black_box(&fm), &cfg).unwrap()));
    let model = train(&fm, &ForestConfig::default()).unwrap();
    group.bench_function("accuracy_100_trees", |b| {
        b.iter(|| model.accuracy(black_box(&fm)).unwrap())
    });
    group.finish();
}

fn dsep(c: &mut Criterion) {
    let dag = Dag::from_edges(&[
        ("R0", "Flow"),
        ("C", "Flow"),
        ("S1", "Flow"),
        ("Flow", "V0"),
        ("Flow", "V1"),
        ("Flow", "V2"),
    ])
    .unwrap();
    c.bench_function("causal/d_separated", |b| {
        b.iter(|| dag.d_separated(black_box(&["S1"]), &["R0", "C"], &["V1"]).unwrap())
    });
    c.bench_function("causal/implied_independencies", |b| {
        b.iter(|| dag.implied_independencies(2))
    });
}

criterion_group!(benches, simulation, residuals, forest, dsep);
criterion_main!(benches);
