use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pmms_bench::{history, ledger_ops, replay, Fixture};
use pmms_core::experiments::accuracy::run_accuracy_with;
use pmms_core::experiments::delay::simulate;
use pmms_core::mobility::MobilityConfig;
use pmms_core::prediction::{build_tm, mine_rules, predict_dm, MiningConfig};
use pmms_core::radio::{friis_rssi, RadioConfig};
use pmms_core::PathHistory;

fn radio(c: &mut Criterion) {
    let cfg = RadioConfig::default();
    c.bench_function("friis_rssi", |b| {
        b.iter(|| friis_rssi(&cfg, black_box(73.5)))
    });
}

fn corpus(c: &mut Criterion) {
    let (topo, _) = history(1, 0);
    let cfg = MobilityConfig::history();
    c.bench_function("generate_history_10k", |b| {
        b.iter(|| PathHistory::generate(black_box(10_000), &topo, &cfg, 42))
    });
}

fn mining(c: &mut Criterion) {
    let mut group = c.benchmark_group("mine_rules");
    for n in [1_000, 10_000] {
        let (_, h) = history(n, 7);
        group.bench_with_input(BenchmarkId::from_parameter(n), &h, |b, h| {
            b.iter(|| mine_rules(h, &MiningConfig::default()))
        });
    }
    group.finish();

    let (_, h) = history(10_000, 7);
    c.bench_function("build_tm_10k", |b| b.iter(|| build_tm(black_box(&h))));
}

fn prediction(c: &mut Criterion) {
    let fx = Fixture::new(10_000, 1);
    let prefix = fx.trained.history.paths[0].aps();
    let cur = *prefix.last().expect("paths are non-empty");
    let candidates = fx.topo.neighbors(cur).to_vec();
    c.bench_function("predict_dm", |b| {
        b.iter(|| predict_dm(&fx.trained.rules, black_box(&prefix), &candidates))
    });
}

fn experiments(c: &mut Criterion) {
    let fx = Fixture::new(10_000, 1);
    let mut group = c.benchmark_group("experiments");
    group.sample_size(20);
    group.bench_function("accuracy_1000_paths", |b| {
        b.iter(|| run_accuracy_with(&fx.cfg, &fx.topo, &fx.trained))
    });
    group.bench_function("delay_100_paths", |b| {
        b.iter(|| simulate(&fx.cfg, &fx.topo, &fx.trained, 100, true))
    });
    group.finish();
}

fn ledger(c: &mut Criterion) {
    let ops = ledger_ops(100_000, 5);
    c.bench_function("ledger_100k_ops", |b| b.iter(|| replay(black_box(&ops))));
}

criterion_group!(
    benches,
    radio,
    corpus,
    mining,
    prediction,
    experiments,
    ledger
);
criterion_main!(benches);
