use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lcd_bench::panel_dataset;
use lcd_core::boosting::{l2_boost, SystemBooster};
use lcd_core::indep::mean_var_invariance_test;
use lcd_core::lcd::lcd_predict;
use lcd_core::{BoostParams, LcdConfig, Matrix, TestKind};

fn boosting(c: &mut Criterion) {
    let mut group = c.benchmark_group("l2_boost");
    for p in [50, 200] {
        let ds = panel_dataset(p, p / 2, 200, 3).unwrap();
        let target = p - 1;
        let columns: Vec<&[f64]> = (0..p).filter(|&j| j != target).map(|j| ds.column(j)).collect();
        let predictors = Matrix::from_columns(ds.n_samples(), &columns).unwrap();
        group.bench_with_input(BenchmarkId::new("direct", p), &p, |b, _| {
            b.iter(|| l2_boost(black_box(&predictors), ds.column(target), 100, 0.1).unwrap())
        });
        let booster = SystemBooster::new(ds.system()).unwrap();
        group.bench_with_input(BenchmarkId::new("gram", p), &p, |b, _| {
            b.iter(|| booster.boost(black_box(target), 100, 0.1).unwrap())
        });
    }
    group.finish();
}

fn mean_variance(c: &mut Criterion) {
    let ds = panel_dataset(50, 25, 400, 5).unwrap();
    let candidates = Matrix::from_columns(ds.n_samples(), &[ds.column(0), ds.column(1)]).unwrap();
    c.bench_function("mean_var_test/n=425", |b| {
        b.iter(|| mean_var_invariance_test(black_box(ds.column(2)), &candidates, ds.context(), 0.01).unwrap())
    });
}

fn lcd(c: &mut Criterion) {
    let ds = panel_dataset(60, 30, 200, 7).unwrap();
    let mut group = c.benchmark_group("lcd_predict");
    group.sample_size(10);
    for (kind, preselect) in
        [(TestKind::PartialCorrelation, false), (TestKind::PartialCorrelation, true), (TestKind::MeanVariance, true)]
    {
        let config = LcdConfig { alpha: 0.01, test_kind: kind, preselect, boost: BoostParams::default() };
        group.bench_function(config.name(), |b| b.iter(|| lcd_predict(black_box(&ds), &config).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, boosting, mean_variance, lcd);
criterion_main!(benches);
