use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use stochnls::estimators::{
    ensemble_series, uniform_start, Ensemble, Observable, SeriesMode, WeakErrorPlan,
};
use stochnls::{Execution, LatticeConfig, NoiseOperators, Scheme};

fn modes() -> Vec<(&'static str, Execution)> {
    vec![
        ("sequential", Execution::Sequential),
        ("parallel", Execution::Parallel),
    ]
}

fn charge_series(c: &mut Criterion) {
    let cfg = LatticeConfig::focusing(19, 30).unwrap();
    let ops = NoiseOperators::new(&cfg);
    let mut group = c.benchmark_group("charge_series_m19_64paths");
    group.sample_size(10);
    for (name, exec) in modes() {
        let mut ens = Ensemble::new(&cfg, &ops, uniform_start(&cfg));
        ens.n_paths = 64;
        ens.exec = exec;
        group.bench_with_input(BenchmarkId::from_parameter(name), &ens, |b, ens| {
            b.iter(|| {
                let s = ensemble_series(
                    ens,
                    Scheme::Midpoint,
                    2f64.powi(-7),
                    1.0,
                    &Observable::Charge,
                    SeriesMode::Instant,
                    16,
                )
                .unwrap();
                black_box(s)
            })
        });
    }
    group.finish();
}

fn weak_sweep(c: &mut Criterion) {
    let cfg = LatticeConfig::focusing(19, 30).unwrap();
    let ops = NoiseOperators::new(&cfg);
    let plan = WeakErrorPlan {
        scheme: Scheme::Midpoint,
        taus: vec![2f64.powi(-6), 2f64.powi(-7), 2f64.powi(-8)],
        refinement: 2,
        checkpoints: vec![0.25],
    };
    let obs = [
        Observable::PNorm3,
        Observable::SinPNorm4,
        Observable::ExpNegPNorm4,
    ];
    let mut group = c.benchmark_group("weak_sweep_m19_32paths");
    group.sample_size(10);
    for (name, exec) in modes() {
        let mut ens = Ensemble::new(&cfg, &ops, uniform_start(&cfg));
        ens.n_paths = 32;
        ens.exec = exec;
        group.bench_with_input(BenchmarkId::from_parameter(name), &ens, |b, ens| {
            b.iter(|| black_box(plan.run(ens, &obs).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, charge_series, weak_sweep);
criterion_main!(benches);
