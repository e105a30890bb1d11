//! Parallel against sequential execution on the hot paths: one full2d
//! right-hand-side evaluation, and a batch of curvature-function samples.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hicf_core::curvature::{CurvatureFunction, CurvatureKind};
use hicf_core::flow::{evaluate, FlowParams, InitialCondition};
use hicf_core::sphere::GridMode;
use hicf_core::Exec;
use std::hint::black_box;

const STRATEGIES: [(&str, Exec); 2] = [("parallel", Exec::Parallel), ("sequential", Exec::Sequential)];

fn rhs_full2d(c: &mut Criterion) {
    let mut group = c.benchmark_group("evaluate_full2d");
    for res in [32, 64, 128] {
        let mut params = FlowParams::new(2, 1.0, CurvatureKind::Mean);
        params.mode = GridMode::Full2d;
        params.resolution = res;
        let u = InitialCondition::Legendre { r0: 1.0, l: 2, amplitude: 0.1 }
            .sample(params.build_grid().unwrap())
            .unwrap();
        for (name, exec) in STRATEGIES {
            params.exec = exec;
            group.bench_with_input(BenchmarkId::new(name, res), &params, |b, params| {
                b.iter(|| evaluate(black_box(&u), 0.0, params).unwrap())
            });
        }
    }
    group.finish();
}

fn curvature_batch(c: &mut Criterion) {
    let f = CurvatureFunction::new(CurvatureKind::Sigma2Root, 4);
    let samples: Vec<[f64; 4]> = (0..100_000)
        .map(|i| {
            let x = i as f64 * 1e-5;
            [1.0 + x, 1.5 - 0.5 * x, 0.7 + 0.3 * x, 2.0]
        })
        .collect();
    let mut group = c.benchmark_group("sigma2_root_batch");
    for (name, exec) in STRATEGIES {
        group.bench_function(name, |b| {
            b.iter(|| exec.map(samples.len(), |i| f.eval_with_trace(&samples[i]).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, rhs_full2d, curvature_batch);
criterion_main!(benches);
