use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use vnfp_core::energy::EnergyReport;
use vnfp_core::homogeneous::GridSpec;
use vnfp_core::perturbation::{Formulation, PerturbationConfig, PerturbationStepper};
use vnfp_core::{Execution, GridKind};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn config(n_x: usize, n_p: usize) -> PerturbationConfig {
    PerturbationConfig {
        n_x,
        momentum: GridSpec { kind: GridKind::Line1d, n: n_p, domain_max: 8.0 },
        ..Default::default()
    }
}

fn perturbation_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("perturbation_step");
    group.sample_size(20);
    for (n_x, n_p) in [(32, 256), (64, 512)] {
        let cfg = config(n_x, n_p);
        let grids = cfg.grids().unwrap();
        let init = cfg.initial_state(&grids);
        for (name, exec) in MODES {
            let mut stepper = PerturbationStepper::new(grids.clone(), Formulation::Physical, cfg.dt, exec).unwrap();
            group.bench_with_input(BenchmarkId::new(name, format!("{n_x}x{n_p}")), &init, |b, init| {
                b.iter_batched(
                    || init.clone(),
                    |mut s| {
                        stepper.step(&mut s).unwrap();
                        black_box(s)
                    },
                    criterion::BatchSize::LargeInput,
                )
            });
        }
    }
    group.finish();
}

fn energy_report(c: &mut Criterion) {
    let mut group = c.benchmark_group("energy_report");
    let cfg = config(64, 512);
    let grids = cfg.grids().unwrap();
    let state = cfg.initial_state(&grids);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, "k2"), |b| {
            b.iter(|| EnergyReport::compute(black_box(&state), &grids, &[0.25, 1.0], 2, Formulation::Physical, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, perturbation_step, energy_report);
criterion_main!(benches);
