use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use evhc::hosting::{feeder_sweep, FleetKind, HostingConfig, SearchConfig};
use evhc::ingest::{synth_feeder, SynthSpec};
use evhc::model::Formulation;
use evhc::par::ExecMode;
use evhc::scenario::{sample_scenarios_with, UncertaintyConfig};

const MODES: [(&str, ExecMode); 2] = [
    ("sequential", ExecMode::Sequential),
    ("parallel", ExecMode::Parallel),
];

fn sampling(c: &mut Criterion) {
    let cfg = UncertaintyConfig::default();
    let mut group = c.benchmark_group("sample_scenarios");
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::new(name, "30x2000"), &mode, |b, &mode| {
            b.iter(|| sample_scenarios_with(mode, &cfg, 30, 2000, 7))
        });
    }
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let feeder = synth_feeder(&SynthSpec::with_count(4)).unwrap();
    let cfg = HostingConfig::default();
    let search = SearchConfig {
        max_ev: 2,
        ..SearchConfig::default()
    };
    let mut group = c.benchmark_group("feeder_sweep");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::new(name, "4x4x2"), &mode, |b, &mode| {
            b.iter(|| {
                feeder_sweep(
                    &feeder.transformers,
                    &FleetKind::ALL,
                    &[Formulation::Robust, Formulation::ChanceConstrained],
                    &cfg,
                    &search,
                    mode,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, sampling, sweep);
criterion_main!(benches);
