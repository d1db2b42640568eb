//! Sequential vs parallel execution of the main data-parallel loops.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use stratakit_core::bundle::DisSampleConfig;
use stratakit_core::kernel::Vector;
use stratakit_core::par::Execution;
use stratakit_core::sets::ClosedSet;
use stratakit_core::stratify::classify_probes;
use stratakit_core::verify::{campaign_projection_lipschitz, CampaignConfig};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn projection_campaign(c: &mut Criterion) {
    let cube = ClosedSet::cuboid(&[0.0; 3], &[1.0; 3]).unwrap();
    let mut group = c.benchmark_group("projection_lipschitz_cube");
    group.sample_size(10);
    for (name, exec) in MODES {
        let cfg = CampaignConfig {
            samples: 2_000,
            seed: 7,
            exec,
            ..CampaignConfig::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(name), &cfg, |b, cfg| {
            b.iter(|| black_box(campaign_projection_lipschitz(&cube, 0.4, 0.2, cfg).unwrap()))
        });
    }
    group.finish();
}

fn probe_classification(c: &mut Criterion) {
    let cube = ClosedSet::cuboid(&[0.0; 3], &[1.0; 3]).unwrap();
    let probes: Vec<Vector> = cube.sample_boundary(200, 3);
    let dis = DisSampleConfig::for_set(&cube);
    let mut group = c.benchmark_group("classify_probes_cube");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| black_box(classify_probes(&cube, &probes, &[0.25], &dis, exec).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, projection_campaign, probe_classification);
criterion_main!(benches);
