//! Benchmarks along the simulation pipeline: setup generation, fading
//! draws, the combining stages, and a small end-to-end campaign.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use cellfree_bench::Fixture;
use cellfree_core::assignment::assign;
use cellfree_core::combining::{c_mmse, local_combiners};
use cellfree_core::maduo::{asap_message, build_map_problem, maduo_sinr};
use cellfree_core::topology::generate_setup;
use cellfree_core::{run_campaign, ChannelRealization, EstimationScope, NetworkConfig, Scheme};

fn bench_setup(c: &mut Criterion) {
    let cfg = NetworkConfig::default();
    c.bench_function("setup/generate_and_assign", |b| {
        b.iter(|| {
            let (_, stats) = generate_setup(black_box(&cfg), 0).unwrap();
            black_box(assign(&stats, &cfg).unwrap())
        })
    });
}

fn bench_realization(c: &mut Criterion) {
    let f = Fixture::new(25, 2, 10, 5);
    c.bench_function("realization/draw_and_estimate", |b| {
        let mut r = 0u64;
        b.iter(|| {
            r += 1;
            black_box(
                ChannelRealization::generate(
                    &f.factors,
                    &f.stats,
                    &f.model,
                    &f.assignment,
                    &f.cfg,
                    0,
                    r,
                )
                .unwrap(),
            )
        })
    });
}

fn bench_combining(c: &mut Criterion) {
    let f = Fixture::new(25, 2, 10, 5);
    let view = f.view(EstimationScope::AllUes);
    c.bench_function("combining/centralized_all_ues", |b| {
        b.iter(|| {
            for ue in 0..f.cfg.ue_count {
                black_box(c_mmse(&view, ue, &f.cfg).unwrap());
            }
        })
    });
    c.bench_function("combining/local_all_aps", |b| {
        b.iter(|| black_box(local_combiners(&view, &f.cfg).unwrap()))
    });
}

fn bench_fused(c: &mut Criterion) {
    let f = Fixture::new(25, 2, 10, 5);
    let view = f.view(EstimationScope::AllUes);
    let local = local_combiners(&view, &f.cfg).unwrap();
    c.bench_function("fused/reports_problem_sinr", |b| {
        b.iter(|| {
            for ue in 0..f.cfg.ue_count {
                let messages: Vec<_> = f
                    .assignment
                    .assisting_aps(ue)
                    .into_iter()
                    .map(|ap| {
                        let slot = f
                            .assignment
                            .served_ues(ap)
                            .iter()
                            .position(|&u| u == ue)
                            .unwrap();
                        asap_message(&view, ap, ue, &local[ap][slot], &f.cfg).unwrap()
                    })
                    .collect();
                let problem = build_map_problem(&view, ue, &messages, &f.cfg).unwrap();
                black_box(maduo_sinr(&problem, &f.cfg).unwrap());
            }
        })
    });
}

fn bench_campaign(c: &mut Criterion) {
    let cfg = NetworkConfig {
        ap_count: 9,
        antennas_per_ap: 2,
        ue_count: 6,
        side_length_m: 600.0,
        pilot_samples: 3,
        num_setups: 2,
        num_realizations: 10,
        ..NetworkConfig::default()
    };
    c.bench_function("campaign/small_all_schemes", |b| {
        b.iter(|| black_box(run_campaign(black_box(&cfg), &Scheme::ALL).unwrap()))
    });
}

criterion_group!(
    benches,
    bench_setup,
    bench_realization,
    bench_combining,
    bench_fused,
    bench_campaign
);
criterion_main!(benches);
