use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use rca_core::causal_model::{Dag, Fcm, Mechanism, NodeModel, NoiseModel};
use rca_core::synth::{random_dag, random_mechanisms, SynthConfig};
use rca_core::{shapley_attribution, AttributionConfig, ShapleyMode};

fn chain() -> Fcm {
    let dag = Dag::new(&["X", "Y"], &[("X", "Y")]).unwrap();
    let g = || NoiseModel::gaussian(0.0, 1.0).unwrap();
    Fcm::new(
        dag,
        vec![
            NodeModel::new(Mechanism::Empty { center: 0.0 }, g()),
            NodeModel::new(Mechanism::Linear { coefficients: vec![1.0], intercept: 0.0 }, g()),
        ],
    )
    .unwrap()
}

fn chain_exact(c: &mut Criterion) {
    let fcm = chain();
    let obs = fcm.evaluate(&[2.0, 1.0]).unwrap();
    let mut g = c.benchmark_group("shapley_chain");
    g.sample_size(10);
    for samples in [10_000, 100_000] {
        let cfg = AttributionConfig { mc_samples: samples, seed: 1, ..Default::default() };
        g.bench_with_input(BenchmarkId::from_parameter(samples), &cfg, |b, cfg| {
            b.iter(|| shapley_attribution(&fcm, "Y", black_box(&obs), cfg).unwrap())
        });
    }
    g.finish();
}

fn random_graph(c: &mut Criterion) {
    let cfg = SynthConfig { num_nodes: 8, num_roots: 1, seed: 2, ..Default::default() };
    let fcm = random_mechanisms(&random_dag(&cfg).unwrap(), &cfg).unwrap();
    let target = fcm.dag().names()[*fcm.dag().topo_order().last().unwrap()].clone();
    let obs = fcm.evaluate(&vec![1.5; fcm.dag().len()]).unwrap();
    let mut g = c.benchmark_group("shapley_dag8");
    g.sample_size(10);
    let modes = [
        ("exact", ShapleyMode::ExactSubsets),
        ("permutations_20", ShapleyMode::PermutationSampling { num_permutations: 20 }),
    ];
    for (name, mode) in modes {
        let cfg = AttributionConfig { mc_samples: 5_000, mode, seed: 1, ..Default::default() };
        g.bench_function(name, |b| b.iter(|| shapley_attribution(&fcm, &target, black_box(&obs), &cfg).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, chain_exact, random_graph);
criterion_main!(benches);
