use std::hint::black_box;

use bbm_core::extremal::{ClusterBank, LimitModel, LimitSampler};
use bbm_core::partition::{partition_function_scaled, truncated_partition, PhaseConvention};
use bbm_core::{ComplexTemperature, CorrelatedField, GwTree, OffspringDistribution};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

fn tree(c: &mut Criterion) {
    let dist = OffspringDistribution::binary();
    let mut group = c.benchmark_group("tree");
    for t in [6.0, 9.0, 12.0] {
        let nodes = GwTree::sample(&dist, t, 1).unwrap().node_count() as u64;
        group.throughput(Throughput::Elements(nodes));
        group.bench_with_input(BenchmarkId::from_parameter(t), &t, |b, &t| {
            b.iter(|| GwTree::sample(&dist, t, black_box(1)).unwrap())
        });
    }
    group.finish();
}

fn field(c: &mut Criterion) {
    let dist = OffspringDistribution::binary();
    let tree = GwTree::sample(&dist, 10.0, 3).unwrap();
    let mut group = c.benchmark_group("field");
    group.throughput(Throughput::Elements(tree.node_count() as u64));
    group.bench_function("correlated_pair_t10", |b| {
        b.iter(|| CorrelatedField::sample(&tree, 0.5, black_box(3), false).unwrap())
    });
    group.finish();
}

fn partition(c: &mut Criterion) {
    let dist = OffspringDistribution::binary();
    let tree = GwTree::sample(&dist, 10.0, 5).unwrap();
    let field = CorrelatedField::sample(&tree, 0.5, 5, false).unwrap();
    let beta = ComplexTemperature::new(1.2, 0.9);
    let mut group = c.benchmark_group("partition");
    group.throughput(Throughput::Elements(field.len() as u64));
    group.bench_function("scaled_sum_t10", |b| b.iter(|| partition_function_scaled(&field, black_box(beta))));
    group.bench_function("truncated_t10", |b| {
        b.iter(|| truncated_partition(&field, black_box(beta), 4.0, PhaseConvention::Rotated).unwrap())
    });
    group.finish();
}

fn limit(c: &mut Criterion) {
    let dist = OffspringDistribution::binary();
    let bank = ClusterBank::build(3.0, &dist, 7, 50, 1_000_000).unwrap();
    let model = LimitModel::new(1.0, 1.0, bank.clusters).unwrap();
    let sampler = LimitSampler::new(&model, ComplexTemperature::real(1.5), 1.0, 5.0).unwrap();
    c.bench_function("limit_draw_a5", |b| b.iter(|| sampler.sample(black_box(11))));
}

criterion_group!(benches, tree, field, partition, limit);
criterion_main!(benches);
