use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use slablab::limit_process::{sample_gue, sample_z, ZScheme};
use slablab::longest_path::{longest_free, slab_longest_free};
use slablab::skeleton_scan::{buffer_for, scan_skeleton};
use slablab::*;

fn half() -> EdgeProbabilityModel {
    EdgeProbabilityModel::constant(0.5).unwrap()
}

fn sampling(c: &mut Criterion) {
    let m = half();
    let slab = SlabProbabilityModel::new(m.clone(), Poset::chain(1), 0.5, 0.0).unwrap();
    c.bench_function("line window 10k", |b| {
        let mut r = 0;
        b.iter(|| {
            r += 1;
            sample_window(&m, 0, 9999, SeedTag::new(1, r)).unwrap()
        })
    });
    c.bench_function("slab window 2x5k", |b| {
        let mut r = 0;
        b.iter(|| {
            r += 1;
            sample_slab_window(&slab, 0, 4999, SeedTag::new(2, r)).unwrap()
        })
    });
}

fn paths(c: &mut Criterion) {
    let m = half();
    let g = sample_window(&m, 0, 9999, SeedTag::new(3, 0)).unwrap();
    c.bench_function("longest free path 10k", |b| b.iter(|| longest_free(black_box(&g), false)));
    let slab = SlabProbabilityModel::new(m.clone(), Poset::chain(2), 0.5, 0.1).unwrap();
    let s = sample_slab_window(&slab, 0, 2999, SeedTag::new(4, 0)).unwrap();
    c.bench_function("slab longest free path 3x3k", |b| b.iter(|| slab_longest_free(black_box(&s), false)));
    let buffer = buffer_for(&m, 1e-6, 10_000).unwrap();
    c.bench_function("skeleton scan 10k", |b| b.iter(|| scan_skeleton(black_box(&g), &m, buffer).unwrap()));
}

fn gamma0(c: &mut Criterion) {
    let m = half();
    let mut r = 0;
    c.bench_function("gamma0 construction", |b| {
        b.iter(|| {
            r += 1;
            construct_gamma0(&m, SeedTag::new(5, r), GammaOptions::default()).unwrap()
        })
    });
}

fn limits(c: &mut Criterion) {
    let h = build_hasse(&Poset::chain(1)).unwrap();
    c.bench_function("Z two-chain bridge", |b| {
        b.iter_batched(
            || SeedTag::new(6, 0).rng(Purpose::Gaussian),
            |mut rng| sample_z(&h, 2, 1.0, 400, ZScheme::BridgeRefined, &mut rng),
            BatchSize::SmallInput,
        )
    });
    c.bench_function("GUE 6x6 eigenvalues", |b| {
        b.iter_batched(
            || SeedTag::new(7, 0).rng(Purpose::Gaussian),
            |mut rng| sample_gue(6, &mut rng).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, sampling, paths, gamma0, limits);
criterion_main!(benches);
