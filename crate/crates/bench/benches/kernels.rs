use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dropedge_core::dropedge::sample;
use dropedge_core::graph::generate::{erdos_renyi, sbm, SbmConfig};
use dropedge_core::graph::normalize;
use dropedge_core::harness::{TrainConfig, Trainer};
use dropedge_core::spectral::{analyze, DEFAULT_CLUSTER_TOL};
use dropedge_core::{DropEdgeConfig, Matrix, NormalizationScheme};

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn dense_kernels(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let a = random_matrix(1000, 256, &mut rng);
    let b = random_matrix(256, 128, &mut rng);
    c.bench_function("matmul 1000x256x128", |bench| {
        bench.iter(|| black_box(a.matmul(&b).unwrap()))
    });

    let adj = erdos_renyi(3000, 0.002, &mut rng);
    let norm = normalize(&adj, NormalizationScheme::AugNormAdj).unwrap();
    let h = random_matrix(3000, 128, &mut rng);
    c.bench_function("spmm 3000 nodes x 128", |bench| {
        bench.iter(|| black_box(norm.spmm(&h).unwrap()))
    });
}

fn graph_kernels(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let adj = erdos_renyi(3000, 0.002, &mut rng);
    for scheme in NormalizationScheme::ALL {
        c.bench_function(&format!("normalize {scheme}"), |bench| {
            bench.iter(|| black_box(normalize(&adj, scheme).unwrap()))
        });
    }
    c.bench_function("dropedge sample p=0.8", |bench| {
        bench.iter(|| black_box(sample(&adj, 0.8, &mut rng).unwrap()))
    });

    let small = erdos_renyi(200, 0.05, &mut rng);
    let small = normalize(&small, NormalizationScheme::AugNormAdj).unwrap();
    c.bench_function("spectral analyze 200 nodes", |bench| {
        bench.iter(|| black_box(analyze(&small, DEFAULT_CLUSTER_TOL).unwrap()))
    });
}

fn training(c: &mut Criterion) {
    let graph = sbm(&SbmConfig {
        n_nodes: 1000,
        n_features: 256,
        p_in: 0.02,
        p_out: 0.002,
        ..SbmConfig::default()
    })
    .unwrap();
    let mut cfg = TrainConfig::default();
    cfg.model.n_layers = 4;
    cfg.model.hidden_dim = 64;
    cfg.model.dropedge = DropEdgeConfig {
        p: 0.5,
        ..DropEdgeConfig::default()
    };
    c.bench_function("train epoch gcn-4 sbm 1000", |bench| {
        bench.iter_batched(
            || Trainer::new(cfg.clone(), graph.clone()).unwrap(),
            |mut trainer| {
                black_box(trainer.step().unwrap());
            },
            BatchSize::LargeInput,
        )
    });
    let trainer = Trainer::new(cfg.clone(), graph.clone()).unwrap();
    c.bench_function("evaluate gcn-4 sbm 1000", |bench| {
        bench.iter(|| black_box(trainer.evaluate().unwrap()))
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = dense_kernels, graph_kernels, training
}
criterion_main!(benches);
