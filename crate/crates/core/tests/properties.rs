mod common;

use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use dropedge_core::autodiff::{Mode, Tape};
use dropedge_core::backbones::{Activation, Backbone, Model, ModelConfig};
use dropedge_core::dropedge::{dropped_edge_count, sample};
use dropedge_core::graph::generate::{erdos_renyi, sbm, SbmConfig};
use dropedge_core::graph::{connected_components, load_graph, normalize, save_graph, NormalizationScheme};
use dropedge_core::spectral::{analyze, subspace_distance, DEFAULT_CLUSTER_TOL};
use dropedge_core::{Matrix, SparseMatrix};

fn graph(n: usize, density: f64, seed: u64) -> SparseMatrix {
    erdos_renyi(n, density, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn n_components(a: &SparseMatrix) -> usize {
    let mut labels = components(&to_dense(a));
    labels.sort_unstable();
    labels.dedup();
    labels.len()
}

fn gcn(backbone: Backbone, n_layers: usize, activation: Activation, bias: bool) -> ModelConfig {
    ModelConfig {
        backbone,
        n_layers,
        hidden_dim: 6,
        dropout: 0.3,
        bias,
        activation,
        ..ModelConfig::default()
    }
}

fn logits(model: &Model, props: &[Arc<SparseMatrix>], x: &Matrix, seed: u64) -> Matrix {
    let mut tape = Tape::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out = model.forward(&mut tape, props, x, Mode::Eval, &mut rng).unwrap();
    tape.value(out.logits).clone()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn symmetric_schemes_stay_symmetric(n in 1usize..20, density in 0.0f64..0.7, seed: u64) {
        let a = graph(n, density, seed);
        for scheme in NormalizationScheme::ALL.into_iter().filter(|s| s.is_symmetric()) {
            let d = to_dense(&normalize(&a, scheme).unwrap());
            prop_assert!(approx_eq_dense(&d, &transpose(&d), 1e-15));
        }
    }

    #[test]
    fn aug_norm_adj_spectrum(n in 1usize..16, density in 0.0f64..0.6, seed: u64) {
        let a = graph(n, density, seed);
        let (vals, _) = jacobi_eigen(&to_dense(&normalize(&a, NormalizationScheme::AugNormAdj).unwrap()));
        prop_assert!(vals.iter().all(|v| (-1.0 - 1e-10..=1.0 + 1e-10).contains(v)));
        prop_assert!((vals.last().unwrap() - 1.0).abs() < 1e-10);
        let top = vals.iter().filter(|v| (*v - 1.0).abs() < 1e-8).count();
        prop_assert_eq!(top, n_components(&a));
        prop_assert_eq!(connected_components(&a).unwrap().count, top);
    }

    #[test]
    fn random_walk_rows_sum_to_one(n in 1usize..25, density in 0.0f64..0.7, seed: u64) {
        let a = graph(n, density, seed);
        let p = normalize(&a, NormalizationScheme::AugRWalk).unwrap();
        for s in p.row_sums() {
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dropedge_sample_is_an_exact_symmetric_subgraph(
        n in 2usize..25,
        density in 0.0f64..0.7,
        p in 0.0f64..1.0,
        seed: u64,
    ) {
        let a = graph(n, density, seed);
        let v = a.nnz() / 2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let s = sample(&a, p, &mut rng).unwrap();
        prop_assert_eq!(s.nnz(), 2 * (v - dropped_edge_count(v, p)));
        prop_assert!(s.is_symmetric(0.0));
        prop_assert!(s.triplets().all(|(i, j, _)| a.get(i, j) != 0.0));
        prop_assert!(n_components(&s) >= n_components(&a));

        let again = sample(&a, p, &mut ChaCha8Rng::seed_from_u64(seed ^ 1)).unwrap();
        prop_assert_eq!(s, again);
    }

    #[test]
    fn logits_are_permutation_equivariant(seed: u64, backbone_idx in 0usize..4) {
        let cfg = SbmConfig { n_nodes: 12, n_blocks: 3, n_features: 5, p_in: 0.5, p_out: 0.1, seed, ..SbmConfig::default() };
        let g = sbm(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut perm: Vec<usize> = (0..12).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
        let pg = g.permuted(&perm).unwrap();

        let backbone = [Backbone::Gcn, Backbone::ResGcn, Backbone::JkNet, Backbone::IncepGcn][backbone_idx];
        let mc = ModelConfig { withloop: true, ..gcn(backbone, 4, Activation::Relu, true) };
        let model = Model::new(mc, 5, g.n_classes(), &mut rng).unwrap();
        let props = |a: &SparseMatrix| vec![Arc::new(normalize(a, NormalizationScheme::AugNormAdj).unwrap()); model.n_gcls()];
        let base = logits(&model, &props(g.adjacency()), g.features(), 0);
        let moved = logits(&model, &props(pg.adjacency()), pg.features(), 0);
        for (i, &pi) in perm.iter().enumerate() {
            for (x, y) in base.row(i).iter().zip(moved.row(pi)) {
                prop_assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn cross_entropy_ignores_row_shifts(seed: u64, shift in -50.0f64..50.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = Matrix::from_fn(6, 4, |_, _| rng.random_range(-3.0..3.0));
        let shifts: Vec<f64> = (0..6).map(|i| shift * (i as f64 - 2.0)).collect();
        let shifted = Matrix::from_fn(6, 4, |i, j| z.get(i, j) + shifts[i]);
        let labels = [0, 1, 2, 3, 0, 1];
        let mask = [0, 1, 3, 5];
        let loss = |m: &Matrix| {
            let mut tape = Tape::new();
            let t = tape.leaf(m.clone(), false);
            let l = tape.softmax_cross_entropy(t, &labels, &mask).unwrap();
            tape.value(l).get(0, 0)
        };
        prop_assert!((loss(&z) - loss(&shifted)).abs() < 1e-10);
    }

    #[test]
    fn subspace_distance_is_an_orthogonal_split(n in 1usize..15, density in 0.0f64..0.6, seed: u64) {
        let a = graph(n, density, seed);
        let report = analyze(&normalize(&a, NormalizationScheme::AugNormAdj).unwrap(), DEFAULT_CLUSTER_TOL).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = Matrix::from_fn(n, 3, |_, _| rng.random_range(-2.0..2.0));
        let d = subspace_distance(&h, &report.basis).unwrap();
        let proj = report.basis.matmul_tn(&h).unwrap().frobenius_norm();
        let total = h.frobenius_norm();
        prop_assert!((d * d + proj * proj - total * total).abs() < 1e-8 * total.max(1.0).powi(2));
    }

    #[test]
    fn linear_bias_free_gcn_is_linear(seed: u64, alpha in -2.0f64..2.0, beta in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = erdos_renyi(9, 0.4, &mut rng);
        let model = Model::new(gcn(Backbone::Gcn, 3, Activation::Identity, false), 4, 3, &mut rng).unwrap();
        let props = vec![Arc::new(normalize(&a, NormalizationScheme::AugNormAdj).unwrap()); model.n_gcls()];
        let x = Matrix::from_fn(9, 4, |_, _| rng.random_range(-1.0..1.0));
        let y = Matrix::from_fn(9, 4, |_, _| rng.random_range(-1.0..1.0));
        let mix = x.scale(alpha).add(&y.scale(beta)).unwrap();
        let lhs = logits(&model, &props, &mix, 0);
        let rhs = logits(&model, &props, &x, 0).scale(alpha).add(&logits(&model, &props, &y, 0).scale(beta)).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-10);
    }

    #[test]
    fn every_layer_reports_a_hidden_state(backbone_idx in 0usize..4, n_layers in 3usize..8, seed: u64) {
        let backbone = [Backbone::Gcn, Backbone::ResGcn, Backbone::JkNet, Backbone::IncepGcn][backbone_idx];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = erdos_renyi(7, 0.4, &mut rng);
        let model = Model::new(gcn(backbone, n_layers, Activation::Relu, true), 3, 2, &mut rng).unwrap();
        let props = vec![Arc::new(normalize(&a, NormalizationScheme::AugNormAdj).unwrap()); model.n_gcls()];
        let x = Matrix::from_fn(7, 3, |_, _| rng.random_range(-1.0..1.0));
        prop_assert_eq!(model.hidden_states(&props, &x).unwrap().len(), model.n_gcls());
    }

    #[test]
    fn evaluation_ignores_the_generator(seed: u64, other: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = erdos_renyi(8, 0.4, &mut rng);
        let mc = ModelConfig { withbn: true, withloop: true, ..gcn(Backbone::ResGcn, 4, Activation::Relu, true) };
        let model = Model::new(mc, 3, 2, &mut rng).unwrap();
        let props = vec![Arc::new(normalize(&a, NormalizationScheme::AugNormAdj).unwrap()); model.n_gcls()];
        let x = Matrix::from_fn(8, 3, |_, _| rng.random_range(-1.0..1.0));
        prop_assert_eq!(logits(&model, &props, &x, seed), logits(&model, &props, &x, other));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn dataset_round_trips_through_disk(seed: u64, n in 8usize..40) {
        let cfg = SbmConfig { n_nodes: n, n_blocks: 2, n_features: 6, seed, ..SbmConfig::default() };
        let g = sbm(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = save_graph(&g, dir.path()).unwrap();
        let loaded = load_graph(&files).unwrap().graph;
        prop_assert_eq!(&loaded, &g);
        let files = save_graph(&loaded, dir.path()).unwrap();
        prop_assert_eq!(load_graph(&files).unwrap().graph, g);
    }
}

#[test]
fn dropout_preserves_the_mean() {
    let x = Matrix::filled(40, 25, 2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let draws = 400;
    let mut total = 0.0;
    for _ in 0..draws {
        let mut tape = Tape::new();
        let t = tape.leaf(x.clone(), false);
        let d = tape.dropout(t, 0.4, &mut rng, Mode::Train).unwrap();
        total += tape.value(d).sum();
    }
    let mean = total / (draws * x.len()) as f64;
    // Each entry is 2/(0.6) with probability 0.6: sd per entry ~1.63, over
    // 400k entries the standard error is ~0.0026.
    assert!((mean - 2.0).abs() < 0.013, "mean {mean}");
}

#[test]
fn edge_removal_is_unbiased() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let a = erdos_renyi(14, 0.5, &mut rng);
    let v = a.nnz() / 2;
    let p = 0.4;
    let draws = 2000;
    let mut kept = 0usize;
    let mut per_edge = vec![0usize; a.nnz()];
    for _ in 0..draws {
        let s = sample(&a, p, &mut rng).unwrap();
        kept += s.nnz() / 2;
        for (k, (i, j, _)) in a.triplets().enumerate() {
            if s.get(i, j) != 0.0 {
                per_edge[k] += 1;
            }
        }
    }
    let expect = 1.0 - dropped_edge_count(v, p) as f64 / v as f64;
    assert!((kept as f64 / (draws * v) as f64 - expect).abs() < 1e-12);
    for c in per_edge {
        let f = c as f64 / draws as f64;
        assert!((f - expect).abs() < 5.0 * (expect * (1.0 - expect) / draws as f64).sqrt());
    }
}
