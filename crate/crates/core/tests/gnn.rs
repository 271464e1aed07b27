mod common;

use common::*;
use mtgnn::autodiff::Tensor;
use mtgnn::featurize::{batch_graphs, featurize_graph};
use mtgnn::gnn::layers::Edges;
use mtgnn::gnn::{Mode, Model, ModelConfig, ModelKind};
use mtgnn::train::Adam;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MOLECULES: [&str; 8] = [
    "CCO",
    "c1ccccc1O",
    "CC(=O)Nc1ccc(O)cc1",
    "C1CCCCC1",
    "ClC(Cl)(Cl)Cl",
    "O=C(O)c1ccccc1C(=O)O",
    "CN1C=NC2=C1C(=O)N(C)C(=O)N2C",
    "C",
];

fn models() -> Vec<Model> {
    ModelKind::ALL
        .iter()
        .map(|&k| {
            let mut m = Model::new(ModelConfig::new(k, 2), 5).unwrap();
            jitter(&mut m, 6);
            m
        })
        .collect()
}

#[test]
fn atom_relabelling_leaves_predictions_unchanged() {
    for m in models() {
        for (i, s) in MOLECULES.iter().enumerate() {
            let g = graph(s);
            let base = m.predict(&featurize_graph(&g)).unwrap();
            let p = g.permuted(&permutation(g.atoms.len(), i as u64));
            let moved = m.predict(&featurize_graph(&p)).unwrap();
            assert!(base.max_abs_diff(&moved) < 1e-10, "{} {s}", m.kind());
        }
    }
}

#[test]
fn batched_predictions_match_single_graphs() {
    let parts = batch(&MOLECULES);
    let joint = batch_graphs(&parts).unwrap();
    for m in models() {
        let all = m.predict(&joint).unwrap();
        for (i, part) in parts.iter().enumerate() {
            let one = m.predict(part).unwrap();
            for t in 0..2 {
                assert!((all.get(i, t) - one.get(0, t)).abs() < 1e-10, "{}", m.kind());
            }
        }
    }
}

#[test]
fn gradients_match_finite_differences() {
    let (b, target, mask) = gradient_fixture();
    for m in models() {
        for (name, err) in gradient_check(&m, &b, &target, &mask, 1e-5, 11) {
            assert!(err < 1e-3, "{} {name}: {err}", m.kind());
        }
    }
}

#[test]
fn attention_rows_sum_to_one() {
    let m = Model::new(ModelConfig::new(ModelKind::Gain, 1), 3).unwrap();
    let b = batch_graphs(&batch(&MOLECULES)).unwrap();
    let mut tape = mtgnn::autodiff::Tape::new();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pass = m.forward_tape(&mut tape, &b, Mode::Train, &mut rng).unwrap();
    let alpha = tape.value(pass.attention.unwrap());
    let looped = Edges::new(&b.edges, b.node_count()).with_self_loops();
    assert_eq!(alpha.rows(), looped.targets.len());
    let mut sums = vec![0.0; b.node_count()];
    for (k, &target) in looped.targets.iter().enumerate() {
        sums[target] += alpha.get(k, 0);
    }
    for s in sums {
        assert!((s - 1.0).abs() < 1e-12, "{s}");
    }
}

#[test]
fn gin_parameter_count() {
    let m = Model::new(ModelConfig::new(ModelKind::Gin, 1), 0).unwrap();
    // lin1 48·95+95, lin2 95·95+95, bn 2·95, fc1 95·95+95, fc2 95+1
    let analytic = 48 * 95 + 95 + 95 * 95 + 95 + 2 * 95 + 95 * 95 + 95 + 95 + 1;
    assert_eq!(analytic, 23181);
    assert_eq!(m.parameter_count(), analytic);
    let eps = Model::new(
        ModelConfig {
            learnable_eps: true,
            ..ModelConfig::new(ModelKind::Gin, 1)
        },
        0,
    )
    .unwrap();
    assert_eq!(eps.parameter_count(), analytic + 1);
}

#[test]
fn parameter_names_are_unique() {
    for m in models() {
        let mut names: Vec<&str> = m.params().iter().map(|p| p.name.as_str()).collect();
        let n = names.len();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), n);
    }
}

#[test]
fn zero_head_predicts_zero() {
    for k in ModelKind::ALL {
        let mut m = Model::new(ModelConfig::new(k, 1), 2).unwrap();
        for p in m.params_mut() {
            if p.name.starts_with("head.") {
                p.value.data_mut().iter_mut().for_each(|v| *v = 0.0);
            }
        }
        let out = m.predict(&batch_graphs(&batch(&MOLECULES)).unwrap()).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn init_std_matches_glorot() {
    let m = Model::new(ModelConfig::new(ModelKind::Gin, 1), 17).unwrap();
    let w = m.param("head.fc1.weight").unwrap().value.data();
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    let std = (w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w.len() as f64).sqrt();
    let analytic = 0.10259783520851543;
    assert!((std / analytic - 1.0).abs() < 0.05, "{std}");
    assert!(m.param("head.fc1.bias").unwrap().value.data().iter().all(|&v| v == 0.0));
}

// Reference values from an independent numpy evaluation of the same
// checkpoint: GGRNet, seed 42, three single-atom molecules.
#[test]
fn ggrnet_without_edges_matches_reference() {
    let mut m = Model::new(ModelConfig::new(ModelKind::Ggrnet, 2), 42).unwrap();
    m.set_running_stats(
        (0..95).map(|i| 0.01 * i as f64).collect(),
        (0..95).map(|i| 0.5 + 0.02 * i as f64).collect(),
    );
    let b = batch_graphs(&batch(&["C", "O", "[NH4+]"])).unwrap();
    assert!(b.edges.is_empty());
    let out = m.predict(&b).unwrap();
    let reference = [
        -0.2666093127674543,
        0.1892578239067521,
        -0.17430207254976718,
        0.17833659160874998,
        -0.20427292071589262,
        0.18549571778055235,
    ];
    for (a, r) in out.data().iter().zip(reference) {
        assert!((a - r).abs() < 1e-12, "{a} vs {r}");
    }
}

fn train_steps(m: &mut Model, steps: usize) {
    let b = batch_graphs(&batch(&MOLECULES)).unwrap();
    let target = Tensor::from_rows(&vec![[1.0]; MOLECULES.len()]);
    let mask: std::sync::Arc<[bool]> = vec![true; MOLECULES.len()].into();
    let mut adam = Adam::new(m.params());
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..steps {
        let mut tape = mtgnn::autodiff::Tape::new();
        let pass = m.forward_tape(&mut tape, &b, Mode::Train, &mut rng).unwrap();
        let loss = tape.masked_rmse(pass.output, &target, mask.clone()).unwrap();
        tape.backward(loss).unwrap();
        let grads: Vec<Option<&Tensor>> = pass.params.iter().map(|&v| tape.grad(v)).collect();
        adam.step(m.params_mut(), &grads, 0.01).unwrap();
        if let Some(s) = &pass.bn_stats {
            m.update_running_stats(s);
        }
    }
}

#[test]
fn freezing_everything_makes_steps_no_ops() {
    for k in ModelKind::ALL {
        let mut m = Model::new(ModelConfig::new(k, 1), 4).unwrap();
        m.freeze_where(|_| true);
        let before = m.clone();
        train_steps(&mut m, 3);
        assert_eq!(m.params(), before.params());
        assert_eq!(m.running_mean(), before.running_mean());
    }
}

#[test]
fn frozen_trunk_trains_only_the_head() {
    for k in ModelKind::ALL {
        let mut m = Model::new(ModelConfig::new(k, 1), 4).unwrap();
        m.freeze_trunk();
        let trainable: Vec<&str> = m.trainable_parameters().iter().map(|p| p.name.as_str()).collect();
        assert_eq!(
            trainable,
            ["head.fc1.weight", "head.fc1.bias", "head.fc2.weight", "head.fc2.bias"]
        );
        let before = m.clone();
        train_steps(&mut m, 10);
        for (a, b) in m.params().iter().zip(before.params()) {
            if a.name.starts_with("head.") {
                assert_ne!(a.value, b.value, "{} did not move", a.name);
            } else {
                assert_eq!(a.value, b.value, "{} moved", a.name);
            }
        }
        assert_eq!(m.running_var(), before.running_var());
    }
}

#[test]
fn freezing_an_unknown_name_fails() {
    let mut m = Model::new(ModelConfig::new(ModelKind::Gin, 1), 4).unwrap();
    assert!(m.freeze(&["conv.lin9.weight"]).is_err());
    m.freeze(&["conv.lin1.weight"]).unwrap();
    assert!(m.param("conv.lin1.weight").unwrap().frozen);
}

#[test]
fn wrong_feature_width_is_rejected() {
    let m = Model::new(ModelConfig::new(ModelKind::Gin, 1), 4).unwrap();
    let mut b = featurize_graph(&graph("CCO"));
    b.node_features = Tensor::zeros(3, 47);
    assert!(m.predict(&b).is_err());
}
