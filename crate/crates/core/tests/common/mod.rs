#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use mtgnn::autodiff::{max_relative_error, Tape, Tensor};
use mtgnn::chem::{parse_smiles, MolGraph};
use mtgnn::featurize::{featurize_graph, GraphBatch};
use mtgnn::gnn::{Mode, Model};
use mtgnn::train::masked_loss;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn data_path(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(file)
}

pub fn graph(smiles: &str) -> MolGraph {
    parse_smiles(smiles).unwrap_or_else(|e| panic!("{smiles}: {e}"))
}

pub fn batch(smiles: &[&str]) -> Vec<GraphBatch> {
    smiles.iter().map(|s| featurize_graph(&graph(s))).collect()
}

/// Shifts every parameter and the running statistics by small seeded noise
/// so biases and buffers are exercised.
pub fn jitter(model: &mut Model, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in model.params_mut() {
        for v in p.value.data_mut() {
            *v += rng.random_range(-0.05..0.05);
        }
    }
    let mean = (0..95).map(|_| rng.random_range(-0.2..0.2)).collect();
    let var = (0..95).map(|_| rng.random_range(0.5..1.5)).collect();
    model.set_running_stats(mean, var);
}

pub fn eval_loss(model: &Model, batch: &GraphBatch, target: &Tensor, mask: &[bool]) -> f64 {
    masked_loss(&model.predict(batch).unwrap(), target, mask).unwrap()
}

/// Analytic gradient of the eval-mode masked loss for every parameter.
pub fn analytic_grads(model: &Model, batch: &GraphBatch, target: &Tensor, mask: &[bool]) -> Vec<Tensor> {
    let mut tape = Tape::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let pass = model.forward_tape(&mut tape, batch, Mode::Eval, &mut rng).unwrap();
    let loss = tape
        .masked_rmse(pass.output, target, Arc::from(mask.to_vec()))
        .unwrap();
    tape.backward(loss).unwrap();
    pass.params.iter().map(|&v| tape.grad(v).unwrap().clone()).collect()
}

/// Largest relative error between analytic and central-difference gradients
/// per parameter, probing every `stride`-th entry.
pub fn gradient_check(
    model: &Model,
    batch: &GraphBatch,
    target: &Tensor,
    mask: &[bool],
    step: f64,
    stride: usize,
) -> Vec<(String, f64)> {
    let analytic = analytic_grads(model, batch, target, mask);
    let mut probe = model.clone();
    let mut out = Vec::new();
    for (i, grad) in analytic.iter().enumerate() {
        let n = grad.len();
        let picked: Vec<usize> = (0..n).step_by(stride).collect();
        let mut a = Vec::with_capacity(picked.len());
        let mut num = Vec::with_capacity(picked.len());
        for &j in &picked {
            let orig = probe.params()[i].value.data()[j];
            probe.params_mut()[i].value.data_mut()[j] = orig + step;
            let up = eval_loss(&probe, batch, target, mask);
            probe.params_mut()[i].value.data_mut()[j] = orig - step;
            let down = eval_loss(&probe, batch, target, mask);
            probe.params_mut()[i].value.data_mut()[j] = orig;
            a.push(grad.data()[j]);
            num.push((up - down) / (2.0 * step));
        }
        let err = max_relative_error(&Tensor::column(&a), &Tensor::column(&num), 1e-6);
        out.push((model.params()[i].name.clone(), err));
    }
    out
}

/// A seeded random relabelling of `0..n`.
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

/// Three molecules, two tasks, a mask with one gap per task.
pub fn gradient_fixture() -> (GraphBatch, Tensor, Vec<bool>) {
    let parts = batch(&["CCO", "c1ccccc1O", "CC(=O)N"]);
    let b = mtgnn::featurize::batch_graphs(&parts).unwrap();
    let target = Tensor::from_rows(&[[0.5, 0.0], [-1.2, 0.8], [0.0, 2.0]]);
    (b, target, vec![true, false, true, true, false, true])
}
