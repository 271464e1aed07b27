use std::sync::Arc;
use std::time::Instant;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::masked_loss;
use super::optim::{Adam, PlateauScheduler};
use super::TrainError;
use crate::autodiff::{Tape, Tensor};
use crate::data::{SplitPlan, TaskScaler, TaskTable};
use crate::featurize::{batch_graphs, featurize_graph, GraphBatch};
use crate::gnn::{Mode, Model, ModelConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub scheduler_gamma: f64,
    pub scheduler_patience: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub seed: u64,
    /// Z-score each task on the fold's training rows.
    pub standardize: bool,
    pub folds: usize,
    pub train_fraction: f64,
    /// Folds trained concurrently.
    pub jobs: usize,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            batch_size: 300,
            learning_rate: 0.01,
            scheduler_gamma: 0.5,
            scheduler_patience: 40,
            max_epochs: 500,
            early_stop_patience: 120,
            seed: 0,
            standardize: true,
            folds: 5,
            train_fraction: 0.8,
            jobs: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.batch_size < 2 {
            return bad("batch_size must be at least 2");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.scheduler_gamma > 0.0 && self.scheduler_gamma < 1.0) {
            return bad("scheduler_gamma must lie in (0, 1)");
        }
        if self.scheduler_patience == 0 || self.early_stop_patience == 0 {
            return bad("patience values must be at least 1");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1");
        }
        if self.folds < 2 {
            return bad("folds must be at least 2");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad("train_fraction must lie in (0, 1)");
        }
        if self.jobs == 0 {
            return bad("jobs must be at least 1");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Learning rate after this epoch's scheduler step.
    pub lr: f64,
    pub seconds: f64,
}

/// `epoch,train_loss,val_loss,lr,seconds`.
pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,train_loss,val_loss,lr,seconds\n");
    for r in history {
        out.push_str(&format!(
            "{},{},{},{},{:.6}\n",
            r.epoch, r.train_loss, r.val_loss, r.lr, r.seconds
        ));
    }
    out
}

/// A trained fold: the weights of its best validation epoch.
#[derive(Clone, Debug)]
pub struct FoldRun {
    pub model: Model,
    pub scalers: Vec<TaskScaler>,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

pub fn featurize_table(table: &TaskTable) -> Vec<GraphBatch> {
    table.graphs.iter().map(featurize_graph).collect()
}

fn batch_of(graphs: &[GraphBatch], rows: &[usize]) -> GraphBatch {
    let parts: Vec<&GraphBatch> = rows.iter().map(|&r| &graphs[r]).collect();
    batch_graphs(&parts).expect("non-empty row set")
}

pub fn fit_scalers(table: &TaskTable, rows: &[usize], standardize: bool) -> Vec<TaskScaler> {
    (0..table.task_count())
        .map(|t| {
            if !standardize {
                return TaskScaler::IDENTITY;
            }
            let vals: Vec<f64> = rows.iter().filter_map(|&r| table.value(r, t)).collect();
            TaskScaler::fit(&vals)
        })
        .collect()
}

/// Scaled targets and presence mask for `rows`; absent cells hold 0.
pub fn scaled_targets(table: &TaskTable, rows: &[usize], scalers: &[TaskScaler]) -> (Tensor, Arc<[bool]>) {
    let k = table.task_count();
    let mut values = Vec::with_capacity(rows.len() * k);
    let mut mask = Vec::with_capacity(rows.len() * k);
    for &r in rows {
        for (t, s) in scalers.iter().enumerate() {
            match table.value(r, t) {
                Some(v) => {
                    values.push(s.transform(v));
                    mask.push(true);
                }
                None => {
                    values.push(0.0);
                    mask.push(false);
                }
            }
        }
    }
    (
        Tensor::new(rows.len(), k, values).expect("target shape"),
        Arc::from(mask),
    )
}

const PREDICT_CHUNK: usize = 1024;

/// Eval-mode outputs for `rows` in model units, `rows.len() × K`.
pub fn predict_rows(model: &Model, graphs: &[GraphBatch], rows: &[usize]) -> Result<Tensor, TrainError> {
    let k = model.config().tasks;
    let mut data = Vec::with_capacity(rows.len() * k);
    for chunk in rows.chunks(PREDICT_CHUNK) {
        let out = model.predict(&batch_of(graphs, chunk))?;
        data.extend_from_slice(out.data());
    }
    Ok(Tensor::new(rows.len(), k, data).expect("prediction shape"))
}

/// Mini-batches of at most `size`; a trailing batch of one row joins the previous one.
fn minibatches(order: &[usize], size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(size).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() < 2) {
        let n = out.len();
        let start = (n - 2) * size;
        out.truncate(n - 2);
        out.push(&order[start..]);
    }
    out
}

/// Trains `model` on `train_rows`, monitoring `val_rows`, and returns the
/// weights from the epoch with the lowest validation loss.
pub fn train_fold(
    table: &TaskTable,
    graphs: &[GraphBatch],
    train_rows: &[usize],
    val_rows: &[usize],
    mut model: Model,
    config: &TrainConfig,
    seed: u64,
) -> Result<FoldRun, TrainError> {
    config.validate()?;
    if model.config().tasks != table.task_count() {
        return Err(TrainError::InvalidConfig(format!(
            "model has {} outputs for {} tasks",
            model.config().tasks,
            table.task_count()
        )));
    }
    if train_rows.len() < 2 || val_rows.is_empty() {
        return Err(TrainError::TooFewRows {
            train: train_rows.len(),
            validation: val_rows.len(),
        });
    }
    let scalers = fit_scalers(table, train_rows, config.standardize);
    let (val_target, val_mask) = scaled_targets(table, val_rows, &scalers);

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(seed);
    shuffle_rng.set_stream(1);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(seed);
    dropout_rng.set_stream(2);

    let mut adam = Adam::new(model.params());
    let mut scheduler = PlateauScheduler::new(
        config.learning_rate,
        config.scheduler_gamma,
        config.scheduler_patience,
    );
    let mut lr = config.learning_rate;
    let mut order = train_rows.to_vec();
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, Model)> = None;
    let mut since_best = 0;

    for epoch in 1..=config.max_epochs {
        let started = Instant::now();
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for rows in minibatches(&order, config.batch_size) {
            let batch = batch_of(graphs, rows);
            let (target, mask) = scaled_targets(table, rows, &scalers);
            if !mask.iter().any(|&m| m) {
                continue;
            }
            let mut tape = Tape::new();
            let pass = model.forward_tape(&mut tape, &batch, Mode::Train, &mut dropout_rng)?;
            let loss = tape.masked_rmse(pass.output, &target, mask)?;
            let value = tape.value(loss).item();
            if !value.is_finite() {
                return Err(TrainError::Diverged { epoch, loss: value });
            }
            tape.backward(loss)?;
            let grads: Vec<Option<&Tensor>> = pass.params.iter().map(|&v| tape.grad(v)).collect();
            adam.step(model.params_mut(), &grads, lr)?;
            if let Some(stats) = &pass.bn_stats {
                model.update_running_stats(stats);
            }
            loss_sum += value;
            batches += 1;
        }
        let train_loss = loss_sum / batches.max(1) as f64;
        let val_pred = predict_rows(&model, graphs, val_rows)?;
        let val_loss = masked_loss(&val_pred, &val_target, &val_mask)?;
        if !val_loss.is_finite() {
            return Err(TrainError::Diverged { epoch, loss: val_loss });
        }
        lr = scheduler.step(val_loss);
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            lr,
            seconds: started.elapsed().as_secs_f64(),
        });
        if best.as_ref().is_none_or(|b| val_loss < b.0) {
            best = Some((val_loss, epoch, model.clone()));
            since_best = 0;
        } else {
            since_best += 1;
        }
        if epoch % 50 == 0 {
            debug!("epoch {epoch}: train {train_loss:.4} val {val_loss:.4} lr {lr}");
        }
        if since_best >= config.early_stop_patience {
            debug!("early stop at epoch {epoch}");
            break;
        }
    }
    let (best_val_loss, best_epoch, model) = best.expect("at least one epoch ran");
    Ok(FoldRun {
        model,
        scalers,
        history,
        best_epoch,
        best_val_loss,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Prediction {
    pub row: usize,
    pub smiles: String,
    pub task: String,
    pub y_true: f64,
    pub y_pred: f64,
}

/// Per-task test metrics in original units.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Evaluation {
    pub task_names: Vec<String>,
    /// `None` for a task with no values among the evaluated rows.
    pub rmse: Vec<Option<f64>>,
    pub counts: Vec<usize>,
    pub predictions: Vec<Prediction>,
}

impl Evaluation {
    pub fn rmse_of(&self, task: &str) -> Option<f64> {
        let i = self.task_names.iter().position(|t| t == task)?;
        self.rmse[i]
    }
}

/// `molecule_id,smiles,task,y_true,y_pred`.
pub fn predictions_csv(predictions: &[Prediction]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["molecule_id", "smiles", "task", "y_true", "y_pred"])
        .expect("write to memory");
    for p in predictions {
        w.write_record([
            p.row.to_string(),
            p.smiles.clone(),
            p.task.clone(),
            p.y_true.to_string(),
            p.y_pred.to_string(),
        ])
        .expect("write to memory");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Eval-mode RMSE per task over the present cells of `rows`, after undoing
/// the target scaling.
pub fn evaluate(
    model: &Model,
    scalers: &[TaskScaler],
    table: &TaskTable,
    graphs: &[GraphBatch],
    rows: &[usize],
) -> Result<Evaluation, TrainError> {
    let k = table.task_count();
    if scalers.len() != k || model.config().tasks != k {
        return Err(TrainError::InvalidConfig(format!(
            "model with {} outputs and {} scalers cannot score {k} tasks",
            model.config().tasks,
            scalers.len()
        )));
    }
    let pred = if rows.is_empty() {
        Tensor::zeros(0, k)
    } else {
        predict_rows(model, graphs, rows)?
    };
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    let mut predictions = Vec::new();
    for (i, &r) in rows.iter().enumerate() {
        for t in 0..k {
            if let Some(y) = table.value(r, t) {
                let y_pred = scalers[t].inverse(pred.get(i, t));
                sums[t] += (y_pred - y) * (y_pred - y);
                counts[t] += 1;
                predictions.push(Prediction {
                    row: r,
                    smiles: table.smiles[r].clone(),
                    task: table.task_names[t].clone(),
                    y_true: y,
                    y_pred,
                });
            }
        }
    }
    let rmse = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| (c > 0).then(|| (s / c as f64).sqrt()))
        .collect();
    Ok(Evaluation {
        task_names: table.task_names.clone(),
        rmse,
        counts,
        predictions,
    })
}

#[derive(Clone, Debug)]
pub struct FoldOutcome {
    pub fold: usize,
    pub run: FoldRun,
    pub test: Evaluation,
}

#[derive(Clone, Debug)]
pub struct CvOutcome {
    pub task_names: Vec<String>,
    pub plan: SplitPlan,
    pub folds: Vec<FoldOutcome>,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl CvOutcome {
    /// Test RMSE of `task` in every fold.
    pub fn fold_rmse(&self, task: &str) -> Vec<f64> {
        self.folds
            .iter()
            .filter_map(|f| f.test.rmse_of(task))
            .collect()
    }

    pub fn test_rmse(&self, task: &str) -> Option<(f64, f64)> {
        let v = self.fold_rmse(task);
        (!v.is_empty()).then(|| mean_std(&v))
    }
}

/// Seed of fold `fold` of a run seeded with `seed`.
pub fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(fold as u64 + 1)
}

/// K-fold training on `plan`; each fold's best model is scored on the test rows.
pub fn cross_validate(
    table: &TaskTable,
    graphs: &[GraphBatch],
    plan: &SplitPlan,
    model_config: &ModelConfig,
    config: &TrainConfig,
) -> Result<CvOutcome, TrainError> {
    config.validate()?;
    let mut model_config = model_config.clone();
    model_config.tasks = table.task_count();
    let run = |fold: usize| -> Result<FoldOutcome, TrainError> {
        let seed = fold_seed(config.seed, fold);
        let f = &plan.folds[fold];
        let model = Model::new(model_config.clone(), seed)?;
        let started = Instant::now();
        let run = train_fold(table, graphs, &f.train, &f.validation, model, config, seed)?;
        let test = evaluate(&run.model, &run.scalers, table, graphs, &plan.test)?;
        info!(
            "fold {}: {} epochs (best {}) in {:.1}s, test rmse {:?}",
            fold + 1,
            run.history.len(),
            run.best_epoch,
            started.elapsed().as_secs_f64(),
            test.rmse
        );
        Ok(FoldOutcome { fold, run, test })
    };
    let folds: Vec<FoldOutcome> = if config.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| TrainError::InvalidConfig(e.to_string()))?;
        pool.install(|| (0..plan.folds.len()).into_par_iter().map(run).collect::<Result<_, _>>())?
    } else {
        (0..plan.folds.len()).map(run).collect::<Result<_, _>>()?
    };
    Ok(CvOutcome {
        task_names: table.task_names.clone(),
        plan: plan.clone(),
        folds,
    })
}
