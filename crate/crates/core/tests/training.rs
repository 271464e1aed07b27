mod common;

use common::*;
use mtgnn::data::{make_plan, make_split, merge_tasks, parse_dataset, TaskScaler, TaskTable};
use mtgnn::gnn::{Model, ModelConfig, ModelKind};
use mtgnn::train::{
    cross_validate, evaluate, featurize_table, history_csv, masked_loss, predict_rows,
    scaled_targets, train_fold, TrainConfig,
};

fn chains() -> Vec<String> {
    (2..12)
        .flat_map(|n| ["C".repeat(n), format!("{}O", "C".repeat(n - 1))])
        .collect()
}

fn atom_counts() -> TaskTable {
    let mut text = String::from("smiles,value\n");
    for s in chains() {
        text.push_str(&format!("{s},{}\n", graph(&s).atoms.len()));
    }
    merge_tasks(&[parse_dataset(text.as_bytes(), "atoms").unwrap()]).unwrap()
}

fn config(epochs: usize) -> TrainConfig {
    TrainConfig {
        max_epochs: epochs,
        ..TrainConfig::default()
    }
}

#[test]
fn training_loss_falls_on_a_learnable_target() {
    let table = atom_counts();
    let graphs = featurize_table(&table);
    let (train, _) = make_split(table.len(), 0.8, 0).unwrap();
    let model = Model::new(ModelConfig::new(ModelKind::Gin, 1), 0).unwrap();
    let run = train_fold(&table, &graphs, &train, &train, model, &config(200), 0).unwrap();
    let first = run.history[0].train_loss;
    let last = run.history.last().unwrap().train_loss;
    assert!(last < 0.1 * first, "{first} -> {last}");
}

#[test]
fn same_seed_gives_identical_history() {
    let table = atom_counts();
    let graphs = featurize_table(&table);
    let plan = make_plan(table.len(), 0.8, 5, 3).unwrap();
    let f = &plan.folds[1];
    let runs: Vec<_> = (0..2)
        .map(|_| {
            let model = Model::new(ModelConfig::new(ModelKind::Gain, 1), 9).unwrap();
            train_fold(&table, &graphs, &f.train, &f.validation, model, &config(30), 9).unwrap()
        })
        .collect();
    let losses = |r: &mtgnn::train::FoldRun| -> Vec<(u64, u64, u64)> {
        r.history
            .iter()
            .map(|h| (h.train_loss.to_bits(), h.val_loss.to_bits(), h.lr.to_bits()))
            .collect()
    };
    assert_eq!(losses(&runs[0]), losses(&runs[1]));
    assert_eq!(runs[0].model, runs[1].model);
    assert_eq!(runs[0].best_epoch, runs[1].best_epoch);
}

#[test]
fn single_task_metric_equals_masked_loss() {
    let table = atom_counts();
    let graphs = featurize_table(&table);
    let model = Model::new(ModelConfig::new(ModelKind::Gin, 1), 2).unwrap();
    let rows: Vec<usize> = (0..table.len()).step_by(3).collect();
    let scalers = vec![TaskScaler::IDENTITY];
    let eval = evaluate(&model, &scalers, &table, &graphs, &rows).unwrap();
    let (target, mask) = scaled_targets(&table, &rows, &scalers);
    let pred = predict_rows(&model, &graphs, &rows).unwrap();
    let direct = masked_loss(&pred, &target, &mask).unwrap();
    assert!((eval.rmse[0].unwrap() - direct).abs() < 1e-12);
    assert_eq!(eval.predictions.len(), rows.len());
}

#[test]
fn zero_model_on_standardized_targets_scores_the_std() {
    let table = atom_counts();
    let graphs = featurize_table(&table);
    let mut model = Model::new(ModelConfig::new(ModelKind::Gin, 1), 2).unwrap();
    for p in model.params_mut() {
        if p.name.starts_with("head.") {
            p.value.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }
    let rows: Vec<usize> = (0..table.len()).collect();
    let values: Vec<f64> = rows.iter().map(|&r| table.value(r, 0).unwrap()).collect();
    let scaler = TaskScaler::fit(&values);
    let n = values.len() as f64;
    let population_std =
        (values.iter().map(|v| (v - scaler.mean).powi(2)).sum::<f64>() / n).sqrt();
    let eval = evaluate(&model, &[scaler], &table, &graphs, &rows).unwrap();
    assert!((eval.rmse[0].unwrap() - population_std).abs() < 1e-12);
}

#[test]
fn learning_rate_never_rises() {
    let table = atom_counts();
    let graphs = featurize_table(&table);
    let plan = make_plan(table.len(), 0.8, 5, 0).unwrap();
    let f = &plan.folds[0];
    let cfg = TrainConfig {
        scheduler_patience: 5,
        ..config(60)
    };
    let model = Model::new(ModelConfig::new(ModelKind::Gin, 1), 0).unwrap();
    let run = train_fold(&table, &graphs, &f.train, &f.validation, model, &cfg, 0).unwrap();
    assert!(run.history.windows(2).all(|w| w[1].lr <= w[0].lr));
    assert!(run.history.last().unwrap().lr < cfg.learning_rate);
    let csv = history_csv(&run.history);
    assert_eq!(csv.lines().count(), run.history.len() + 1);
}

#[test]
fn missing_cells_do_not_enter_the_loss() {
    let a = parse_dataset("smiles,value\nCC,1\nCCC,2\nCCCC,3\nCCO,4\nCCCO,5\nCCCCO,6\nCO,7\nCCCCC,8\nOCCO,9\nCCCCCC,10\n".as_bytes(), "a").unwrap();
    let b = parse_dataset("smiles,value\nCC,-1\nCCCC,-3\nCCCO,-5\nCO,-7\nOCCO,-9\nCCCCCCC,-11\n".as_bytes(), "b").unwrap();
    let table = merge_tasks(&[a, b]).unwrap();
    let graphs = featurize_table(&table);
    let plan = make_plan(table.len(), 0.8, 2, 1).unwrap();
    let cv = cross_validate(
        &table,
        &graphs,
        &plan,
        &ModelConfig::new(ModelKind::Gin, 2),
        &config(5),
    )
    .unwrap();
    assert_eq!(cv.folds.len(), 2);
    for fold in &cv.folds {
        assert!(fold.run.history.iter().all(|h| h.train_loss.is_finite()));
        let counted: usize = fold.test.counts.iter().sum();
        let present = plan
            .test
            .iter()
            .map(|&r| table.present(r, 0) as usize + table.present(r, 1) as usize)
            .sum::<usize>();
        assert_eq!(counted, present);
    }
}
