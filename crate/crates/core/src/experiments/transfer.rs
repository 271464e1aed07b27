use log::info;
use serde::Serialize;

use super::{fingerprint, welch_t_test, ExperimentError, ExperimentReport, Summary, WelchTest};
use crate::data::{make_plan, TaskTable};
use crate::gnn::{Model, ModelConfig};
use crate::train::{evaluate, featurize_table, fold_seed, train_fold, TrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransferResult {
    pub holdout: String,
    pub donors: Vec<String>,
    pub transfer: Summary,
    pub single: Summary,
    pub welch: Option<WelchTest>,
    /// Every frozen parameter and BN buffer survived retraining bit for bit.
    pub frozen_unchanged: bool,
    pub frozen_parameters: usize,
}

fn frozen_snapshot(model: &Model) -> Vec<u64> {
    let mut bits: Vec<u64> = model
        .params()
        .iter()
        .filter(|p| p.frozen)
        .flat_map(|p| p.value.data().iter().map(|v| v.to_bits()))
        .collect();
    bits.extend(model.running_mean().iter().map(|v| v.to_bits()));
    bits.extend(model.running_var().iter().map(|v| v.to_bits()));
    bits
}

/// Trains a multitask donor on `donors`, then per fold of the holdout data
/// retrains only the head of a copy (trunk frozen) and compares it with a
/// single-task model trained from scratch on the same rows.
pub fn run_transfer(
    table: &TaskTable,
    holdout: &str,
    donors: &[String],
    model: &ModelConfig,
    config: &TrainConfig,
) -> Result<TransferResult, ExperimentError> {
    if donors.is_empty() {
        return Err(ExperimentError::Invalid("no donor tasks".into()));
    }
    if donors.iter().any(|d| d == holdout) {
        return Err(ExperimentError::Invalid(format!(
            "holdout task {holdout} is also a donor"
        )));
    }
    config.validate()?;
    let dt = table.select_tasks(donors)?;
    let ht = table.select_tasks(&[holdout.to_string()])?;

    let dgraphs = featurize_table(&dt);
    let dplan = make_plan(dt.len(), config.train_fraction, config.folds, config.seed)?;
    let mut donor_cfg = model.clone();
    donor_cfg.tasks = donors.len();
    let seed = fold_seed(config.seed, 0);
    let donor = train_fold(
        &dt,
        &dgraphs,
        &dplan.folds[0].train,
        &dplan.folds[0].validation,
        Model::new(donor_cfg, seed)?,
        config,
        seed,
    )?
    .model;
    drop(dgraphs);
    info!("transfer donor for {holdout} trained on {}", donors.join("/"));

    let graphs = featurize_table(&ht);
    let plan = make_plan(ht.len(), config.train_fraction, config.folds, config.seed)?;
    let mut single_cfg = model.clone();
    single_cfg.tasks = 1;
    let mut transfer = Vec::new();
    let mut single = Vec::new();
    let mut frozen_unchanged = true;
    let mut frozen_parameters = 0;
    for (f, fold) in plan.folds.iter().enumerate() {
        let seed = fold_seed(config.seed, f);
        let mut m = Model::new(single_cfg.clone(), seed)?;
        m.copy_from(&donor, |name| !name.starts_with("head."))?;
        frozen_parameters = m.freeze_trunk();
        let before = frozen_snapshot(&m);
        let run = train_fold(&ht, &graphs, &fold.train, &fold.validation, m, config, seed)?;
        frozen_unchanged &= frozen_snapshot(&run.model) == before;
        let eval = evaluate(&run.model, &run.scalers, &ht, &graphs, &plan.test)?;
        transfer.push(eval.rmse[0].expect("holdout rows carry the task"));

        let m = Model::new(single_cfg.clone(), seed)?;
        let run = train_fold(&ht, &graphs, &fold.train, &fold.validation, m, config, seed)?;
        let eval = evaluate(&run.model, &run.scalers, &ht, &graphs, &plan.test)?;
        single.push(eval.rmse[0].expect("holdout rows carry the task"));
    }
    let seeds = vec![config.seed];
    Ok(TransferResult {
        holdout: holdout.to_string(),
        donors: donors.to_vec(),
        welch: welch_t_test(&transfer, &single),
        transfer: Summary::new(transfer, seeds.clone()),
        single: Summary::new(single, seeds),
        frozen_unchanged,
        frozen_parameters,
    })
}

/// Leaves out each task of `table` in turn with every other task as donor.
/// Artifact `table4.csv`.
pub fn run_transfer_all(
    table: &TaskTable,
    model: &ModelConfig,
    config: &TrainConfig,
) -> Result<(ExperimentReport, Vec<TransferResult>), ExperimentError> {
    if table.task_count() < 2 {
        return Err(ExperimentError::Invalid("transfer needs at least two tasks".into()));
    }
    let mut report = ExperimentReport::new(
        "transfer",
        fingerprint(&(&table.task_names, model, config)),
    );
    let mut csv = String::from(
        "task,transfer_mean,transfer_std,single_mean,single_std,delta,p_value,frozen_unchanged,repeats\n",
    );
    let mut results = Vec::new();
    for holdout in &table.task_names {
        let donors: Vec<String> = table
            .task_names
            .iter()
            .filter(|t| *t != holdout)
            .cloned()
            .collect();
        let r = run_transfer(table, holdout, &donors, model, config)?;
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.holdout,
            r.transfer.mean,
            r.transfer.std,
            r.single.mean,
            r.single.std,
            r.transfer.mean - r.single.mean,
            r.welch.map(|w| w.p_value.to_string()).unwrap_or_default(),
            r.frozen_unchanged,
            r.transfer.repeats
        ));
        report.push("transfer", holdout, "test_rmse", r.transfer.clone());
        report.push("single", holdout, "test_rmse", r.single.clone());
        results.push(r);
    }
    report.files.insert("table4.csv".into(), csv);
    Ok((report, results))
}
