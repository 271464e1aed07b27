use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use mtgnn::data::{
    apply_override, correlation_matrix, load_bundled, load_dataset, make_plan, merge_tasks,
    parse_override, select_target_groups, Dataset, TaskTable, UndefinedPolicy,
};
use mtgnn::experiments::{
    export_weight_histograms, fingerprint, run_group_comparison, run_inference_bench,
    run_single_vs_multi, run_size_study, run_transfer_all, ExperimentReport, Summary,
};
use mtgnn::featurize::{featurize_graph, FeatureSchema, GraphBatch};
use mtgnn::gnn::{Checkpoint, Model, ModelKind};
use mtgnn::train::{
    cross_validate, evaluate, featurize_table, fold_seed, history_csv, predictions_csv,
    train_fold, Evaluation, TrainConfig,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;

/// Creates `<out>/<UTC timestamp>-<config hash>` and stores the config in it.
pub fn create_run_dir(cfg: &RunConfig, command: &str) -> Result<PathBuf, CliError> {
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
    let hash = fingerprint(&(command, cfg));
    let base = format!("{stamp}-{}", &hash[..12]);
    let mut dir = cfg.out_dir.join(&base);
    let mut n = 1;
    while dir.exists() {
        dir = cfg.out_dir.join(format!("{base}-{n}"));
        n += 1;
    }
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    write(&dir, "config.toml", &cfg.to_toml())?;
    Ok(dir)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::io(&path, e))
}

fn write_report(dir: &Path, report: &ExperimentReport) -> Result<(), CliError> {
    report.write(dir)?;
    Ok(())
}

fn load_task(cfg: &RunConfig, task: &str, files: &BTreeMap<String, PathBuf>) -> Result<Dataset, CliError> {
    let data = match files.get(task).or_else(|| cfg.datasets.get(task)) {
        Some(path) => load_dataset(path, task)?,
        None => load_bundled(&cfg.resolved_data_dir(), task)?,
    };
    info!(
        "{task}: {} molecules ({} rows read, {} unparseable, {} duplicates)",
        data.len(),
        data.report.rows_read,
        data.report.unparseable,
        data.report.duplicates
    );
    Ok(data)
}

/// Merges `tasks` in order, taking files from `files`, `[datasets]` or the
/// bundled directory.
pub fn load_table(
    cfg: &RunConfig,
    tasks: &[String],
    files: &BTreeMap<String, PathBuf>,
) -> Result<TaskTable, CliError> {
    let sets = tasks
        .iter()
        .map(|t| load_task(cfg, t, files))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(merge_tasks(&sets)?)
}

fn metrics_csv(eval: &Evaluation) -> String {
    let mut out = String::from("task,rmse,count\n");
    for (t, name) in eval.task_names.iter().enumerate() {
        let rmse = eval.rmse[t].map(|r| r.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{name},{rmse},{}", eval.counts[t]);
    }
    out
}

fn print_metrics(eval: &Evaluation) {
    for (t, name) in eval.task_names.iter().enumerate() {
        match eval.rmse[t] {
            Some(r) => println!("{name}: test RMSE {r} over {} molecules", eval.counts[t]),
            None => println!("{name}: no test values"),
        }
    }
}

/// `smiles,value` file of the rows of `table` carrying `task`.
fn task_csv(table: &TaskTable, task: usize, rows: &[usize]) -> String {
    let mut out = String::from("smiles,value\n");
    for &r in rows {
        if let Some(v) = table.value(r, task) {
            let _ = writeln!(out, "{},{v}", table.smiles[r]);
        }
    }
    out
}

#[derive(Serialize)]
struct SplitRecord<'a> {
    seed: u64,
    train: &'a [usize],
    validation: &'a [usize],
    test: &'a [usize],
}

pub fn select_targets(cfg: &RunConfig, dir: &Path) -> Result<Vec<Vec<String>>, CliError> {
    let table = load_table(cfg, &cfg.tasks, &BTreeMap::new())?;
    let corr = correlation_matrix(&table, cfg.select.min_overlap);
    let policy = if cfg.select.skip_undefined {
        UndefinedPolicy::Skip
    } else {
        UndefinedPolicy::Error
    };
    let mut groups = select_target_groups(&corr, cfg.select.threshold, policy)?;
    if let Some(path) = &cfg.select.override_file {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
        groups = apply_override(&groups, &parse_override(&text)?)?;
    }
    write(dir, "correlation.csv", &corr.to_csv())?;
    let listing: String = groups.iter().map(|g| g.join(",") + "\n").collect();
    write(dir, "groups.txt", &listing)?;
    for g in &groups {
        println!("group: {}", g.join(", "));
    }
    Ok(groups)
}

pub fn train(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let table = load_table(cfg, &cfg.tasks, &BTreeMap::new())?;
    let graphs = featurize_table(&table);
    let seed = cfg.seeds[0];
    let tc = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    let plan = make_plan(table.len(), tc.train_fraction, tc.folds, seed)?;
    let fold = &plan.folds[0];
    let run_seed = fold_seed(seed, 0);
    let model = Model::new(cfg.model.to_config(cfg.model.kind, table.task_count()), run_seed)?;
    let run = train_fold(&table, &graphs, &fold.train, &fold.validation, model, &tc, run_seed)?;
    let eval = evaluate(&run.model, &run.scalers, &table, &graphs, &plan.test)?;

    Checkpoint::from_model(&run.model, &table.task_names, &run.scalers).save(&dir.join("checkpoint.json"))?;
    write(dir, "history.csv", &history_csv(&run.history))?;
    write(dir, "metrics.csv", &metrics_csv(&eval))?;
    write(dir, "predictions.csv", &predictions_csv(&eval.predictions))?;
    let split = SplitRecord {
        seed,
        train: &fold.train,
        validation: &fold.validation,
        test: &plan.test,
    };
    write(dir, "split.json", &serde_json::to_string_pretty(&split).expect("split serializes"))?;
    for (t, name) in table.task_names.iter().enumerate() {
        write(dir, &format!("test_{name}.csv"), &task_csv(&table, t, &plan.test))?;
    }
    println!(
        "{}: best epoch {} of {}, validation loss {:.4}",
        cfg.model.kind,
        run.best_epoch,
        run.history.len(),
        run.best_val_loss
    );
    print_metrics(&eval);
    Ok(())
}

pub fn cv(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let table = load_table(cfg, &cfg.tasks, &BTreeMap::new())?;
    let graphs = featurize_table(&table);
    let mc = cfg.model.to_config(cfg.model.kind, table.task_count());
    let mut rows = String::from("task,seed,fold,rmse,best_epoch\n");
    let mut per_task: Vec<Vec<f64>> = vec![Vec::new(); table.task_count()];
    for &seed in &cfg.seeds {
        let tc = TrainConfig {
            seed,
            ..cfg.train.clone()
        };
        let plan = make_plan(table.len(), tc.train_fraction, tc.folds, seed)?;
        let out = cross_validate(&table, &graphs, &plan, &mc, &tc)?;
        for f in &out.folds {
            let tag = format!("seed{seed}_fold{}", f.fold);
            Checkpoint::from_model(&f.run.model, &table.task_names, &f.run.scalers)
                .save(&dir.join(format!("checkpoint_{tag}.json")))?;
            write(dir, &format!("history_{tag}.csv"), &history_csv(&f.run.history))?;
            write(dir, &format!("predictions_{tag}.csv"), &predictions_csv(&f.test.predictions))?;
            for (t, name) in table.task_names.iter().enumerate() {
                if let Some(r) = f.test.rmse[t] {
                    per_task[t].push(r);
                    let _ = writeln!(rows, "{name},{seed},{},{r},{}", f.fold, f.run.best_epoch);
                }
            }
        }
    }
    write(dir, "metrics.csv", &rows)?;
    let mut report = ExperimentReport::new("cv", fingerprint(&(&cfg.tasks, &mc, &cfg.train, &cfg.seeds)));
    for (t, name) in table.task_names.iter().enumerate() {
        let s = Summary::new(per_task[t].clone(), cfg.seeds.clone());
        println!("{name}: test RMSE {:.4} ± {:.4} over {} folds", s.mean, s.std, s.repeats);
        report.push(&cfg.model.kind.to_string(), name, "test_rmse", s);
    }
    write_report(dir, &report)
}

/// Parses `NAME=PATH` pairs.
pub fn parse_pairs(pairs: &[String], what: &str) -> Result<BTreeMap<String, PathBuf>, CliError> {
    let mut out = BTreeMap::new();
    for p in pairs {
        let (name, path) = p
            .split_once('=')
            .filter(|(n, v)| !n.is_empty() && !v.is_empty())
            .ok_or_else(|| CliError::Config(format!("{what} {p:?} is not NAME=PATH")))?;
        if out.insert(name.to_string(), PathBuf::from(path)).is_some() {
            return Err(CliError::Config(format!("{what} {name} given twice")));
        }
    }
    Ok(out)
}

pub fn eval(cfg: &RunConfig, dir: &Path, checkpoint: &Path, datasets: &[String]) -> Result<(), CliError> {
    let ck = Checkpoint::load(checkpoint)?;
    let model = ck.to_model()?;
    let files = parse_pairs(datasets, "dataset")?;
    if let Some(extra) = files.keys().find(|t| !ck.tasks.contains(t)) {
        return Err(CliError::Config(format!("checkpoint has no task {extra}")));
    }
    let table = load_table(cfg, &ck.tasks, &files)?;
    let graphs = featurize_table(&table);
    let rows: Vec<usize> = (0..table.len()).collect();
    let eval = evaluate(&model, &ck.scalers, &table, &graphs, &rows)?;
    write(dir, "metrics.csv", &metrics_csv(&eval))?;
    write(dir, "predictions.csv", &predictions_csv(&eval.predictions))?;
    print_metrics(&eval);
    Ok(())
}

pub fn transfer(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let table = load_table(cfg, &cfg.tasks, &BTreeMap::new())?;
    let tc = TrainConfig {
        seed: cfg.seeds[0],
        ..cfg.train.clone()
    };
    let (report, results) = run_transfer_all(&table, &cfg.model.to_config(cfg.model.kind, 1), &tc)?;
    for r in &results {
        println!(
            "{}: transfer {:.4} ± {:.4}, single {:.4} ± {:.4}",
            r.holdout, r.transfer.mean, r.transfer.std, r.single.mean, r.single.std
        );
    }
    write_report(dir, &report)
}

pub fn size_study(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let e = &cfg.experiment;
    let mut tasks = vec![e.target.clone()];
    tasks.extend(e.companions.iter().cloned());
    let table = load_table(cfg, &tasks, &BTreeMap::new())?;
    let (report, points) = run_size_study(
        &table,
        &e.target,
        &e.companions,
        &e.fractions,
        &cfg.model.to_config(cfg.model.kind, 1),
        &cfg.train,
        &cfg.seeds,
    )?;
    for p in &points {
        println!(
            "fraction {}: single {:.4}, multitask {:.4} ({:+.1}%)",
            p.fraction, p.single.mean, p.multi.mean, p.improvement_pct
        );
    }
    write_report(dir, &report)
}

pub fn bench_inference(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let e = &cfg.experiment;
    if cfg.tasks.len() < 2 {
        return Err(CliError::Config("bench-inference needs at least two tasks".into()));
    }
    let table = load_table(cfg, &cfg.tasks, &BTreeMap::new())?;
    let seed = cfg.seeds[0];
    let tc = TrainConfig {
        max_epochs: e.bench_epochs,
        seed,
        ..cfg.train.clone()
    };
    let quick = |names: &[String]| -> Result<Model, CliError> {
        let t = table.select_tasks(names)?;
        let graphs = featurize_table(&t);
        let plan = make_plan(t.len(), tc.train_fraction, tc.folds, seed)?;
        let f = &plan.folds[0];
        let m = Model::new(cfg.model.to_config(cfg.model.kind, names.len()), seed)?;
        Ok(train_fold(&t, &graphs, &f.train, &f.validation, m, &tc, seed)?.model)
    };
    let singles = cfg
        .tasks
        .iter()
        .map(|t| quick(std::slice::from_ref(t)))
        .collect::<Result<Vec<_>, _>>()?;
    let multis = (2..=cfg.tasks.len())
        .map(|k| quick(&cfg.tasks[..k]))
        .collect::<Result<Vec<_>, _>>()?;
    let molecules: Vec<GraphBatch> = load_task(cfg, &e.bench_molecules, &BTreeMap::new())?
        .entries
        .iter()
        .map(|en| featurize_graph(&en.graph))
        .collect();
    let (report, points) = run_inference_bench(&singles, &multis, &molecules, e.repeats)?;
    for p in &points {
        println!(
            "K={}: multitask {:.2} ms, {} single-task {:.2} ms, speedup {:.1}%",
            p.tasks,
            p.multi_seconds * 1e3,
            p.tasks,
            p.single_seconds * 1e3,
            p.speedup_pct
        );
    }
    write_report(dir, &report)
}

pub fn export_weights(cfg: &RunConfig, dir: &Path, checkpoints: &[String]) -> Result<(), CliError> {
    let files = parse_pairs(checkpoints, "checkpoint")?;
    if files.is_empty() {
        return Err(CliError::Config("give at least one --checkpoint LABEL=PATH".into()));
    }
    let models = files
        .iter()
        .map(|(label, path)| Ok((label.clone(), Checkpoint::load(path)?.to_model()?)))
        .collect::<Result<Vec<(String, Model)>, CliError>>()?;
    let refs: Vec<(String, &Model)> = models.iter().map(|(l, m)| (l.clone(), m)).collect();
    let (report, hists) = export_weight_histograms(&refs, &cfg.experiment.layer, cfg.experiment.bins)?;
    for h in &hists {
        println!(
            "{} {}: {} weights, mean {:.4}, std {:.4}",
            h.label,
            h.layer,
            h.total(),
            h.mean,
            h.std
        );
    }
    write_report(dir, &report)
}

pub fn group_comparison(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let groups = if cfg.experiment.groups.is_empty() {
        select_targets(cfg, dir)?
    } else {
        cfg.experiment.groups.clone()
    };
    let mut tasks: Vec<String> = Vec::new();
    for t in groups.iter().flatten() {
        if !tasks.contains(t) {
            tasks.push(t.clone());
        }
    }
    let table = load_table(cfg, &tasks, &BTreeMap::new())?;
    let (report, rows) = run_group_comparison(
        &table,
        &groups,
        &cfg.experiment.kinds,
        &cfg.model.to_config(cfg.model.kind, 1),
        &cfg.train,
        &cfg.seeds,
    )?;
    print_comparisons(&rows);
    write_report(dir, &report)
}

pub fn single_vs_multi(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let table = load_table(cfg, &cfg.tasks, &BTreeMap::new())?;
    let singles = if cfg.experiment.singles.is_empty() {
        cfg.tasks.clone()
    } else {
        cfg.experiment.singles.clone()
    };
    let mut report: Option<ExperimentReport> = None;
    for &kind in &cfg.experiment.kinds {
        let (r, rows) = run_single_vs_multi(
            &table,
            &cfg.tasks,
            &singles,
            kind,
            &cfg.model.to_config(kind, 1),
            &cfg.train,
            &cfg.seeds,
        )?;
        print_comparisons(&rows);
        report = Some(match report {
            None => r,
            Some(mut acc) => {
                acc.metrics.extend(r.metrics);
                let csv = &r.files["table2.csv"];
                let body = csv.split_once('\n').map(|x| x.1).unwrap_or("");
                acc.files.get_mut("table2.csv").expect("first report").push_str(body);
                acc
            }
        });
    }
    write_report(dir, &report.expect("at least one kind"))
}

fn print_comparisons(rows: &[mtgnn::experiments::TaskComparison]) {
    for r in rows {
        println!(
            "{} {}: {:.4} vs {:.4} (delta {:+.4}{})",
            r.kind,
            r.task,
            r.first.mean,
            r.second.mean,
            r.delta,
            r.welch
                .map(|w| format!(", p = {:.3}", w.p_value))
                .unwrap_or_default()
        );
    }
}

pub fn feature_schema() -> String {
    FeatureSchema::standard().to_json()
}

pub fn kinds_help() -> String {
    ModelKind::ALL
        .iter()
        .map(|k| k.name().to_ascii_lowercase())
        .collect::<Vec<_>>()
        .join(", ")
}
