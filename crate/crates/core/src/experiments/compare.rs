use log::info;
use serde::Serialize;

use super::{fingerprint, welch_t_test, ExperimentError, ExperimentReport, Summary, WelchTest};
use crate::data::{make_plan, Fold, SplitPlan, TaskTable};
use crate::featurize::GraphBatch;
use crate::gnn::{ModelConfig, ModelKind};
use crate::train::{cross_validate, featurize_table, CvOutcome, TrainConfig};

/// One task under two conditions, compared on fold test RMSEs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TaskComparison {
    pub task: String,
    pub kind: ModelKind,
    pub first: Summary,
    pub second: Summary,
    /// `first.mean − second.mean`.
    pub delta: f64,
    pub welch: Option<WelchTest>,
    /// `first` is lower and the difference is significant.
    pub first_better: bool,
}

impl TaskComparison {
    fn new(task: &str, kind: ModelKind, first: Summary, second: Summary) -> TaskComparison {
        let welch = welch_t_test(&first.values, &second.values);
        let first_better = first.mean < second.mean && welch.is_some_and(|w| w.significant());
        TaskComparison {
            task: task.to_string(),
            kind,
            delta: first.mean - second.mean,
            first,
            second,
            welch,
            first_better,
        }
    }
}

pub fn comparison_csv(rows: &[TaskComparison], first: &str, second: &str) -> String {
    let mut out = format!(
        "task,model,{first}_mean,{first}_std,{second}_mean,{second}_std,delta,p_value,{first}_better,repeats\n"
    );
    for r in rows {
        let p = r.welch.map(|w| w.p_value.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.task,
            r.kind,
            r.first.mean,
            r.first.std,
            r.second.mean,
            r.second.std,
            r.delta,
            p,
            r.first_better,
            r.first.repeats
        ));
    }
    out
}

/// Drops rows without any value in `table` from every part of `plan`.
pub fn restrict_plan(plan: &SplitPlan, table: &TaskTable) -> SplitPlan {
    SplitPlan {
        train: table.rows_with_any(&plan.train),
        test: table.rows_with_any(&plan.test),
        folds: plan
            .folds
            .iter()
            .map(|f| Fold {
                train: table.rows_with_any(&f.train),
                validation: table.rows_with_any(&f.validation),
            })
            .collect(),
        seed: plan.seed,
    }
}

/// Fold RMSEs of each `tasks` entry, appended across runs.
struct Collected {
    values: Vec<Vec<f64>>,
}

impl Collected {
    fn new(tasks: usize) -> Collected {
        Collected {
            values: vec![Vec::new(); tasks],
        }
    }

    fn add(&mut self, slot: usize, cv: &CvOutcome, task: &str) {
        self.values[slot].extend(cv.fold_rmse(task));
    }
}

fn run_cv(
    table: &TaskTable,
    graphs: &[GraphBatch],
    plan: &SplitPlan,
    kind: ModelKind,
    model: &ModelConfig,
    config: &TrainConfig,
    seed: u64,
) -> Result<CvOutcome, ExperimentError> {
    let mut mc = model.clone();
    mc.kind = kind;
    mc.tasks = table.task_count();
    let cfg = TrainConfig {
        seed,
        ..config.clone()
    };
    Ok(cross_validate(table, graphs, &restrict_plan(plan, table), &mc, &cfg)?)
}

fn check_tasks(table: &TaskTable, tasks: &[String]) -> Result<(), ExperimentError> {
    for t in tasks {
        if table.task_index(t).is_none() {
            return Err(crate::data::DataError::UnknownTask(t.clone()).into());
        }
    }
    if tasks.is_empty() {
        return Err(ExperimentError::Invalid("no tasks given".into()));
    }
    Ok(())
}

/// Multitask training on `group` against a single-task model for each task in
/// `singles` (a subset of `group`), sharing splits so every task is tested on
/// the same molecules. Artifact `table2.csv`; `first` is multitask.
pub fn run_single_vs_multi(
    table: &TaskTable,
    group: &[String],
    singles: &[String],
    kind: ModelKind,
    model: &ModelConfig,
    config: &TrainConfig,
    seeds: &[u64],
) -> Result<(ExperimentReport, Vec<TaskComparison>), ExperimentError> {
    check_tasks(table, group)?;
    if let Some(t) = singles.iter().find(|t| !group.contains(t)) {
        return Err(ExperimentError::Invalid(format!("{t} is not in the group")));
    }
    if seeds.is_empty() {
        return Err(ExperimentError::Invalid("no seeds given".into()));
    }
    let gt = table.select_tasks(group)?;
    let graphs = featurize_table(&gt);
    let mut multi = Collected::new(group.len());
    let mut single = Collected::new(singles.len());
    for &seed in seeds {
        let plan = make_plan(gt.len(), config.train_fraction, config.folds, seed)?;
        let cv = run_cv(&gt, &graphs, &plan, kind, model, config, seed)?;
        for (i, task) in group.iter().enumerate() {
            multi.add(i, &cv, task);
        }
        for (i, task) in singles.iter().enumerate() {
            let st = gt.project(std::slice::from_ref(task))?;
            let cv = run_cv(&st, &graphs, &plan, kind, model, config, seed)?;
            single.add(i, &cv, task);
        }
        info!("{kind} seed {seed}: single and multitask folds done");
    }
    let mut report = ExperimentReport::new(
        "single-vs-multi",
        fingerprint(&(group, singles, kind, model, config, seeds)),
    );
    for (i, task) in group.iter().enumerate() {
        let m = Summary::new(multi.values[i].clone(), seeds.to_vec());
        report.push("multitask", task, "test_rmse", m);
    }
    let rows: Vec<TaskComparison> = singles
        .iter()
        .enumerate()
        .map(|(i, task)| {
            let g = group.iter().position(|t| t == task).expect("checked");
            let m = Summary::new(multi.values[g].clone(), seeds.to_vec());
            let s = Summary::new(single.values[i].clone(), seeds.to_vec());
            report.push("single", task, "test_rmse", s.clone());
            TaskComparison::new(task, kind, m, s)
        })
        .collect();
    report
        .files
        .insert("table2.csv".into(), comparison_csv(&rows, "multitask", "single"));
    Ok((report, rows))
}

/// Each architecture trained per selected group versus one model on every
/// task, on one shared split of `table`. Artifact `table3.csv`; `first` is
/// grouped.
pub fn run_group_comparison(
    table: &TaskTable,
    groups: &[Vec<String>],
    kinds: &[ModelKind],
    model: &ModelConfig,
    config: &TrainConfig,
    seeds: &[u64],
) -> Result<(ExperimentReport, Vec<TaskComparison>), ExperimentError> {
    let all = table.task_names.clone();
    let flat: Vec<String> = groups.iter().flatten().cloned().collect();
    check_tasks(table, &flat)?;
    if seeds.is_empty() || kinds.is_empty() {
        return Err(ExperimentError::Invalid("no seeds or architectures given".into()));
    }
    let graphs = featurize_table(table);
    let mut report = ExperimentReport::new(
        "group-comparison",
        fingerprint(&(groups, kinds, model, config, seeds)),
    );
    let mut rows = Vec::new();
    for &kind in kinds {
        let mut grouped = Collected::new(all.len());
        let mut pooled = Collected::new(all.len());
        for &seed in seeds {
            let plan = make_plan(table.len(), config.train_fraction, config.folds, seed)?;
            let cv = run_cv(table, &graphs, &plan, kind, model, config, seed)?;
            for (i, task) in all.iter().enumerate() {
                pooled.add(i, &cv, task);
            }
            for group in groups {
                let gt = table.project(group)?;
                let cv = run_cv(&gt, &graphs, &plan, kind, model, config, seed)?;
                for task in group {
                    let i = table.task_index(task).expect("checked");
                    grouped.add(i, &cv, task);
                }
            }
            info!("{kind} seed {seed}: grouped and pooled folds done");
        }
        for (i, task) in all.iter().enumerate() {
            if grouped.values[i].is_empty() {
                continue;
            }
            let g = Summary::new(grouped.values[i].clone(), seeds.to_vec());
            let p = Summary::new(pooled.values[i].clone(), seeds.to_vec());
            report.push(&format!("grouped_{kind}"), task, "test_rmse", g.clone());
            report.push(&format!("all_{kind}"), task, "test_rmse", p.clone());
            rows.push(TaskComparison::new(task, kind, g, p));
        }
    }
    report
        .files
        .insert("table3.csv".into(), comparison_csv(&rows, "grouped", "all"));
    Ok((report, rows))
}
