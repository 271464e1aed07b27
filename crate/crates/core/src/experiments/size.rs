use std::collections::HashSet;

use log::info;
use serde::Serialize;

use super::{fingerprint, ExperimentError, ExperimentReport, Summary};
use crate::data::{make_folds, make_split, subsample, TaskTable};
use crate::gnn::{Model, ModelConfig};
use crate::train::{evaluate, featurize_table, fold_seed, train_fold, TrainConfig};

pub const DEFAULT_FRACTIONS: [f64; 8] = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// `(single − multi) / single · 100`.
pub fn improvement_pct(single: f64, multi: f64) -> f64 {
    (single - multi) / single * 100.0
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SizePoint {
    pub fraction: f64,
    /// Target-labelled training rows at this fraction (first seed).
    pub target_rows: usize,
    pub single: Summary,
    pub multi: Summary,
    pub improvement_pct: f64,
}

/// For each fraction of the target's training rows, a single-task model and a
/// multitask model that also sees every companion-only row are scored on one
/// fixed target test set. Artifact `fig4a.csv`.
#[allow(clippy::too_many_arguments)]
pub fn run_size_study(
    table: &TaskTable,
    target: &str,
    companions: &[String],
    fractions: &[f64],
    model: &ModelConfig,
    config: &TrainConfig,
    seeds: &[u64],
) -> Result<(ExperimentReport, Vec<SizePoint>), ExperimentError> {
    if companions.is_empty() || companions.iter().any(|c| c == target) {
        return Err(ExperimentError::Invalid(
            "companions must be non-empty and exclude the target".into(),
        ));
    }
    if seeds.is_empty() || fractions.is_empty() {
        return Err(ExperimentError::Invalid("no seeds or fractions given".into()));
    }
    if let Some(f) = fractions.iter().find(|&&f| !(f > 0.0 && f <= 1.0)) {
        return Err(ExperimentError::Invalid(format!("fraction {f} outside (0, 1]")));
    }
    let mut tasks = vec![target.to_string()];
    tasks.extend(companions.iter().cloned());
    let gt = table.select_tasks(&tasks)?;
    let single_table = gt.project(&tasks[..1])?;
    let graphs = featurize_table(&gt);
    let target_rows = gt.rows_with(0);
    let companion_rows: Vec<usize> = (0..gt.len()).filter(|&r| !gt.present(r, 0)).collect();
    let mut single_cfg = model.clone();
    single_cfg.tasks = 1;
    let mut multi_cfg = model.clone();
    multi_cfg.tasks = tasks.len();

    let mut single = vec![Vec::new(); fractions.len()];
    let mut multi = vec![Vec::new(); fractions.len()];
    let mut sizes = vec![0; fractions.len()];
    for (s, &seed) in seeds.iter().enumerate() {
        let (train, test) = make_split(target_rows.len(), config.train_fraction, seed)?;
        let train: Vec<usize> = train.iter().map(|&i| target_rows[i]).collect();
        let test: Vec<usize> = test.iter().map(|&i| target_rows[i]).collect();
        let cfg = TrainConfig {
            seed,
            ..config.clone()
        };
        for (f, &fraction) in fractions.iter().enumerate() {
            let rows = subsample(&train, fraction, seed)?;
            if s == 0 {
                sizes[f] = rows.len();
            }
            let fold = &make_folds(&rows, config.folds, seed)?[0];
            let run_seed = fold_seed(seed, f);

            let m = Model::new(single_cfg.clone(), run_seed)?;
            let run = train_fold(&single_table, &graphs, &fold.train, &fold.validation, m, &cfg, run_seed)?;
            let eval = evaluate(&run.model, &run.scalers, &single_table, &graphs, &test)?;
            single[f].push(eval.rmse[0].expect("test rows carry the target"));

            let held: HashSet<usize> = fold.validation.iter().copied().collect();
            let mut multi_train = fold.train.clone();
            multi_train.extend(companion_rows.iter().filter(|r| !held.contains(r)));
            multi_train.sort_unstable();
            let m = Model::new(multi_cfg.clone(), run_seed)?;
            let run = train_fold(&gt, &graphs, &multi_train, &fold.validation, m, &cfg, run_seed)?;
            let eval = evaluate(&run.model, &run.scalers, &gt, &graphs, &test)?;
            multi[f].push(eval.rmse[0].expect("test rows carry the target"));
            info!(
                "size study seed {seed} fraction {fraction}: single {:.4} multi {:.4}",
                single[f].last().unwrap(),
                multi[f].last().unwrap()
            );
        }
    }

    let mut report = ExperimentReport::new(
        "size-study",
        fingerprint(&(target, companions, fractions, model, config, seeds)),
    );
    let mut csv = String::from(
        "fraction,target_rows,single_mean,single_std,multi_mean,multi_std,improvement_pct,repeats\n",
    );
    let mut points = Vec::new();
    for (f, &fraction) in fractions.iter().enumerate() {
        let s = Summary::new(single[f].clone(), seeds.to_vec());
        let m = Summary::new(multi[f].clone(), seeds.to_vec());
        let p = SizePoint {
            fraction,
            target_rows: sizes[f],
            improvement_pct: improvement_pct(s.mean, m.mean),
            single: s,
            multi: m,
        };
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            p.fraction,
            p.target_rows,
            p.single.mean,
            p.single.std,
            p.multi.mean,
            p.multi.std,
            p.improvement_pct,
            p.single.repeats
        ));
        let cond = format!("fraction_{fraction}");
        report.push(&cond, target, "single_rmse", p.single.clone());
        report.push(&cond, target, "multi_rmse", p.multi.clone());
        points.push(p);
    }
    report.files.insert("fig4a.csv".into(), csv);
    Ok((report, points))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_models_give_zero() {
        assert_eq!(improvement_pct(0.7, 0.7), 0.0);
        assert!((improvement_pct(1.0, 0.8) - 20.0).abs() < 1e-12);
        assert!(improvement_pct(1.0, 1.1) < 0.0);
    }
}
