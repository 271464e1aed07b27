use std::time::Instant;

use serde::Serialize;

use super::{fingerprint, ExperimentError, ExperimentReport, Summary};
use crate::featurize::{batch_graphs, GraphBatch};
use crate::gnn::Model;

pub const DEFAULT_REPEATS: usize = 10;
pub const DEFAULT_WARMUP: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchPoint {
    pub tasks: usize,
    pub molecules: usize,
    /// Median seconds of one multitask forward over all molecules.
    pub multi_seconds: f64,
    /// Median seconds of `tasks` sequential single-task forwards.
    pub single_seconds: f64,
    /// `(single − multi) / single · 100`.
    pub speedup_pct: f64,
    /// Forward passes counted during the timed repeats.
    pub multi_forwards: u64,
    pub single_forwards: u64,
    pub repeats: usize,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// Times `multi` against the first `multi.tasks` models of `singles` on one
/// batch holding every molecule.
pub fn time_inference(
    singles: &[Model],
    multi: &Model,
    batch: &GraphBatch,
    repeats: usize,
    warmup: usize,
) -> Result<BenchPoint, ExperimentError> {
    let k = multi.config().tasks;
    if repeats == 0 {
        return Err(ExperimentError::Invalid("repeats must be at least 1".into()));
    }
    if singles.len() < k || singles[..k].iter().any(|m| m.config().tasks != 1) {
        return Err(ExperimentError::Invalid(format!(
            "a {k}-task model needs {k} single-task models"
        )));
    }
    let singles = &singles[..k];
    for _ in 0..warmup {
        multi.predict(batch)?;
        for m in singles {
            m.predict(batch)?;
        }
    }
    let multi_before = multi.forward_count();
    let single_before: u64 = singles.iter().map(Model::forward_count).sum();
    let mut multi_times = Vec::with_capacity(repeats);
    let mut single_times = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let t = Instant::now();
        std::hint::black_box(multi.predict(batch)?);
        multi_times.push(t.elapsed().as_secs_f64());
        let t = Instant::now();
        for m in singles {
            std::hint::black_box(m.predict(batch)?);
        }
        single_times.push(t.elapsed().as_secs_f64());
    }
    let multi_seconds = median(multi_times);
    let single_seconds = median(single_times);
    Ok(BenchPoint {
        tasks: k,
        molecules: batch.graph_count,
        multi_seconds,
        single_seconds,
        speedup_pct: (single_seconds - multi_seconds) / single_seconds * 100.0,
        multi_forwards: multi.forward_count() - multi_before,
        single_forwards: singles.iter().map(Model::forward_count).sum::<u64>() - single_before,
        repeats,
    })
}

/// One point per multitask model; artifact `fig6.csv`.
pub fn run_inference_bench(
    singles: &[Model],
    multis: &[Model],
    molecules: &[GraphBatch],
    repeats: usize,
) -> Result<(ExperimentReport, Vec<BenchPoint>), ExperimentError> {
    if molecules.is_empty() {
        return Err(ExperimentError::Invalid("no molecules to time".into()));
    }
    let batch = batch_graphs(molecules).expect("non-empty, same width");
    let tasks: Vec<usize> = multis.iter().map(|m| m.config().tasks).collect();
    let mut report = ExperimentReport::new(
        "bench-inference",
        fingerprint(&(molecules.len(), &tasks, repeats)),
    );
    let mut csv = String::from(
        "tasks,molecules,multi_seconds,single_seconds,speedup_pct,multi_forwards,single_forwards,repeats\n",
    );
    let mut points = Vec::new();
    for multi in multis {
        let p = time_inference(singles, multi, &batch, repeats, DEFAULT_WARMUP)?;
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            p.tasks,
            p.molecules,
            p.multi_seconds,
            p.single_seconds,
            p.speedup_pct,
            p.multi_forwards,
            p.single_forwards,
            p.repeats
        ));
        let cond = format!("{}_tasks", p.tasks);
        report.push(&cond, "all", "speedup_pct", Summary::new(vec![p.speedup_pct], vec![]));
        points.push(p);
    }
    report.files.insert("fig6.csv".into(), csv);
    Ok((report, points))
}
