//! Dataset loading, multitask merging, target grouping and splits.

mod corr;
mod groups;
mod scale;
mod split;
mod table;

pub use corr::{correlation_matrix, pearson, CorrelationMatrix, DEFAULT_MIN_OVERLAP};
pub use groups::{apply_override, parse_override, select_target_groups, UndefinedPolicy, DEFAULT_THRESHOLD};
pub use scale::TaskScaler;
pub use split::{make_folds, make_plan, make_split, subsample, Fold, SplitPlan};
pub use table::{
    filter_below, filter_freesolv, load_dataset, merge_tasks, parse_dataset, Dataset, Entry,
    LoadReport, TaskTable, FREESOLV_THRESHOLD,
};

use std::path::{Path, PathBuf};

use thiserror::Error;

/// Task names and file names of the bundled datasets.
pub const BUNDLED: [(&str, &str); 6] = [
    ("esol", "esol.csv"),
    ("freesolv", "freesolv.csv"),
    ("logd74", "logd74.csv"),
    ("logp", "logp.csv"),
    ("bp", "bp.csv"),
    ("logvp", "logvp.csv"),
];

/// Loads a bundled task from `dir`; FreeSolv loses its values below −10.
pub fn load_bundled(dir: &Path, task: &str) -> Result<Dataset, DataError> {
    let file = BUNDLED
        .iter()
        .find(|(t, _)| *t == task)
        .map(|(_, f)| *f)
        .ok_or_else(|| DataError::UnknownTask(task.to_string()))?;
    let d = load_dataset(&dir.join(file), task)?;
    Ok(if task == "freesolv" {
        let (kept, removed) = filter_freesolv(&d);
        log::info!("freesolv: removed {removed} rows below {FREESOLV_THRESHOLD}");
        kept
    } else {
        d
    })
}

/// Merges bundled `tasks` from `dir` into one table.
pub fn load_bundled_table(dir: &Path, tasks: &[&str]) -> Result<TaskTable, DataError> {
    let sets: Vec<Dataset> = tasks
        .iter()
        .map(|t| load_bundled(dir, t))
        .collect::<Result<_, _>>()?;
    merge_tasks(&sets)
}

fn shown(path: &Option<PathBuf>) -> String {
    path.as_ref()
        .map(|p| format!("{}: ", p.display()))
        .unwrap_or_default()
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    FileUnreadable {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}no usable rows for task {task}", shown(path))]
    EmptyDataset { path: Option<PathBuf>, task: String },
    #[error("{}line {line}: {reason}", shown(path))]
    MalformedRow {
        path: Option<PathBuf>,
        line: u64,
        reason: String,
    },
    #[error("no tasks given")]
    NoTasks,
    #[error("task {0} given twice")]
    DuplicateTask(String),
    #[error("unknown task {0}")]
    UnknownTask(String),
    #[error("correlation of {a} and {b} is undefined ({overlap} shared molecules)")]
    UndefinedCorrelation { a: String, b: String, overlap: usize },
    #[error("{rows} rows, need at least {needed}")]
    TooFewRows { rows: usize, needed: usize },
    #[error("fraction {0} outside (0, 1]")]
    InvalidFraction(f64),
    #[error("override line {line}: {reason}")]
    Override { line: usize, reason: String },
}

impl DataError {
    pub(crate) fn with_path(self, p: &Path) -> DataError {
        match self {
            DataError::EmptyDataset { task, .. } => DataError::EmptyDataset {
                path: Some(p.to_path_buf()),
                task,
            },
            DataError::MalformedRow { line, reason, .. } => DataError::MalformedRow {
                path: Some(p.to_path_buf()),
                line,
                reason,
            },
            other => other,
        }
    }
}
