//! Transfer learning, the dataset-size study, inference timing, weight
//! histograms and grouped-versus-pooled comparisons, each producing an
//! [`ExperimentReport`] plus CSV artifacts.

mod bench;
mod compare;
mod size;
mod stats;
mod transfer;
mod weights;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use bench::{run_inference_bench, time_inference, BenchPoint, DEFAULT_REPEATS, DEFAULT_WARMUP};
pub use compare::{
    comparison_csv, restrict_plan, run_group_comparison, run_single_vs_multi, TaskComparison,
};
pub use size::{improvement_pct, run_size_study, SizePoint, DEFAULT_FRACTIONS};
pub use stats::{welch_t_test, WelchTest, ALPHA};
pub use transfer::{run_transfer, run_transfer_all, TransferResult};
pub use weights::{export_weight_histograms, resolve_layer, weight_histogram, WeightHistogram};

use crate::data::DataError;
use crate::gnn::GnnError;
use crate::train::TrainError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] GnnError),
    #[error("invalid experiment setup: {0}")]
    Invalid(String),
    #[error("model has no layer named {0:?}")]
    UnknownLayer(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Mean and sample standard deviation of repeated measurements.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub repeats: usize,
    pub seeds: Vec<u64>,
    pub values: Vec<f64>,
}

impl Summary {
    pub fn new(values: Vec<f64>, seeds: Vec<u64>) -> Summary {
        let (mean, std) = if values.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            crate::train::mean_std(&values)
        };
        Summary {
            mean,
            std,
            repeats: values.len(),
            seeds,
            values,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metric {
    pub condition: String,
    pub task: String,
    pub name: String,
    #[serde(flatten)]
    pub summary: Summary,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Environment {
    pub cpu: String,
    pub threads: usize,
}

impl Environment {
    pub fn detect() -> Environment {
        let cpu = fs::read_to_string("/proc/cpuinfo")
            .ok()
            .and_then(|s| {
                s.lines()
                    .find(|l| l.starts_with("model name"))
                    .and_then(|l| l.split_once(':'))
                    .map(|(_, v)| v.trim().to_string())
            })
            .unwrap_or_else(|| std::env::consts::ARCH.to_string());
        let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
        Environment { cpu, threads }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub config_fingerprint: String,
    pub metrics: Vec<Metric>,
    pub environment: Environment,
    /// File name to contents; written next to `report.json`.
    #[serde(skip)]
    pub files: BTreeMap<String, String>,
}

impl ExperimentReport {
    pub fn new(experiment: &str, config_fingerprint: String) -> ExperimentReport {
        ExperimentReport {
            experiment: experiment.to_string(),
            config_fingerprint,
            metrics: Vec::new(),
            environment: Environment::detect(),
            files: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, condition: &str, task: &str, name: &str, summary: Summary) {
        self.metrics.push(Metric {
            condition: condition.to_string(),
            task: task.to_string(),
            name: name.to_string(),
            summary,
        });
    }

    pub fn metric(&self, condition: &str, task: &str, name: &str) -> Option<&Metric> {
        self.metrics
            .iter()
            .find(|m| m.condition == condition && m.task == task && m.name == name)
    }

    pub fn to_json(&self) -> String {
        let mut value = serde_json::to_value(self).expect("report serializes");
        value["artifacts"] = self.files.keys().cloned().collect::<Vec<_>>().into();
        serde_json::to_string_pretty(&value).expect("report serializes")
    }

    /// Writes `report.json` and every artifact into `dir`; returns the paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| ExperimentError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        let mut written = Vec::new();
        let report = dir.join("report.json");
        fs::write(&report, self.to_json()).map_err(io(&report))?;
        written.push(report);
        for (name, contents) in &self.files {
            let path = dir.join(name);
            fs::write(&path, contents).map_err(io(&path))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// SHA-256 hex of the JSON form of `config`.
pub fn fingerprint<T: Serialize>(config: &T) -> String {
    let json = serde_json::to_string(config).expect("config serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}
