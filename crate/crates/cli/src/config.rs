use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mtgnn::data::{BUNDLED, DEFAULT_MIN_OVERLAP, DEFAULT_THRESHOLD};
use mtgnn::experiments::{DEFAULT_FRACTIONS, DEFAULT_REPEATS};
use mtgnn::gnn::{ModelConfig, ModelKind};
use mtgnn::train::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DATA_DIR_ENV: &str = "MTGNN_DATA_DIR";

/// Everything a run needs; unknown keys are rejected at every level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Directory holding the bundled CSVs.
    pub data_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub tasks: Vec<String>,
    pub seeds: Vec<u64>,
    /// Task name → CSV path for data outside the bundled set.
    pub datasets: BTreeMap<String, PathBuf>,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub select: SelectSection,
    pub experiment: ExperimentSection,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            data_dir: None,
            out_dir: PathBuf::from("runs"),
            tasks: BUNDLED.iter().map(|(t, _)| t.to_string()).collect(),
            seeds: vec![0],
            datasets: BTreeMap::new(),
            model: ModelSection::default(),
            train: TrainConfig::default(),
            select: SelectSection::default(),
            experiment: ExperimentSection::default(),
        }
    }
}

/// Model hyperparameters; the output count comes from the task list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub kind: ModelKind,
    pub hidden: usize,
    pub learnable_eps: bool,
    pub gru_iterations: usize,
    pub attention_dropout: f64,
    pub leaky_slope: f64,
    pub bn_momentum: f64,
}

impl Default for ModelSection {
    fn default() -> ModelSection {
        let m = ModelConfig::new(ModelKind::Gin, 1);
        ModelSection {
            kind: m.kind,
            hidden: m.hidden,
            learnable_eps: m.learnable_eps,
            gru_iterations: m.gru_iterations,
            attention_dropout: m.attention_dropout,
            leaky_slope: m.leaky_slope,
            bn_momentum: m.bn_momentum,
        }
    }
}

impl ModelSection {
    pub fn to_config(&self, kind: ModelKind, tasks: usize) -> ModelConfig {
        ModelConfig {
            kind,
            tasks,
            hidden: self.hidden,
            learnable_eps: self.learnable_eps,
            gru_iterations: self.gru_iterations,
            attention_dropout: self.attention_dropout,
            leaky_slope: self.leaky_slope,
            bn_momentum: self.bn_momentum,
            ..ModelConfig::new(kind, tasks)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectSection {
    pub threshold: f64,
    pub min_overlap: usize,
    pub override_file: Option<PathBuf>,
    /// Treat pairs with too few shared molecules as uncorrelated.
    pub skip_undefined: bool,
}

impl Default for SelectSection {
    fn default() -> SelectSection {
        SelectSection {
            threshold: DEFAULT_THRESHOLD,
            min_overlap: DEFAULT_MIN_OVERLAP,
            override_file: None,
            skip_undefined: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub kinds: Vec<ModelKind>,
    /// Training groups for group-comparison; empty means select them.
    pub groups: Vec<Vec<String>>,
    /// Tasks given a single-task baseline in single-vs-multi; empty means all.
    pub singles: Vec<String>,
    pub target: String,
    pub companions: Vec<String>,
    pub fractions: Vec<f64>,
    /// Task whose molecules are timed by bench-inference.
    pub bench_molecules: String,
    pub bench_epochs: usize,
    pub repeats: usize,
    pub layer: String,
    pub bins: usize,
}

impl Default for ExperimentSection {
    fn default() -> ExperimentSection {
        ExperimentSection {
            kinds: ModelKind::ALL.to_vec(),
            groups: Vec::new(),
            singles: Vec::new(),
            target: "logp".into(),
            companions: vec!["logd74".into(), "esol".into()],
            fractions: DEFAULT_FRACTIONS.to_vec(),
            bench_molecules: "freesolv".into(),
            bench_epochs: 3,
            repeats: DEFAULT_REPEATS,
            layer: "fc1".into(),
            bins: 50,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Rejects inconsistent settings before any computation starts.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.tasks.is_empty() {
            return bad("tasks must not be empty".into());
        }
        for t in &self.tasks {
            if !self.datasets.contains_key(t) && !BUNDLED.iter().any(|(b, _)| b == t) {
                return bad(format!("task {t} is neither bundled nor listed under [datasets]"));
            }
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        self.train
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.model
            .to_config(self.model.kind, self.tasks.len())
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        let s = &self.select;
        if s.threshold.is_nan() || s.threshold < 0.0 {
            return bad(format!("threshold {} must be non-negative", s.threshold));
        }
        if s.min_overlap < 2 {
            return bad("min_overlap must be at least 2".into());
        }
        let e = &self.experiment;
        if e.kinds.is_empty() {
            return bad("experiment.kinds must not be empty".into());
        }
        if let Some(f) = e.fractions.iter().find(|&&f| !(f > 0.0 && f <= 1.0)) {
            return bad(format!("fraction {f} outside (0, 1]"));
        }
        if e.repeats == 0 || e.bins == 0 || e.bench_epochs == 0 {
            return bad("repeats, bins and bench_epochs must be positive".into());
        }
        Ok(())
    }

    /// Data directory: config value, then the environment, then `./data`.
    pub fn resolved_data_dir(&self) -> PathBuf {
        self.data_dir
            .clone()
            .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("data"))
    }
}

/// Commented starting point for a config file.
pub fn template() -> String {
    let cfg = RunConfig {
        tasks: vec!["esol".into()],
        ..RunConfig::default()
    };
    format!(
        "# mtgnn run configuration; every key is optional.\n\
         # data_dir falls back to ${DATA_DIR_ENV}, then ./data.\n\
         # [datasets] maps extra task names to CSV files with a smiles column and a value column.\n\n{}",
        cfg.to_toml()
    )
}
