//! JSON checkpoints. Floats are written with round-trip precision, so a
//! save/load cycle restores every parameter bit for bit.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::model::{Model, ModelConfig, ModelKind, Param, RUNNING_MEAN, RUNNING_VAR};
use super::GnnError;
use crate::autodiff::Tensor;
use crate::data::TaskScaler;
use crate::featurize::FeatureSchema;

pub const CHECKPOINT_FORMAT: &str = "mtgnn-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed checkpoint: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported checkpoint format {format:?} version {version}")]
    Unsupported { format: String, version: u32 },
    #[error("inconsistent checkpoint: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Model(#[from] GnnError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamRecord {
    pub name: String,
    pub shape: [usize; 2],
    pub values: Vec<f64>,
    pub frozen: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BufferRecord {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub schema_version: u32,
    pub kind: ModelKind,
    pub task_count: usize,
    pub feature_width: usize,
    pub schema_fingerprint: String,
    pub tasks: Vec<String>,
    /// Per-task target scaling used in training, in task order.
    pub scalers: Vec<TaskScaler>,
    pub model: ModelConfig,
    pub params: Vec<ParamRecord>,
    pub buffers: Vec<BufferRecord>,
}

impl Checkpoint {
    pub fn from_model(model: &Model, tasks: &[String], scalers: &[TaskScaler]) -> Checkpoint {
        let cfg = model.config();
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            schema_version: CHECKPOINT_VERSION,
            kind: cfg.kind,
            task_count: cfg.tasks,
            feature_width: cfg.in_width,
            schema_fingerprint: FeatureSchema::standard().fingerprint(),
            tasks: tasks.to_vec(),
            scalers: scalers.to_vec(),
            model: cfg.clone(),
            params: model
                .params()
                .iter()
                .map(|p| ParamRecord {
                    name: p.name.clone(),
                    shape: [p.value.rows(), p.value.cols()],
                    values: p.value.data().to_vec(),
                    frozen: p.frozen,
                })
                .collect(),
            buffers: vec![
                BufferRecord {
                    name: RUNNING_MEAN.to_string(),
                    values: model.running_mean().to_vec(),
                },
                BufferRecord {
                    name: RUNNING_VAR.to_string(),
                    values: model.running_var().to_vec(),
                },
            ],
        }
    }

    /// Rebuilds the model after checking the header against the body.
    pub fn to_model(&self) -> Result<Model, CheckpointError> {
        let bad = |m: String| Err(CheckpointError::Inconsistent(m));
        if self.format != CHECKPOINT_FORMAT || self.schema_version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Unsupported {
                format: self.format.clone(),
                version: self.schema_version,
            });
        }
        if self.kind != self.model.kind {
            return bad(format!("kind {} vs model {}", self.kind, self.model.kind));
        }
        if self.task_count != self.model.tasks || self.tasks.len() != self.task_count {
            return bad(format!(
                "task count {} with {} names and model width {}",
                self.task_count,
                self.tasks.len(),
                self.model.tasks
            ));
        }
        if self.scalers.len() != self.task_count {
            return bad(format!("{} scalers for {} tasks", self.scalers.len(), self.task_count));
        }
        if self.feature_width != self.model.in_width {
            return bad(format!(
                "feature width {} vs model input {}",
                self.feature_width, self.model.in_width
            ));
        }
        let expected = FeatureSchema::standard().fingerprint();
        if self.schema_fingerprint != expected {
            return bad("feature schema fingerprint differs from this build".into());
        }
        let mut params = Vec::with_capacity(self.params.len());
        for r in &self.params {
            let [rows, cols] = r.shape;
            if rows.checked_mul(cols) != Some(r.values.len()) {
                return bad(format!("{}: {} values for shape {:?}", r.name, r.values.len(), r.shape));
            }
            params.push(Param {
                name: r.name.clone(),
                value: Tensor::new(rows, cols, r.values.clone()).map_err(GnnError::from)?,
                frozen: r.frozen,
            });
        }
        let buffer = |name: &str| -> Result<Vec<f64>, CheckpointError> {
            self.buffers
                .iter()
                .find(|b| b.name == name)
                .map(|b| b.values.clone())
                .ok_or_else(|| CheckpointError::Inconsistent(format!("missing buffer {name}")))
        };
        if self.buffers.len() != 2 {
            return bad(format!("expected 2 buffers, found {}", self.buffers.len()));
        }
        let model = Model::from_parts(
            self.model.clone(),
            params,
            buffer(RUNNING_MEAN)?,
            buffer(RUNNING_VAR)?,
        )?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Checkpoint, CheckpointError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_json()).map_err(|source| CheckpointError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Checkpoint, CheckpointError> {
        let text = std::fs::read_to_string(path).map_err(|source| CheckpointError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Checkpoint::from_json(&text)
    }
}
