use serde::{Deserialize, Serialize};

/// Z-score transform of one task's targets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskScaler {
    pub mean: f64,
    pub std: f64,
}

impl TaskScaler {
    pub const IDENTITY: TaskScaler = TaskScaler { mean: 0.0, std: 1.0 };

    /// Mean and sample standard deviation of `values`. Falls back to unit
    /// scale when fewer than two values or no spread are available.
    pub fn fit(values: &[f64]) -> TaskScaler {
        if values.is_empty() {
            return TaskScaler::IDENTITY;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        if values.len() < 2 {
            return TaskScaler { mean, std: 1.0 };
        }
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        let std = var.sqrt();
        TaskScaler {
            mean,
            std: if std > 0.0 && std.is_finite() { std } else { 1.0 },
        }
    }

    pub fn transform(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }

    pub fn inverse(&self, v: f64) -> f64 {
        v * self.std + self.mean
    }
}
