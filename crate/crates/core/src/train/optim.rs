use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::autodiff::Tensor;
use crate::gnn::Param;

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(params: &[Param]) -> Adam {
        let zeros = |p: &Param| Tensor::zeros(p.value.rows(), p.value.cols());
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: params.iter().map(zeros).collect(),
            v: params.iter().map(zeros).collect(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Updates every unfrozen parameter from `grads` (aligned with `params`).
    /// Frozen parameters are skipped whatever their gradient.
    pub fn step(
        &mut self,
        params: &mut [Param],
        grads: &[Option<&Tensor>],
        lr: f64,
    ) -> Result<(), TrainError> {
        assert_eq!(params.len(), self.m.len(), "optimizer built for another model");
        assert_eq!(params.len(), grads.len());
        if let Some(p) = params
            .iter()
            .zip(grads)
            .find(|(p, g)| !p.frozen && g.is_none())
        {
            return Err(TrainError::MissingGradient(p.0.name.clone()));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (i, p) in params.iter_mut().enumerate() {
            if p.frozen {
                continue;
            }
            let g = grads[i].expect("checked above");
            let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let moments = m.iter_mut().zip(v.iter_mut());
            for ((x, &gj), (mj, vj)) in p.value.data_mut().iter_mut().zip(g.data()).zip(moments) {
                *mj = b1 * *mj + (1.0 - b1) * gj;
                *vj = b2 * *vj + (1.0 - b2) * gj * gj;
                *x -= lr * (*mj / c1) / ((*vj / c2).sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Multiplies the learning rate by `gamma` once the monitored loss has gone
/// `patience` epochs without a strict improvement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateauScheduler {
    pub lr: f64,
    pub gamma: f64,
    pub patience: usize,
    /// An epoch improves when its loss is below `best − tolerance`.
    pub tolerance: f64,
    best: f64,
    bad_epochs: usize,
}

impl PlateauScheduler {
    pub fn new(lr: f64, gamma: f64, patience: usize) -> PlateauScheduler {
        PlateauScheduler {
            lr,
            gamma,
            patience,
            tolerance: 1e-8,
            best: f64::INFINITY,
            bad_epochs: 0,
        }
    }

    /// Records one epoch's validation loss and returns the rate for the next.
    pub fn step(&mut self, loss: f64) -> f64 {
        if loss < self.best - self.tolerance {
            self.best = loss;
            self.bad_epochs = 0;
        } else {
            self.bad_epochs += 1;
            if self.bad_epochs >= self.patience {
                self.lr *= self.gamma;
                self.bad_epochs = 0;
            }
        }
        self.lr
    }
}
