use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{self, AttentionVars, Edges, GruVars};
use super::GnnError;
use crate::autodiff::{BatchStats, BnMode, Tape, Tensor, Var};
use crate::featurize::{GraphBatch, FEATURE_WIDTH};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gin,
    Ggrnet,
    Gain,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Gin, ModelKind::Ggrnet, ModelKind::Gain];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Gin => "GIN",
            ModelKind::Ggrnet => "GGRNet",
            ModelKind::Gain => "GAIN",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gin" => Ok(ModelKind::Gin),
            "ggrnet" => Ok(ModelKind::Ggrnet),
            "gain" => Ok(ModelKind::Gain),
            _ => Err(format!("unknown model kind {s:?} (expected gin, ggrnet or gain)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub tasks: usize,
    #[serde(default = "defaults::in_width")]
    pub in_width: usize,
    #[serde(default = "defaults::hidden")]
    pub hidden: usize,
    #[serde(default)]
    pub learnable_eps: bool,
    #[serde(default = "defaults::iterations")]
    pub gru_iterations: usize,
    #[serde(default = "defaults::dropout")]
    pub attention_dropout: f64,
    #[serde(default = "defaults::slope")]
    pub leaky_slope: f64,
    #[serde(default = "defaults::momentum")]
    pub bn_momentum: f64,
}

mod defaults {
    pub fn in_width() -> usize {
        super::FEATURE_WIDTH
    }
    pub fn hidden() -> usize {
        95
    }
    pub fn iterations() -> usize {
        10
    }
    pub fn dropout() -> f64 {
        0.3
    }
    pub fn slope() -> f64 {
        0.2
    }
    pub fn momentum() -> f64 {
        0.1
    }
}

impl ModelConfig {
    pub fn new(kind: ModelKind, tasks: usize) -> ModelConfig {
        ModelConfig {
            kind,
            tasks,
            in_width: defaults::in_width(),
            hidden: defaults::hidden(),
            learnable_eps: false,
            gru_iterations: defaults::iterations(),
            attention_dropout: defaults::dropout(),
            leaky_slope: defaults::slope(),
            bn_momentum: defaults::momentum(),
        }
    }

    pub fn validate(&self) -> Result<(), GnnError> {
        let bad = |m: &str| Err(GnnError::InvalidConfig(m.to_string()));
        if self.tasks == 0 {
            return bad("at least one task is required");
        }
        if self.in_width == 0 || self.hidden == 0 {
            return bad("layer widths must be positive");
        }
        if !(0.0..1.0).contains(&self.attention_dropout) {
            return bad("attention dropout must lie in [0, 1)");
        }
        if !(self.bn_momentum > 0.0 && self.bn_momentum <= 1.0) {
            return bad("batchnorm momentum must lie in (0, 1]");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub frozen: bool,
}

/// A GIN, GGRNet or GAIN regressor with `tasks` outputs.
#[derive(Debug)]
pub struct Model {
    config: ModelConfig,
    params: Vec<Param>,
    running_mean: Vec<f64>,
    running_var: Vec<f64>,
    forwards: AtomicU64,
}

impl Clone for Model {
    fn clone(&self) -> Model {
        Model {
            config: self.config.clone(),
            params: self.params.clone(),
            running_mean: self.running_mean.clone(),
            running_var: self.running_var.clone(),
            forwards: AtomicU64::new(self.forward_count()),
        }
    }
}

impl PartialEq for Model {
    fn eq(&self, other: &Model) -> bool {
        self.config == other.config
            && self.params == other.params
            && self.running_mean == other.running_mean
            && self.running_var == other.running_var
    }
}

/// Vars created by [`Model::forward_tape`].
pub struct ForwardPass {
    /// `graph_count × tasks` predictions.
    pub output: Var,
    /// One leaf per model parameter, in [`Model::params`] order.
    pub params: Vec<Var>,
    /// Batch statistics when batchnorm ran in train mode.
    pub bn_stats: Option<BatchStats>,
    /// Pre-dropout attention coefficients (GAIN only).
    pub attention: Option<Var>,
}

pub const RUNNING_MEAN: &str = "conv.bn.running_mean";
pub const RUNNING_VAR: &str = "conv.bn.running_var";

fn glorot(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-bound..bound))
        .collect();
    Tensor::new(rows, cols, data).expect("init shape")
}

impl Model {
    /// A freshly initialized model. Weights are uniform in
    /// `±sqrt(6 / (fan_in + fan_out))`, biases and ε zero, batchnorm scale 1.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Model, GnnError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (i, d, k) = (config.in_width, config.hidden, config.tasks);
        let mut params = Vec::new();
        let mut add = |name: &str, value: Tensor| {
            params.push(Param {
                name: name.to_string(),
                value,
                frozen: false,
            })
        };
        add("conv.lin1.weight", glorot(&mut rng, i, d));
        add("conv.lin1.bias", Tensor::zeros(1, d));
        add("conv.lin2.weight", glorot(&mut rng, d, d));
        add("conv.lin2.bias", Tensor::zeros(1, d));
        if config.learnable_eps {
            add("conv.eps", Tensor::scalar(0.0));
        }
        add("conv.bn.gamma", Tensor::filled(1, d, 1.0));
        add("conv.bn.beta", Tensor::zeros(1, d));
        match config.kind {
            ModelKind::Gin => {}
            ModelKind::Ggrnet => {
                add("gru.message.weight", glorot(&mut rng, d, d));
                for gate in ["z", "r", "h"] {
                    add(&format!("gru.w{gate}"), glorot(&mut rng, d, d));
                    add(&format!("gru.u{gate}"), glorot(&mut rng, d, d));
                    add(&format!("gru.b{gate}"), Tensor::zeros(1, d));
                }
            }
            ModelKind::Gain => {
                add("attn.weight", glorot(&mut rng, d, d));
                add("attn.a", glorot(&mut rng, 2 * d, 1));
            }
        }
        add("head.fc1.weight", glorot(&mut rng, d, d));
        add("head.fc1.bias", Tensor::zeros(1, d));
        add("head.fc2.weight", glorot(&mut rng, d, k));
        add("head.fc2.bias", Tensor::zeros(1, k));
        Ok(Model {
            running_mean: vec![0.0; d],
            running_var: vec![1.0; d],
            config,
            params,
            forwards: AtomicU64::new(0),
        })
    }

    /// Assembles a model from stored parts, checking names and shapes against
    /// a fresh model of the same configuration.
    pub fn from_parts(
        config: ModelConfig,
        params: Vec<Param>,
        running_mean: Vec<f64>,
        running_var: Vec<f64>,
    ) -> Result<Model, GnnError> {
        let template = Model::new(config.clone(), 0)?;
        if params.len() != template.params.len() {
            return Err(GnnError::InvalidConfig(format!(
                "expected {} parameters, found {}",
                template.params.len(),
                params.len()
            )));
        }
        for (t, p) in template.params.iter().zip(&params) {
            if t.name != p.name || t.value.shape() != p.value.shape() {
                return Err(GnnError::InvalidConfig(format!(
                    "parameter {} {:?} does not match expected {} {:?}",
                    p.name,
                    p.value.shape(),
                    t.name,
                    t.value.shape()
                )));
            }
        }
        if running_mean.len() != config.hidden || running_var.len() != config.hidden {
            return Err(GnnError::InvalidConfig("batchnorm buffer length".into()));
        }
        Ok(Model {
            config,
            params,
            running_mean,
            running_var,
            forwards: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn kind(&self) -> ModelKind {
        self.config.kind
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn param(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Param> {
        self.params.iter_mut().find(|p| p.name == name)
    }

    pub fn running_mean(&self) -> &[f64] {
        &self.running_mean
    }

    pub fn running_var(&self) -> &[f64] {
        &self.running_var
    }

    pub fn set_running_stats(&mut self, mean: Vec<f64>, var: Vec<f64>) {
        assert_eq!(mean.len(), self.config.hidden);
        assert_eq!(var.len(), self.config.hidden);
        self.running_mean = mean;
        self.running_var = var;
    }

    /// Total number of learnable scalars.
    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Freezes the named parameters. Nothing changes if any name is unknown.
    pub fn freeze(&mut self, names: &[&str]) -> Result<(), GnnError> {
        if let Some(missing) = names.iter().find(|n| self.param(n).is_none()) {
            return Err(GnnError::UnknownParameter(missing.to_string()));
        }
        for p in &mut self.params {
            if names.contains(&p.name.as_str()) {
                p.frozen = true;
            }
        }
        Ok(())
    }

    /// Freezes every parameter whose name satisfies `pred`; returns how many matched.
    pub fn freeze_where(&mut self, pred: impl Fn(&str) -> bool) -> usize {
        let mut n = 0;
        for p in self.params.iter_mut().filter(|p| pred(&p.name)) {
            p.frozen = true;
            n += 1;
        }
        n
    }

    /// Freezes everything except the two fully connected head layers.
    pub fn freeze_trunk(&mut self) -> usize {
        self.freeze_where(|n| !n.starts_with("head."))
    }

    pub fn unfreeze_all(&mut self) {
        self.params.iter_mut().for_each(|p| p.frozen = false);
    }

    pub fn trainable_parameters(&self) -> Vec<&Param> {
        self.params.iter().filter(|p| !p.frozen).collect()
    }

    /// Forward passes run so far, counting each call once regardless of batch size.
    pub fn forward_count(&self) -> u64 {
        self.forwards.load(Ordering::Relaxed)
    }

    fn bn_frozen(&self) -> bool {
        ["conv.bn.gamma", "conv.bn.beta"]
            .iter()
            .all(|n| self.param(n).is_some_and(|p| p.frozen))
    }

    /// Records a forward pass on `tape`. Every parameter becomes a leaf that
    /// requires a gradient unless it is frozen.
    ///
    /// Batchnorm uses batch statistics in train mode, except when its scale
    /// and shift are frozen: a frozen trunk keeps its running statistics too.
    pub fn forward_tape(
        &self,
        tape: &mut Tape,
        batch: &GraphBatch,
        mode: Mode,
        rng: &mut ChaCha8Rng,
    ) -> Result<ForwardPass, GnnError> {
        let width = batch.node_features.cols();
        if width != self.config.in_width {
            return Err(GnnError::WidthMismatch {
                expected: self.config.in_width,
                found: width,
            });
        }
        self.forwards.fetch_add(1, Ordering::Relaxed);
        let vars: Vec<Var> = self
            .params
            .iter()
            .map(|p| tape.leaf(p.value.clone(), !p.frozen))
            .collect();
        let var = |name: &str| -> Var {
            let i = self
                .params
                .iter()
                .position(|p| p.name == name)
                .expect("parameter registered at construction");
            vars[i]
        };

        let edges = Edges::new(&batch.edges, batch.node_count());
        let x = tape.constant(batch.node_features.clone());
        let eps = self.config.learnable_eps.then(|| var("conv.eps"));
        let z = layers::gin_aggregate(tape, x, eps, &edges)?;
        let z = layers::linear(tape, z, var("conv.lin1.weight"), Some(var("conv.lin1.bias")))?;
        let z = tape.relu(z);
        let z = layers::linear(tape, z, var("conv.lin2.weight"), Some(var("conv.lin2.bias")))?;
        let z = tape.relu(z);
        let bn_mode = if mode == Mode::Train && !self.bn_frozen() {
            BnMode::Train
        } else {
            BnMode::Eval {
                mean: &self.running_mean,
                var: &self.running_var,
            }
        };
        let (h0, bn_stats) = tape.batchnorm(z, var("conv.bn.gamma"), var("conv.bn.beta"), bn_mode)?;

        let mut attention = None;
        let h = match self.config.kind {
            ModelKind::Gin => h0,
            ModelKind::Ggrnet => {
                let g = GruVars {
                    message: var("gru.message.weight"),
                    wz: var("gru.wz"),
                    uz: var("gru.uz"),
                    bz: var("gru.bz"),
                    wr: var("gru.wr"),
                    ur: var("gru.ur"),
                    br: var("gru.br"),
                    wh: var("gru.wh"),
                    uh: var("gru.uh"),
                    bh: var("gru.bh"),
                };
                layers::gated_recursion(tape, h0, &g, &edges, self.config.gru_iterations)?
            }
            ModelKind::Gain => {
                let a = AttentionVars {
                    weight: var("attn.weight"),
                    a: var("attn.a"),
                };
                let out = layers::attention(
                    tape,
                    h0,
                    &a,
                    &edges,
                    self.config.leaky_slope,
                    self.config.attention_dropout,
                    mode == Mode::Train,
                    rng,
                )?;
                attention = Some(out.coefficients);
                out.output
            }
        };

        let graphs: Arc<[usize]> = batch.graph_index_arc();
        let g = layers::readout(tape, h, graphs, batch.graph_count)?;
        let g = layers::linear(tape, g, var("head.fc1.weight"), Some(var("head.fc1.bias")))?;
        let g = tape.relu(g);
        let output = layers::linear(tape, g, var("head.fc2.weight"), Some(var("head.fc2.bias")))?;
        Ok(ForwardPass {
            output,
            params: vars,
            bn_stats,
            attention,
        })
    }

    /// Eval-mode predictions, `graph_count × tasks`.
    pub fn predict(&self, batch: &GraphBatch) -> Result<Tensor, GnnError> {
        let mut tape = Tape::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pass = self.forward_tape(&mut tape, batch, Mode::Eval, &mut rng)?;
        Ok(tape.value(pass.output).clone())
    }

    /// Folds train-mode batch statistics into the running estimates
    /// (unbiased variance, exponential moving average).
    pub fn update_running_stats(&mut self, stats: &BatchStats) {
        let m = self.config.bn_momentum;
        let correction = stats.rows as f64 / (stats.rows as f64 - 1.0);
        for (r, &b) in self.running_mean.iter_mut().zip(&stats.mean) {
            *r = (1.0 - m) * *r + m * b;
        }
        for (r, &b) in self.running_var.iter_mut().zip(&stats.var) {
            *r = (1.0 - m) * *r + m * b * correction;
        }
    }

    /// Copies every parameter whose name satisfies `pred` from `donor`,
    /// along with the batchnorm buffers when `pred` accepts the batchnorm scale.
    pub fn copy_from(&mut self, donor: &Model, pred: impl Fn(&str) -> bool) -> Result<usize, GnnError> {
        let mut n = 0;
        for p in self.params.iter_mut().filter(|p| pred(&p.name)) {
            let src = donor
                .param(&p.name)
                .ok_or_else(|| GnnError::UnknownParameter(p.name.clone()))?;
            if src.value.shape() != p.value.shape() {
                return Err(GnnError::InvalidConfig(format!("shape of {} differs", p.name)));
            }
            p.value = src.value.clone();
            n += 1;
        }
        if pred("conv.bn.gamma") {
            self.running_mean = donor.running_mean.clone();
            self.running_var = donor.running_var.clone();
        }
        Ok(n)
    }
}
