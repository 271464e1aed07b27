//! Layer functions over tape values. Weights are stored `in × out` and
//! applied as `x · W`.

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use crate::autodiff::{AutodiffError, Tape, Var};

/// Edge endpoints of a batch as shared index vectors.
#[derive(Clone, Debug)]
pub struct Edges {
    pub sources: Arc<[usize]>,
    pub targets: Arc<[usize]>,
    pub nodes: usize,
}

impl Edges {
    pub fn new(edges: &[(usize, usize)], nodes: usize) -> Edges {
        Edges {
            sources: edges.iter().map(|e| e.0).collect(),
            targets: edges.iter().map(|e| e.1).collect(),
            nodes,
        }
    }

    /// The same edges plus one self-loop per node.
    pub fn with_self_loops(&self) -> Edges {
        let sources: Vec<usize> = self.sources.iter().copied().chain(0..self.nodes).collect();
        let targets: Vec<usize> = self.targets.iter().copied().chain(0..self.nodes).collect();
        Edges {
            sources: sources.into(),
            targets: targets.into(),
            nodes: self.nodes,
        }
    }
}

/// `Σ_{u→v} h_u` for every node `v`.
pub fn neighbour_sum(t: &mut Tape, h: Var, edges: &Edges) -> Result<Var, AutodiffError> {
    let msgs = t.gather_rows(h, edges.sources.clone())?;
    t.scatter_sum(msgs, edges.targets.clone(), edges.nodes)
}

/// `(1 + ε)·h_v + Σ_{u∈N(v)} h_u`; `eps = None` is GIN-0.
pub fn gin_aggregate(
    t: &mut Tape,
    h: Var,
    eps: Option<Var>,
    edges: &Edges,
) -> Result<Var, AutodiffError> {
    let agg = neighbour_sum(t, h, edges)?;
    let own = match eps {
        Some(e) => {
            let scaled = t.scale_by(h, e)?;
            t.add(h, scaled)?
        }
        None => h,
    };
    t.add(own, agg)
}

pub fn linear(t: &mut Tape, x: Var, w: Var, b: Option<Var>) -> Result<Var, AutodiffError> {
    let y = t.matmul(x, w)?;
    match b {
        Some(b) => t.add_row(y, b),
        None => Ok(y),
    }
}

/// Weights of the gated recursion, shared across iterations.
#[derive(Clone, Copy, Debug)]
pub struct GruVars {
    pub message: Var,
    pub wz: Var,
    pub uz: Var,
    pub bz: Var,
    pub wr: Var,
    pub ur: Var,
    pub br: Var,
    pub wh: Var,
    pub uh: Var,
    pub bh: Var,
}

/// One gated update:
///
/// ```text
/// m  = Σ_{u→v} h_u · M
/// z  = σ(m·Wz + h·Uz + bz)
/// r  = σ(m·Wr + h·Ur + br)
/// h~ = tanh(m·Wh + (r ⊙ h)·Uh + bh)
/// h' = (1 − z) ⊙ h + z ⊙ h~
/// ```
pub fn gru_step(t: &mut Tape, h: Var, g: &GruVars, edges: &Edges) -> Result<Var, AutodiffError> {
    let projected = t.matmul(h, g.message)?;
    let m = neighbour_sum(t, projected, edges)?;

    let gate = |t: &mut Tape, w: Var, u: Var, b: Var, state: Var| -> Result<Var, AutodiffError> {
        let a = t.matmul(m, w)?;
        let c = t.matmul(state, u)?;
        let s = t.add(a, c)?;
        t.add_row(s, b)
    };
    let z_pre = gate(t, g.wz, g.uz, g.bz, h)?;
    let z = t.sigmoid(z_pre);
    let r_pre = gate(t, g.wr, g.ur, g.br, h)?;
    let r = t.sigmoid(r_pre);
    let rh = t.mul(r, h)?;
    let cand_pre = gate(t, g.wh, g.uh, g.bh, rh)?;
    let cand = t.tanh(cand_pre);

    let keep = t.affine(z, -1.0, 1.0);
    let old = t.mul(keep, h)?;
    let new = t.mul(z, cand)?;
    t.add(old, new)
}

/// `iterations` shared-weight gated updates with a skip connection from the
/// input. With zero iterations the input is returned unchanged.
pub fn gated_recursion(
    t: &mut Tape,
    h0: Var,
    g: &GruVars,
    edges: &Edges,
    iterations: usize,
) -> Result<Var, AutodiffError> {
    if iterations == 0 {
        return Ok(h0);
    }
    let mut h = h0;
    for _ in 0..iterations {
        h = gru_step(t, h, g, edges)?;
    }
    t.add(h, h0)
}

#[derive(Clone, Copy, Debug)]
pub struct AttentionVars {
    pub weight: Var,
    /// `2d × 1`: the first half scores the receiving node, the second the sender.
    pub a: Var,
}

/// Result of an attention pass.
pub struct AttentionOutput {
    pub output: Var,
    /// Coefficients before dropout, aligned with `edges` (self-loops appended).
    pub coefficients: Var,
    pub edges: Edges,
}

/// Single-head attention over each node's neighbours and itself:
/// `e_ij = leaky_relu(aᵀ[W h_i ‖ W h_j])`, `α_i· = softmax(e_i·)`,
/// `out_i = ReLU(Σ_j α_ij W h_j)`.
#[allow(clippy::too_many_arguments)]
pub fn attention(
    t: &mut Tape,
    h: Var,
    vars: &AttentionVars,
    edges: &Edges,
    slope: f64,
    dropout: f64,
    train: bool,
    rng: &mut ChaCha8Rng,
) -> Result<AttentionOutput, AutodiffError> {
    let looped = edges.with_self_loops();
    let wh = t.matmul(h, vars.weight)?;
    let receiver = t.gather_rows(wh, looped.targets.clone())?;
    let sender = t.gather_rows(wh, looped.sources.clone())?;
    let pair = t.concat_cols(receiver, sender)?;
    let raw = t.matmul(pair, vars.a)?;
    let scores = t.leaky_relu(raw, slope);
    let alpha = t.softmax_segments(scores, looped.targets.clone(), looped.nodes)?;
    let dropped = t.dropout(alpha, dropout, train, rng)?;
    let weighted = t.mul_col(sender, dropped)?;
    let summed = t.scatter_sum(weighted, looped.targets.clone(), looped.nodes)?;
    let output = t.relu(summed);
    Ok(AttentionOutput {
        output,
        coefficients: alpha,
        edges: looped,
    })
}

/// Sum of node states per graph.
pub fn readout(
    t: &mut Tape,
    h: Var,
    graph_index: Arc<[usize]>,
    graphs: usize,
) -> Result<Var, AutodiffError> {
    t.scatter_sum(h, graph_index, graphs)
}
