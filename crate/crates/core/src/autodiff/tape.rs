use std::sync::Arc;

use rand::Rng;

use super::tensor::gemm;
use super::{AutodiffError, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Batch-normalization mode.
#[derive(Clone, Copy, Debug)]
pub enum BnMode<'a> {
    /// Normalize by batch statistics.
    Train,
    /// Normalize by the given running statistics.
    Eval { mean: &'a [f64], var: &'a [f64] },
}

/// Per-column statistics of a train-mode batchnorm call.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    /// Population variance.
    pub var: Vec<f64>,
    pub rows: usize,
}

pub const BN_EPS: f64 = 1e-5;

enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulCol(Var, Var),
    ScaleBy(Var, Var),
    Affine(Var, f64),
    Relu(Var),
    LeakyRelu(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    ConcatCols(Var, Var),
    GatherRows(Var, Arc<[usize]>),
    ScatterSum(Var, Arc<[usize]>),
    SoftmaxSegments(Var, Arc<[usize]>, usize),
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        normalized: Tensor,
        inv_std: Vec<f64>,
        train: bool,
    },
    Dropout(Var, Tensor),
    SumAll(Var),
    MaskedRmse {
        pred: Var,
        target: Tensor,
        mask: Arc<[bool]>,
        count: usize,
    },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records operations for a single reverse pass.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
    consumed: bool,
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> AutodiffError {
    AutodiffError::ShapeMismatch {
        op,
        left: a.shape(),
        right: b.shape(),
    }
}

fn accumulate(slot: &mut Option<Tensor>, g: Tensor) {
    match slot {
        Some(existing) => existing.add_assign(&g),
        None => *slot = Some(g),
    }
}

impl Tape {
    pub fn new() -> Tape {
        super::retain_freed_memory();
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient of the last backward pass, if `v` received one. Only leaves
    /// keep their gradient once the pass has finished.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Clears gradients so `backward` may run again.
    pub fn zero_grads(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = None);
        self.consumed = false;
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), AutodiffError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(mismatch(op, ta, tb));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.same_shape("add", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y);
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.same_shape("sub", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x - y);
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, Op::Sub(a, b), rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.same_shape("mul", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y);
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, Op::Mul(a, b), rg))
    }

    /// Adds a `1×d` row to every row of `x`.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var, AutodiffError> {
        let (tx, tr) = (self.value(x), self.value(row));
        if tr.rows() != 1 || tr.cols() != tx.cols() {
            return Err(mismatch("add_row", tx, tr));
        }
        let mut value = tx.clone();
        let cols = tx.cols();
        for r in 0..tx.rows() {
            for (v, b) in value.row_mut(r).iter_mut().zip(tr.data()) {
                *v += b;
            }
        }
        debug_assert_eq!(value.cols(), cols);
        let rg = self.rg(&[x, row]);
        Ok(self.push(value, Op::AddRow(x, row), rg))
    }

    /// Multiplies row `i` of `x` by `col[i]`.
    pub fn mul_col(&mut self, x: Var, col: Var) -> Result<Var, AutodiffError> {
        let (tx, tc) = (self.value(x), self.value(col));
        if tc.cols() != 1 || tc.rows() != tx.rows() {
            return Err(mismatch("mul_col", tx, tc));
        }
        let mut value = tx.clone();
        for r in 0..tx.rows() {
            let s = tc.data()[r];
            value.row_mut(r).iter_mut().for_each(|v| *v *= s);
        }
        let rg = self.rg(&[x, col]);
        Ok(self.push(value, Op::MulCol(x, col), rg))
    }

    /// Multiplies every entry of `x` by the `1×1` value `s`.
    pub fn scale_by(&mut self, x: Var, s: Var) -> Result<Var, AutodiffError> {
        let (tx, ts) = (self.value(x), self.value(s));
        if ts.shape() != (1, 1) {
            return Err(mismatch("scale_by", tx, ts));
        }
        let k = ts.item();
        let value = tx.map(|v| v * k);
        let rg = self.rg(&[x, s]);
        Ok(self.push(value, Op::ScaleBy(x, s), rg))
    }

    /// `a·x + b` with constant `a` and `b`.
    pub fn affine(&mut self, x: Var, a: f64, b: f64) -> Var {
        let value = self.value(x).map(|v| a * v + b);
        let rg = self.rg(&[x]);
        self.push(value, Op::Affine(x, a), rg)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        self.affine(x, c, 0.0)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| if v > 0.0 { v } else { 0.0 });
        let rg = self.rg(&[x]);
        self.push(value, Op::Relu(x), rg)
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let value = self.value(x).map(|v| if v > 0.0 { v } else { slope * v });
        let rg = self.rg(&[x]);
        self.push(value, Op::LeakyRelu(x, slope), rg)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value = self.value(x).map(sigmoid);
        let rg = self.rg(&[x]);
        self.push(value, Op::Sigmoid(x), rg)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let value = self.value(x).map(f64::tanh);
        let rg = self.rg(&[x]);
        self.push(value, Op::Tanh(x), rg)
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rows() != tb.rows() {
            return Err(mismatch("concat_cols", ta, tb));
        }
        let cols = ta.cols() + tb.cols();
        let mut data = Vec::with_capacity(ta.rows() * cols);
        for r in 0..ta.rows() {
            data.extend_from_slice(ta.row(r));
            data.extend_from_slice(tb.row(r));
        }
        let value = Tensor::new(ta.rows(), cols, data)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, Op::ConcatCols(a, b), rg))
    }

    /// Row `i` of the output is row `index[i]` of `x`.
    pub fn gather_rows(&mut self, x: Var, index: Arc<[usize]>) -> Result<Var, AutodiffError> {
        let tx = self.value(x);
        check_index(&index, tx.rows())?;
        let cols = tx.cols();
        let mut data = Vec::with_capacity(index.len() * cols);
        for &i in index.iter() {
            data.extend_from_slice(tx.row(i));
        }
        let value = Tensor::new(index.len(), cols, data)?;
        let rg = self.rg(&[x]);
        Ok(self.push(value, Op::GatherRows(x, index), rg))
    }

    /// Sums rows of `src` into `segments` output rows by `index`.
    pub fn scatter_sum(
        &mut self,
        src: Var,
        index: Arc<[usize]>,
        segments: usize,
    ) -> Result<Var, AutodiffError> {
        let ts = self.value(src);
        if index.len() != ts.rows() {
            return Err(AutodiffError::ShapeMismatch {
                op: "scatter_sum",
                left: ts.shape(),
                right: (index.len(), 1),
            });
        }
        check_index(&index, segments)?;
        let mut value = Tensor::zeros(segments, ts.cols());
        for (r, &s) in index.iter().enumerate() {
            for (o, v) in value.row_mut(s).iter_mut().zip(ts.row(r)) {
                *o += v;
            }
        }
        let rg = self.rg(&[src]);
        Ok(self.push(value, Op::ScatterSum(src, index), rg))
    }

    /// Softmax of an `n×1` column within each segment given by `index`.
    pub fn softmax_segments(
        &mut self,
        scores: Var,
        index: Arc<[usize]>,
        segments: usize,
    ) -> Result<Var, AutodiffError> {
        let ts = self.value(scores);
        if ts.cols() != 1 || index.len() != ts.rows() {
            return Err(AutodiffError::ShapeMismatch {
                op: "softmax_segments",
                left: ts.shape(),
                right: (index.len(), 1),
            });
        }
        check_index(&index, segments)?;
        let mut max = vec![f64::NEG_INFINITY; segments];
        for (&s, &v) in index.iter().zip(ts.data()) {
            max[s] = max[s].max(v);
        }
        let mut exp: Vec<f64> = index
            .iter()
            .zip(ts.data())
            .map(|(&s, &v)| (v - max[s]).exp())
            .collect();
        let mut total = vec![0.0; segments];
        for (&s, &e) in index.iter().zip(&exp) {
            total[s] += e;
        }
        for (&s, e) in index.iter().zip(exp.iter_mut()) {
            *e /= total[s];
        }
        let value = Tensor::column(&exp);
        let rg = self.rg(&[scores]);
        Ok(self.push(value, Op::SoftmaxSegments(scores, index, segments), rg))
    }

    /// Batch normalization with learnable `1×d` scale and shift.
    ///
    /// Train mode returns the batch statistics so the caller can update
    /// its running estimates.
    pub fn batchnorm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        mode: BnMode<'_>,
    ) -> Result<(Var, Option<BatchStats>), AutodiffError> {
        let tx = self.value(x);
        let (n, d) = tx.shape();
        for p in [gamma, beta] {
            let tp = self.value(p);
            if tp.shape() != (1, d) {
                return Err(mismatch("batchnorm", tx, tp));
            }
        }
        let (mean, var, stats) = match mode {
            BnMode::Train => {
                if n < 2 {
                    return Err(AutodiffError::DegenerateBatch { rows: n });
                }
                let mut mean = vec![0.0; d];
                for r in 0..n {
                    for (m, v) in mean.iter_mut().zip(tx.row(r)) {
                        *m += v;
                    }
                }
                mean.iter_mut().for_each(|m| *m /= n as f64);
                let mut var = vec![0.0; d];
                for r in 0..n {
                    for ((s, v), m) in var.iter_mut().zip(tx.row(r)).zip(&mean) {
                        *s += (v - m) * (v - m);
                    }
                }
                var.iter_mut().for_each(|s| *s /= n as f64);
                let stats = BatchStats {
                    mean: mean.clone(),
                    var: var.clone(),
                    rows: n,
                };
                (mean, var, Some(stats))
            }
            BnMode::Eval { mean, var } => {
                if mean.len() != d || var.len() != d {
                    return Err(AutodiffError::ShapeMismatch {
                        op: "batchnorm",
                        left: tx.shape(),
                        right: (1, mean.len()),
                    });
                }
                (mean.to_vec(), var.to_vec(), None)
            }
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let mut normalized = tx.clone();
        for r in 0..n {
            for ((v, m), s) in normalized.row_mut(r).iter_mut().zip(&mean).zip(&inv_std) {
                *v = (*v - m) * s;
            }
        }
        let (g, b) = (self.value(gamma).data(), self.value(beta).data());
        let mut value = normalized.clone();
        for r in 0..n {
            for ((v, gv), bv) in value.row_mut(r).iter_mut().zip(g).zip(b) {
                *v = *v * gv + bv;
            }
        }
        let rg = self.rg(&[x, gamma, beta]);
        let train = stats.is_some();
        let var = self.push(
            value,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                normalized,
                inv_std,
                train,
            },
            rg,
        );
        Ok((var, stats))
    }

    /// Inverted dropout. Identity when `train` is false or `p` is 0.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        x: Var,
        p: f64,
        train: bool,
        rng: &mut R,
    ) -> Result<Var, AutodiffError> {
        if !(0.0..1.0).contains(&p) {
            return Err(AutodiffError::InvalidProbability(p));
        }
        if !train || p == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - p);
        let tx = self.value(x);
        let mut mask = Tensor::zeros(tx.rows(), tx.cols());
        for m in mask.data_mut() {
            if rng.random::<f64>() >= p {
                *m = keep;
            }
        }
        let value = tx.zip_map(&mask, |a, b| a * b);
        let rg = self.rg(&[x]);
        Ok(self.push(value, Op::Dropout(x, mask), rg))
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let value = Tensor::scalar(self.value(x).sum());
        let rg = self.rg(&[x]);
        self.push(value, Op::SumAll(x), rg)
    }

    /// `sqrt(Σ mask·(pred − target)² / count(mask))`, reading neither
    /// `target` nor `pred` at masked-out cells.
    pub fn masked_rmse(
        &mut self,
        pred: Var,
        target: &Tensor,
        mask: Arc<[bool]>,
    ) -> Result<Var, AutodiffError> {
        let tp = self.value(pred);
        if tp.shape() != target.shape() || mask.len() != tp.len() {
            return Err(mismatch("masked_rmse", tp, target));
        }
        let mut sum = 0.0;
        let mut count = 0usize;
        for ((&p, &t), &m) in tp.data().iter().zip(target.data()).zip(mask.iter()) {
            if m {
                sum += (p - t) * (p - t);
                count += 1;
            }
        }
        if count == 0 {
            return Err(AutodiffError::EmptyMask);
        }
        let value = Tensor::scalar((sum / count as f64).sqrt());
        let rg = self.rg(&[pred]);
        Ok(self.push(
            value,
            Op::MaskedRmse {
                pred,
                target: target.clone(),
                mask,
                count,
            },
            rg,
        ))
    }

    /// Reverse pass from a `1×1` loss.
    pub fn backward(&mut self, loss: Var) -> Result<(), AutodiffError> {
        if self.consumed {
            return Err(AutodiffError::TapeConsumed);
        }
        let shape = self.value(loss).shape();
        if shape != (1, 1) {
            return Err(AutodiffError::NotScalar { shape });
        }
        self.consumed = true;
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        self.grads[loss.0] = Some(Tensor::scalar(1.0));

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let (before, after) = self.grads.split_at_mut(i);
            let Some(g) = after[0].as_ref() else {
                continue;
            };
            backprop(&self.nodes, node, g, before);
            after[0] = None;
        }
        Ok(())
    }
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn check_index(index: &[usize], bound: usize) -> Result<(), AutodiffError> {
    match index.iter().find(|&&i| i >= bound) {
        Some(&i) => Err(AutodiffError::IndexOutOfRange { index: i, bound }),
        None => Ok(()),
    }
}

/// Pushes `g`, the gradient at `node`, into the gradients of its inputs.
fn backprop(nodes: &[Node], node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
    let val = |v: Var| &nodes[v.0].value;
    let wants = |v: Var| nodes[v.0].requires_grad;
    let mut send = |v: Var, t: Tensor| {
        if nodes[v.0].requires_grad {
            accumulate(&mut grads[v.0], t);
        }
    };
    match &node.op {
        Op::Leaf => {}
        Op::MatMul(a, b) => {
            let (ta, tb) = (val(*a), val(*b));
            if wants(*a) {
                let mut da = Tensor::zeros(ta.rows(), ta.cols());
                gemm(g, false, tb, true, &mut da, 0.0);
                send(*a, da);
            }
            if wants(*b) {
                let mut db = Tensor::zeros(tb.rows(), tb.cols());
                gemm(ta, true, g, false, &mut db, 0.0);
                send(*b, db);
            }
        }
        Op::Add(a, b) => {
            send(*a, g.clone());
            send(*b, g.clone());
        }
        Op::Sub(a, b) => {
            send(*a, g.clone());
            send(*b, g.map(|v| -v));
        }
        Op::Mul(a, b) => {
            let (ta, tb) = (val(*a), val(*b));
            if wants(*a) {
                send(*a, g.zip_map(tb, |x, y| x * y));
            }
            if wants(*b) {
                send(*b, g.zip_map(ta, |x, y| x * y));
            }
        }
        Op::AddRow(x, row) => {
            send(*x, g.clone());
            if wants(*row) {
                let mut dr = Tensor::zeros(1, g.cols());
                for r in 0..g.rows() {
                    for (o, v) in dr.data_mut().iter_mut().zip(g.row(r)) {
                        *o += v;
                    }
                }
                send(*row, dr);
            }
        }
        Op::MulCol(x, col) => {
            let (tx, tc) = (val(*x), val(*col));
            if wants(*x) {
                let mut dx = g.clone();
                for r in 0..g.rows() {
                    let s = tc.data()[r];
                    dx.row_mut(r).iter_mut().for_each(|v| *v *= s);
                }
                send(*x, dx);
            }
            if wants(*col) {
                let dc: Vec<f64> = (0..g.rows())
                    .map(|r| g.row(r).iter().zip(tx.row(r)).map(|(a, b)| a * b).sum())
                    .collect();
                send(*col, Tensor::column(&dc));
            }
        }
        Op::ScaleBy(x, s) => {
            let (tx, ts) = (val(*x), val(*s));
            if wants(*x) {
                let k = ts.item();
                send(*x, g.map(|v| v * k));
            }
            if wants(*s) {
                let ds: f64 = g.data().iter().zip(tx.data()).map(|(a, b)| a * b).sum();
                send(*s, Tensor::scalar(ds));
            }
        }
        Op::Affine(x, a) => {
            let a = *a;
            send(*x, g.map(|v| a * v));
        }
        Op::Relu(x) => {
            send(*x, g.zip_map(val(*x), |d, v| if v > 0.0 { d } else { 0.0 }));
        }
        Op::LeakyRelu(x, slope) => {
            let s = *slope;
            send(*x, g.zip_map(val(*x), |d, v| if v > 0.0 { d } else { s * d }));
        }
        Op::Sigmoid(x) => {
            send(*x, g.zip_map(&node.value, |d, y| d * y * (1.0 - y)));
        }
        Op::Tanh(x) => {
            send(*x, g.zip_map(&node.value, |d, y| d * (1.0 - y * y)));
        }
        Op::ConcatCols(a, b) => {
            let ca = val(*a).cols();
            let cb = val(*b).cols();
            let rows = g.rows();
            if wants(*a) {
                let mut da = Vec::with_capacity(rows * ca);
                for r in 0..rows {
                    da.extend_from_slice(&g.row(r)[..ca]);
                }
                send(*a, Tensor::new(rows, ca, da).expect("shape"));
            }
            if wants(*b) {
                let mut db = Vec::with_capacity(rows * cb);
                for r in 0..rows {
                    db.extend_from_slice(&g.row(r)[ca..]);
                }
                send(*b, Tensor::new(rows, cb, db).expect("shape"));
            }
        }
        Op::GatherRows(x, index) => {
            let tx = val(*x);
            let mut dx = Tensor::zeros(tx.rows(), tx.cols());
            for (r, &i) in index.iter().enumerate() {
                for (o, v) in dx.row_mut(i).iter_mut().zip(g.row(r)) {
                    *o += v;
                }
            }
            send(*x, dx);
        }
        Op::ScatterSum(src, index) => {
            let ts = val(*src);
            let mut ds = Vec::with_capacity(ts.len());
            for &s in index.iter() {
                ds.extend_from_slice(g.row(s));
            }
            send(*src, Tensor::new(ts.rows(), ts.cols(), ds).expect("shape"));
        }
        Op::SoftmaxSegments(x, index, segments) => {
            let y = node.value.data();
            let mut dot = vec![0.0; *segments];
            for ((&s, &yi), &gi) in index.iter().zip(y).zip(g.data()) {
                dot[s] += yi * gi;
            }
            let dx: Vec<f64> = index
                .iter()
                .zip(y)
                .zip(g.data())
                .map(|((&s, &yi), &gi)| yi * (gi - dot[s]))
                .collect();
            send(*x, Tensor::column(&dx));
        }
        Op::BatchNorm {
            x,
            gamma,
            beta,
            normalized,
            inv_std,
            train,
        } => {
            let (n, d) = g.shape();
            let mut sum_g = vec![0.0; d];
            let mut sum_gx = vec![0.0; d];
            for r in 0..n {
                for c in 0..d {
                    let gv = g.get(r, c);
                    sum_g[c] += gv;
                    sum_gx[c] += gv * normalized.get(r, c);
                }
            }
            if wants(*beta) {
                send(*beta, Tensor::new(1, d, sum_g.clone()).expect("shape"));
            }
            if wants(*gamma) {
                send(*gamma, Tensor::new(1, d, sum_gx.clone()).expect("shape"));
            }
            if wants(*x) {
                let gam = val(*gamma).data();
                let mut dx = Tensor::zeros(n, d);
                let nf = n as f64;
                for r in 0..n {
                    for c in 0..d {
                        let gv = g.get(r, c);
                        let v = if *train {
                            gam[c] * inv_std[c] / nf
                                * (nf * gv - sum_g[c] - normalized.get(r, c) * sum_gx[c])
                        } else {
                            gam[c] * inv_std[c] * gv
                        };
                        dx.set(r, c, v);
                    }
                }
                send(*x, dx);
            }
        }
        Op::Dropout(x, mask) => {
            send(*x, g.zip_map(mask, |a, b| a * b));
        }
        Op::SumAll(x) => {
            let tx = val(*x);
            send(*x, Tensor::filled(tx.rows(), tx.cols(), g.item()));
        }
        Op::MaskedRmse {
            pred,
            target,
            mask,
            count,
        } => {
            let loss = node.value.item();
            let tp = val(*pred);
            let mut dp = Tensor::zeros(tp.rows(), tp.cols());
            if loss > 0.0 {
                let k = g.item() / (*count as f64 * loss);
                for (i, o) in dp.data_mut().iter_mut().enumerate() {
                    if mask[i] {
                        *o = k * (tp.data()[i] - target.data()[i]);
                    }
                }
            }
            send(*pred, dp);
        }
    }
}
