//! Dense 2-D tensors and a tape-based reverse-mode differentiator.
//!
//! Values are recorded on a [`Tape`] as operations run; [`Tape::backward`]
//! replays the tape in reverse and leaves gradients on every leaf that was
//! created with `requires_grad`. A tape serves one forward/backward pass.

mod tape;
mod tensor;

pub use tape::{BatchStats, BnMode, Tape, Var, BN_EPS};
pub use tensor::Tensor;

/// Keeps freed tensor buffers in the process heap. By default glibc hands
/// large blocks back to the kernel, so every multi-megabyte activation is
/// page-faulted in afresh; that dominated training time. Runs once.
pub fn retain_freed_memory() {
    #[cfg(all(target_os = "linux", target_env = "gnu"))]
    {
        static ONCE: std::sync::Once = std::sync::Once::new();
        ONCE.call_once(|| {
            // SAFETY: mallopt only adjusts allocator thresholds.
            unsafe {
                libc::mallopt(libc::M_MMAP_THRESHOLD, 32 << 20);
                libc::mallopt(libc::M_TRIM_THRESHOLD, i32::MAX);
            }
        });
    }
}

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AutodiffError {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("index {index} out of range for {bound} rows")]
    IndexOutOfRange { index: usize, bound: usize },
    #[error("batchnorm in train mode needs at least 2 rows, got {rows}")]
    DegenerateBatch { rows: usize },
    #[error("dropout probability {0} outside [0, 1)")]
    InvalidProbability(f64),
    #[error("backward needs a 1x1 loss, got {shape:?}")]
    NotScalar { shape: (usize, usize) },
    #[error("tape already consumed by a backward pass")]
    TapeConsumed,
    #[error("mask selects no cells")]
    EmptyMask,
}

/// Central finite-difference gradient of `f` at `x`.
pub fn numeric_gradient(x: &Tensor, step: f64, mut f: impl FnMut(&Tensor) -> f64) -> Tensor {
    let mut probe = x.clone();
    let mut out = Tensor::zeros(x.rows(), x.cols());
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + step;
        let up = f(&probe);
        probe.data_mut()[i] = orig - step;
        let down = f(&probe);
        probe.data_mut()[i] = orig;
        out.data_mut()[i] = (up - down) / (2.0 * step);
    }
    out
}

/// `|a − b| / max(|a|, |b|, floor)`, the largest over all entries.
pub fn max_relative_error(analytic: &Tensor, numeric: &Tensor, floor: f64) -> f64 {
    assert_eq!(analytic.shape(), numeric.shape());
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}
