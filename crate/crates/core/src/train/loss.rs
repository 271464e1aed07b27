use super::TrainError;
use crate::autodiff::Tensor;

/// Pooled masked RMSE: `sqrt(Σ δ·(y − ŷ)² / Σ δ)` over all present cells.
/// Cells with a false mask are never read.
pub fn masked_loss(pred: &Tensor, target: &Tensor, mask: &[bool]) -> Result<f64, TrainError> {
    assert_eq!(pred.shape(), target.shape(), "prediction and target shapes differ");
    assert_eq!(mask.len(), pred.len(), "mask length differs from prediction size");
    let mut sum = 0.0;
    let mut count = 0usize;
    for ((&p, &t), &m) in pred.data().iter().zip(target.data()).zip(mask) {
        if m {
            sum += (p - t) * (p - t);
            count += 1;
        }
    }
    if count == 0 {
        return Err(TrainError::EmptyMask);
    }
    Ok((sum / count as f64).sqrt())
}

/// Plain RMSE of two equal-length slices.
pub fn rmse(pred: &[f64], target: &[f64]) -> f64 {
    assert_eq!(pred.len(), target.len());
    assert!(!pred.is_empty(), "rmse of nothing");
    let s: f64 = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum();
    (s / pred.len() as f64).sqrt()
}
