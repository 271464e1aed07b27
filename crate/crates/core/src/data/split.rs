use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DataError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub folds: Vec<Fold>,
    pub seed: u64,
}

// separate streams so the fold assignment does not depend on the split draw
const SPLIT_STREAM: u64 = 1;
const FOLD_STREAM: u64 = 2;
const SUBSAMPLE_STREAM: u64 = 3;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Shuffles `0..n` and puts the first `round(n · train_fraction)` in train.
pub fn make_split(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), DataError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::InvalidFraction(train_fraction));
    }
    if n < 2 {
        return Err(DataError::TooFewRows { rows: n, needed: 2 });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng(seed, SPLIT_STREAM));
    let n_train = ((n as f64 * train_fraction).round() as usize).clamp(1, n - 1);
    let test = idx.split_off(n_train);
    Ok((idx, test))
}

/// `k` folds over `train`; validation sizes differ by at most one.
pub fn make_folds(train: &[usize], k: usize, seed: u64) -> Result<Vec<Fold>, DataError> {
    if k < 2 || train.len() < k {
        return Err(DataError::TooFewRows {
            rows: train.len(),
            needed: k.max(2),
        });
    }
    let mut shuffled = train.to_vec();
    shuffled.shuffle(&mut rng(seed, FOLD_STREAM));
    let (base, extra) = (shuffled.len() / k, shuffled.len() % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let size = base + usize::from(i < extra);
        let validation = shuffled[start..start + size].to_vec();
        let train = shuffled[..start]
            .iter()
            .chain(&shuffled[start + size..])
            .copied()
            .collect();
        folds.push(Fold { train, validation });
        start += size;
    }
    Ok(folds)
}

pub fn make_plan(n: usize, train_fraction: f64, k: usize, seed: u64) -> Result<SplitPlan, DataError> {
    let (train, test) = make_split(n, train_fraction, seed)?;
    let folds = make_folds(&train, k, seed)?;
    Ok(SplitPlan {
        train,
        test,
        folds,
        seed,
    })
}

/// Keeps `round(fraction · n)` of `indices` (at least one), in their original
/// order. For a fixed seed smaller fractions give subsets of larger ones.
pub fn subsample(indices: &[usize], fraction: f64, seed: u64) -> Result<Vec<usize>, DataError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(DataError::InvalidFraction(fraction));
    }
    let n = indices.len();
    let keep = ((n as f64 * fraction).round() as usize).clamp(n.min(1), n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng(seed, SUBSAMPLE_STREAM));
    let mut chosen = order[..keep].to_vec();
    chosen.sort_unstable();
    Ok(chosen.into_iter().map(|i| indices[i]).collect())
}
