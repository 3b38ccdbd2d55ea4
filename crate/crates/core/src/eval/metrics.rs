use rand::seq::SliceRandom;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::learner::{Predict, Regressor};
use crate::seed;

/// Mean of `|real - pred| / pred`.
///
/// The error is relative to the prediction, not the observation. The
/// absolute value of the prediction is used so a negative prediction cannot
/// lower the score.
pub fn mape(pred: &[f64], real: &[f64]) -> Result<f64> {
    if pred.len() != real.len() {
        return Err(Error::LengthMismatch { left: pred.len(), right: real.len() });
    }
    if pred.is_empty() {
        return Err(Error::InvalidArgument("MAPE of an empty sample".into()));
    }
    let mut total = 0.0;
    for (index, (p, r)) in pred.iter().zip(real).enumerate() {
        if *p == 0.0 {
            return Err(Error::DivisionByZero { index });
        }
        total += (r - p).abs() / p.abs();
    }
    Ok(total / pred.len() as f64)
}

/// MAPE of a trained model over a labelled dataset.
pub fn model_error<P: Predict + ?Sized>(model: &P, test: &Dataset) -> Result<f64> {
    mape(&model.predict_all(test), &test.targets())
}

/// Shuffles `0..n` with `seed` and cuts it into `k` bins whose sizes differ
/// by at most one.
pub fn kfold_bins(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {k}")));
    }
    if n < k {
        return Err(Error::TooFewSamples { samples: n, folds: k });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::rng(seed));
    let (base, extra) = (n / k, n % k);
    let mut bins = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let len = base + usize::from(i < extra);
        bins.push(idx[start..start + len].to_vec());
        start += len;
    }
    Ok(bins)
}

/// Mean held-out MAPE over `k` folds.
pub fn kfold_cv<R: Regressor + ?Sized>(learner: &R, data: &Dataset, k: usize, seed: u64) -> Result<f64> {
    let bins = kfold_bins(data.len(), k, seed)?;
    let mut in_fold = vec![0usize; data.len()];
    for (f, bin) in bins.iter().enumerate() {
        for &i in bin {
            in_fold[i] = f;
        }
    }
    let mut total = 0.0;
    for (f, bin) in bins.iter().enumerate() {
        let train: Vec<usize> = (0..data.len()).filter(|&i| in_fold[i] != f).collect();
        let model = learner.train(&data.select(&train))?;
        total += model_error(&model, &data.select(bin))?;
    }
    Ok(total / k as f64)
}

/// Uniform shuffle, then the first `floor(fraction * n)` samples train.
pub fn split_real(data: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("fraction must lie in (0, 1), got {fraction}")));
    }
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut seed::rng(seed));
    let cut = (fraction * data.len() as f64).floor() as usize;
    Ok((data.select(&idx[..cut]), data.select(&idx[cut..])))
}
