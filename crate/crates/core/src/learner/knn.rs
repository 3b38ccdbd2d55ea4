use std::sync::Arc;

use super::{Predict, Regressor};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::space::{unit_distance, Config, FeatureSpace};

/// Weight-weighted mean target of the `k` samples nearest to `config`.
/// Equidistant samples are ranked by dataset order.
pub fn knn_query(data: &Dataset, config: &Config, k: usize) -> Result<f64> {
    Ok(KnnRegressor { k }.train(data)?.try_predict(config)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnRegressor {
    pub k: usize,
}

#[derive(Debug, Clone)]
pub struct KnnModel {
    k: usize,
    space: Arc<FeatureSpace>,
    points: Vec<Vec<f64>>,
    targets: Vec<f64>,
    weights: Vec<f64>,
}

impl Regressor for KnnRegressor {
    type Model = KnnModel;

    fn train(&self, data: &Dataset) -> Result<KnnModel> {
        if data.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        if self.k == 0 {
            return Err(Error::InvalidArgument("k must be >= 1".into()));
        }
        let space = data.space().clone();
        Ok(KnnModel {
            k: self.k,
            points: data.iter().map(|s| space.normalize_unchecked(s.config.values())).collect(),
            targets: data.targets(),
            weights: data.iter().map(|s| s.weight).collect(),
            space,
        })
    }
}

impl KnnModel {
    pub fn try_predict(&self, config: &Config) -> Result<f64> {
        let q = self.space.normalize(config)?;
        let mut order: Vec<(f64, usize)> =
            self.points.iter().enumerate().map(|(i, p)| (unit_distance(&q, p), i)).collect();
        // stable: equal distances keep dataset order
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (mut num, mut den) = (0.0, 0.0);
        for &(_, i) in order.iter().take(self.k) {
            num += self.weights[i] * self.targets[i];
            den += self.weights[i];
        }
        Ok(num / den)
    }
}

impl Predict for KnnModel {
    fn predict(&self, config: &Config) -> f64 {
        self.try_predict(config).unwrap_or(f64::NAN)
    }
}
