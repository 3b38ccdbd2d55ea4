//! Weighted regression learners behind a common train/predict contract.

mod knn;
mod linalg;
mod tree;

use crate::dataset::Dataset;
use crate::error::Result;
use crate::space::Config;

pub use knn::{knn_query, KnnModel, KnnRegressor};
pub use tree::{LeafKind, TreeModel, TreeParams, TreeRegressor};

pub trait Predict: Send + Sync {
    fn predict(&self, config: &Config) -> f64;

    fn predict_all(&self, data: &Dataset) -> Vec<f64> {
        data.iter().map(|s| self.predict(&s.config)).collect()
    }
}

/// A learning algorithm: deterministic map from a dataset to a model.
pub trait Regressor: Send + Sync {
    type Model: Predict;

    fn train(&self, data: &Dataset) -> Result<Self::Model>;
}

impl<P: Predict + ?Sized> Predict for Box<P> {
    fn predict(&self, config: &Config) -> f64 {
        (**self).predict(config)
    }
}
