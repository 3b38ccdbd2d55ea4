//! White-box analytical performance models.

pub mod kvs;
pub mod tob;

use std::sync::Arc;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::mape;
use crate::space::{Config, FeatureSpace};

pub use kvs::{kvs_query, kvs_space, KvsModel, KvsParams};
pub use tob::{tob_query, tob_space, TobModel, TobParams};

/// A closed-form predictor of a performance indicator.
pub trait AnalyticalModel: Send + Sync {
    fn space(&self) -> &Arc<FeatureSpace>;

    fn query(&self, config: &Config) -> Result<f64>;
}

/// Models whose calibration constants can be scaled to emulate a
/// mis-calibrated instantiation.
pub trait Perturb: Sized {
    fn param_names(&self) -> Vec<&'static str>;

    /// Returns a copy with each parameter multiplied by its factor.
    fn perturb(&self, factors: &[f64]) -> Result<Self>;
}

pub(crate) fn check_factors(factors: &[f64], expected: usize) -> Result<()> {
    if factors.len() != expected {
        return Err(Error::InvalidArgument(format!("expected {expected} factors, got {}", factors.len())));
    }
    for (index, &factor) in factors.iter().enumerate() {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::InvalidFactor { index, factor });
        }
    }
    Ok(())
}

/// Either of the two built-in models, for code that picks one at runtime.
#[derive(Debug, Clone, PartialEq)]
pub enum WhiteBox {
    Tob(TobModel),
    Kvs(KvsModel),
}

impl AnalyticalModel for WhiteBox {
    fn space(&self) -> &Arc<FeatureSpace> {
        match self {
            WhiteBox::Tob(m) => m.space(),
            WhiteBox::Kvs(m) => m.space(),
        }
    }

    fn query(&self, config: &Config) -> Result<f64> {
        match self {
            WhiteBox::Tob(m) => m.query(config),
            WhiteBox::Kvs(m) => m.query(config),
        }
    }
}

impl Perturb for WhiteBox {
    fn param_names(&self) -> Vec<&'static str> {
        match self {
            WhiteBox::Tob(m) => m.param_names(),
            WhiteBox::Kvs(m) => m.param_names(),
        }
    }

    fn perturb(&self, factors: &[f64]) -> Result<Self> {
        Ok(match self {
            WhiteBox::Tob(m) => WhiteBox::Tob(m.perturb(factors)?),
            WhiteBox::Kvs(m) => WhiteBox::Kvs(m.perturb(factors)?),
        })
    }
}

impl<M: AnalyticalModel + ?Sized> AnalyticalModel for Arc<M> {
    fn space(&self) -> &Arc<FeatureSpace> {
        (**self).space()
    }

    fn query(&self, config: &Config) -> Result<f64> {
        (**self).query(config)
    }
}

/// MAPE of `am` against the targets of `truth`. A configuration the model
/// cannot evaluate (saturation) makes the whole evaluation fail.
pub fn model_mape<M: AnalyticalModel + ?Sized>(am: &M, truth: &Dataset) -> Result<f64> {
    let preds = truth.iter().map(|s| am.query(&s.config)).collect::<Result<Vec<_>>>()?;
    mape(&preds, &truth.targets())
}

#[derive(Debug, Clone)]
pub struct Calibration<M> {
    pub factors: Vec<f64>,
    pub achieved_mape: f64,
    pub model: M,
}

/// Picks, among `grid`, the perturbation whose model MAPE against `truth`
/// is closest to `target_mape`. Ties go to the earliest grid point; grid
/// points under which the model cannot evaluate every truth configuration
/// are skipped.
pub fn calibrate_degradation<M>(am: &M, truth: &Dataset, target_mape: f64, grid: &[Vec<f64>]) -> Result<Calibration<M>>
where
    M: AnalyticalModel + Perturb,
{
    if truth.is_empty() {
        return Err(Error::InvalidArgument("calibration needs a non-empty truth dataset".into()));
    }
    if grid.is_empty() {
        return Err(Error::InvalidArgument("calibration grid is empty".into()));
    }
    let mut best: Option<Calibration<M>> = None;
    for factors in grid {
        let model = am.perturb(factors)?;
        let Ok(achieved) = model_mape(&model, truth) else {
            continue;
        };
        let better = match &best {
            None => true,
            Some(b) => (achieved - target_mape).abs() < (b.achieved_mape - target_mape).abs(),
        };
        if better {
            best = Some(Calibration { factors: factors.clone(), achieved_mape: achieved, model });
        }
    }
    best.ok_or_else(|| Error::InvalidArgument("no grid point yields a model defined on the whole truth set".into()))
}

/// `steps` factors spaced geometrically between `lo` and `hi` inclusive.
pub fn geometric_factors(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps <= 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln() / (steps - 1) as f64;
    (0..steps).map(|i| if i == steps - 1 { hi } else { lo * (ratio * i as f64).exp() }).collect()
}
