//! Sequencer-based total order broadcast latency model.
//!
//! The sequencer is an M/M/1 queue whose jobs are batches of `b` messages.
//! With batch service time `S(b) = c0 + c1*b` and batch arrival rate
//! `lambda / b`, the mean message self-delivery latency is
//!
//! ```text
//! L = (b - 1) / (2 * lambda) + S(b) / (1 - rho),   rho = (lambda / b) * S(b)
//! ```
//!
//! The first term is the mean time a message waits for its batch to fill,
//! the second the M/M/1 response time of the batch.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{check_factors, AnalyticalModel, Perturb};
use crate::error::{Error, Result};
use crate::space::{Config, Dimension, FeatureSpace};

pub const MAX_BATCH: i64 = 24;
pub const MIN_RATE: f64 = 1.0;
pub const MAX_RATE: f64 = 13_000.0;

/// CPU demands of the sequencer, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TobParams {
    /// Fixed cost of sequencing one batch.
    pub c0: f64,
    /// Additional cost per message in the batch.
    pub c1: f64,
}

impl Default for TobParams {
    fn default() -> Self {
        TobParams { c0: 1e-4, c1: 5e-5 }
    }
}

impl TobParams {
    pub fn new(c0: f64, c1: f64) -> Result<Self> {
        let p = TobParams { c0, c1 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c0.is_finite() && self.c0 > 0.0) {
            return Err(Error::InvalidParams(format!("c0 must be > 0, got {}", self.c0)));
        }
        if !(self.c1.is_finite() && self.c1 >= 0.0) {
            return Err(Error::InvalidParams(format!("c1 must be >= 0, got {}", self.c1)));
        }
        Ok(())
    }

    pub fn service_time(&self, batch: f64) -> f64 {
        self.c0 + self.c1 * batch
    }

    pub fn utilization(&self, rate: f64, batch: f64) -> f64 {
        rate / batch * self.service_time(batch)
    }
}

impl Perturb for TobParams {
    fn param_names(&self) -> Vec<&'static str> {
        vec!["c0", "c1"]
    }

    fn perturb(&self, factors: &[f64]) -> Result<Self> {
        check_factors(factors, 2)?;
        TobParams::new(self.c0 * factors[0], self.c1 * factors[1])
    }
}

/// Mean message latency in seconds for arrival rate `rate` (msgs/s) and
/// batching level `batch`.
pub fn tob_query(rate: f64, batch: f64, params: &TobParams) -> Result<f64> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::InvalidConfig(format!("arrival rate must be > 0, got {rate}")));
    }
    if !(batch >= 1.0 && batch.fract() == 0.0) {
        return Err(Error::InvalidConfig(format!("batching level must be an integer >= 1, got {batch}")));
    }
    let service = params.service_time(batch);
    let rho = rate / batch * service;
    if rho >= 1.0 {
        return Err(Error::Saturated { utilization: rho });
    }
    let fill_wait = (batch - 1.0) / (2.0 * rate);
    Ok(fill_wait + service / (1.0 - rho))
}

/// Arrival rate in `[1, 13000]` msgs/s and batching level `1..=24`.
pub fn tob_space() -> FeatureSpace {
    FeatureSpace::new(vec![
        Dimension::continuous("arrival_rate", MIN_RATE, MAX_RATE),
        Dimension::integer("batching", 1, MAX_BATCH),
    ])
    .expect("static space is valid")
}

#[derive(Debug, Clone, PartialEq)]
pub struct TobModel {
    pub params: TobParams,
    space: Arc<FeatureSpace>,
}

impl TobModel {
    pub fn new(params: TobParams, space: Arc<FeatureSpace>) -> Result<Self> {
        params.validate()?;
        if space.len() != 2 {
            return Err(Error::InvalidSpace("TOB model needs a 2-dimensional space".into()));
        }
        Ok(TobModel { params, space })
    }
}

impl AnalyticalModel for TobModel {
    fn space(&self) -> &Arc<FeatureSpace> {
        &self.space
    }

    fn query(&self, config: &Config) -> Result<f64> {
        self.space.check(config.values())?;
        tob_query(config.get(0), config.get(1), &self.params)
    }
}

impl Perturb for TobModel {
    fn param_names(&self) -> Vec<&'static str> {
        self.params.param_names()
    }

    fn perturb(&self, factors: &[f64]) -> Result<Self> {
        Ok(TobModel { params: self.params.perturb(factors)?, space: self.space.clone() })
    }
}
