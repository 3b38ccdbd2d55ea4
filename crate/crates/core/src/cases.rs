//! The two simulated case studies: total order broadcast latency and
//! key-value store throughput.
//!
//! Each case pairs a ground truth (observed through an [`OracleSystem`])
//! with the analytical model used for bootstrapping. For TOB the model is
//! the truth formula with mis-calibrated CPU demands; for the KVS it is the
//! throughput formula without the truth's high-contention penalty.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::analytic::{
    calibrate_degradation, geometric_factors, kvs_space, tob_space, AnalyticalModel, Calibration, KvsModel,
    KvsParams, Perturb, TobModel, TobParams, WhiteBox,
};
use crate::bootstrap::sample_config_space;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::oracle::{build_dataset, kvs_real_configs, KvsTruth, OracleData, OracleSystem, KVS_DEFAULT_PENALTY};
use crate::seed;
use crate::space::{Config, FeatureSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseStudy {
    Tob,
    Kvs,
}

impl fmt::Display for CaseStudy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaseStudy::Tob => "tob",
            CaseStudy::Kvs => "kvs",
        })
    }
}

impl FromStr for CaseStudy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tob" => Ok(CaseStudy::Tob),
            "kvs" => Ok(CaseStudy::Kvs),
            other => Err(Error::InvalidArgument(format!("unknown case study '{other}'"))),
        }
    }
}

impl CaseStudy {
    pub fn space(self) -> FeatureSpace {
        match self {
            CaseStudy::Tob => tob_space(),
            CaseStudy::Kvs => kvs_space(),
        }
    }

    /// Dimensions of the default error heat map.
    pub fn heatmap_dims(self) -> (usize, usize) {
        match self {
            CaseStudy::Tob => (0, 1),
            CaseStudy::Kvs => (crate::analytic::kvs::NODES, crate::analytic::kvs::WRITE_FRACTION),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TobSettings {
    /// CPU demands of the simulated system.
    pub truth: TobParams,
    /// Multipliers turning the truth's demands into the modeling AM's.
    pub am_factors: Vec<f64>,
    pub noise_cv: f64,
    pub n_configs: usize,
    /// Measurements are only taken where the truth's sequencer utilization
    /// stays below this bound.
    pub max_utilization: f64,
}

impl Default for TobSettings {
    fn default() -> Self {
        TobSettings {
            truth: TobParams::default(),
            am_factors: vec![0.8, 0.8],
            noise_cv: 0.05,
            n_configs: 500,
            max_utilization: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KvsSettings {
    pub truth: KvsParams,
    /// Extra residence time of the truth at high node count and write
    /// fraction, in seconds.
    pub penalty: f64,
    pub am_factors: Vec<f64>,
    pub noise_cv: f64,
    pub n_configs: usize,
}

impl Default for KvsSettings {
    fn default() -> Self {
        KvsSettings {
            truth: KvsParams::default(),
            penalty: KVS_DEFAULT_PENALTY,
            am_factors: vec![1.0; 5],
            noise_cv: 0.05,
            n_configs: 900,
        }
    }
}

/// Everything needed to simulate one case study.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub case: CaseStudy,
    pub tob: TobSettings,
    pub kvs: KvsSettings,
    space: Arc<FeatureSpace>,
}

impl Scenario {
    pub fn new(case: CaseStudy, tob: TobSettings, kvs: KvsSettings) -> Result<Self> {
        let s = Scenario { case, tob, kvs, space: Arc::new(case.space()) };
        s.validate()?;
        Ok(s)
    }

    pub fn default_for(case: CaseStudy) -> Self {
        Scenario::new(case, TobSettings::default(), KvsSettings::default()).expect("defaults are valid")
    }

    pub fn validate(&self) -> Result<()> {
        self.tob.truth.validate()?;
        self.kvs.truth.validate()?;
        self.base_am()?.perturb(self.am_factors())?;
        let cv = self.noise_cv();
        if !(cv.is_finite() && cv >= 0.0) {
            return Err(Error::InvalidArgument(format!("noise_cv must be >= 0, got {cv}")));
        }
        if !(self.tob.max_utilization > 0.0 && self.tob.max_utilization <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "max_utilization must lie in (0, 1], got {}",
                self.tob.max_utilization
            )));
        }
        if !(self.kvs.penalty.is_finite() && self.kvs.penalty >= 0.0) {
            return Err(Error::InvalidArgument(format!("penalty must be >= 0, got {}", self.kvs.penalty)));
        }
        Ok(())
    }

    pub fn space(&self) -> &Arc<FeatureSpace> {
        &self.space
    }

    fn am_factors(&self) -> &[f64] {
        match self.case {
            CaseStudy::Tob => &self.tob.am_factors,
            CaseStudy::Kvs => &self.kvs.am_factors,
        }
    }

    pub fn noise_cv(&self) -> f64 {
        match self.case {
            CaseStudy::Tob => self.tob.noise_cv,
            CaseStudy::Kvs => self.kvs.noise_cv,
        }
    }

    pub fn n_configs(&self) -> usize {
        match self.case {
            CaseStudy::Tob => self.tob.n_configs,
            CaseStudy::Kvs => self.kvs.n_configs,
        }
    }

    /// The analytical model with the truth's own parameters; degradations
    /// are expressed relative to it.
    pub fn base_am(&self) -> Result<WhiteBox> {
        Ok(match self.case {
            CaseStudy::Tob => WhiteBox::Tob(TobModel::new(self.tob.truth, self.space.clone())?),
            CaseStudy::Kvs => WhiteBox::Kvs(KvsModel::new(self.kvs.truth, self.space.clone())?),
        })
    }

    /// The modeling AM used when no degradation target is requested.
    pub fn am(&self) -> Result<WhiteBox> {
        self.base_am()?.perturb(self.am_factors())
    }

    pub fn truth(&self) -> Result<Arc<dyn AnalyticalModel>> {
        Ok(match self.case {
            CaseStudy::Tob => Arc::new(TobModel::new(self.tob.truth, self.space.clone())?),
            CaseStudy::Kvs => Arc::new(KvsTruth::new(self.kvs.truth, self.kvs.penalty, self.space.clone())?),
        })
    }

    pub fn oracle(&self, seed: u64) -> Result<OracleSystem> {
        OracleSystem::new(self.truth()?, self.noise_cv(), seed)
    }

    /// Configurations at which the real system is measured. TOB draws are
    /// uniform over the configurations whose truth utilization is below
    /// `max_utilization`.
    pub fn real_configs(&self, n: usize, seed: u64) -> Vec<Config> {
        match self.case {
            CaseStudy::Tob => {
                let stable = |c: &Config| self.tob.truth.utilization(c.get(0), c.get(1)) < self.tob.max_utilization;
                let mut out: Vec<Config> = Vec::with_capacity(n);
                let mut round = 0;
                while out.len() < n {
                    let s = if round == 0 { seed } else { seed::derive(seed, &[seed::tag("more"), round]) };
                    out.extend(sample_config_space(&self.space, n, s).into_iter().filter(stable));
                    round += 1;
                }
                out.truncate(n);
                out
            }
            CaseStudy::Kvs => kvs_real_configs(&self.space, n, seed),
        }
    }

    /// The experimental dataset: `n_configs` measurements, minus the
    /// configurations at which the truth saturates.
    pub fn oracle_data(&self, seed: u64) -> Result<OracleData> {
        let sys = self.oracle(seed)?;
        let configs = self.real_configs(self.n_configs(), seed::derive(seed, &[seed::tag("configs")]));
        Ok(build_dataset(&sys, &configs, seed::derive(seed, &[seed::tag("noise")])))
    }

    /// Perturbations searched when calibrating a degraded AM. TOB scales
    /// both CPU demands down, so the model stays defined wherever the truth
    /// is; the KVS scales the CPU, network and conflict costs together.
    pub fn degradation_grid(&self) -> Vec<Vec<f64>> {
        match self.case {
            CaseStudy::Tob => {
                let f = geometric_factors(0.02, 1.0, 30);
                f.iter().flat_map(|&a| f.iter().map(move |&b| vec![a, b])).collect()
            }
            CaseStudy::Kvs => {
                geometric_factors(0.1, 10.0, 81).into_iter().map(|f| vec![1.0, f, 1.0, f, f]).collect()
            }
        }
    }

    /// AM whose MAPE against `truth` is as close to `target` as the grid
    /// allows.
    pub fn degraded_am(&self, truth: &Dataset, target: f64) -> Result<Calibration<WhiteBox>> {
        calibrate_degradation(&self.base_am()?, truth, target, &self.degradation_grid())
    }
}
