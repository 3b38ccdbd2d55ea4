//! Run configuration files (TOML).
//!
//! ```toml
//! schema_version = 1
//! case = "tob"
//! seed = 7
//!
//! [tob]
//! am_factors = [0.8, 0.8]
//!
//! [learner]
//! max_depth = 8
//!
//! [init]
//! n = 10000            # or: sizing = { epsilon = 0.1 }
//!
//! [update]
//! policy = "merge"
//! weight = 100
//!
//! [experiment]
//! cases = ["tob", "kvs"]
//! am_mape_targets = ["none", 0.35]
//!
//! [output]
//! dir = "results"
//! ```
//!
//! Every section is optional. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::bootstrap::SizingConfig;
use crate::cases::{CaseStudy, KvsSettings, Scenario, TobSettings};
use crate::error::{Error, Result};
use crate::eval::{Degradation, ExperimentSpec, HeatmapRequest};
use crate::learner::{LeafKind, TreeParams};
use crate::update::{Policy, UpdateConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default = "default_case")]
    pub case: CaseStudy,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub tob: TobSettings,
    #[serde(default)]
    pub kvs: KvsSettings,
    #[serde(default)]
    pub learner: LearnerSection,
    #[serde(default)]
    pub init: InitSection,
    #[serde(default = "default_update")]
    pub update: UpdateConfig,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_case() -> CaseStudy {
    CaseStudy::Tob
}

fn default_seed() -> u64 {
    1
}

fn default_update() -> UpdateConfig {
    UpdateConfig { policy: Policy::Merge, weight: 100.0, cutoff: 0.01 }
}

/// Learner overrides on top of [`TreeParams::log_scale`].
#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerSection {
    pub max_depth: Option<usize>,
    pub min_leaf_weight: Option<f64>,
    pub leaf_kind: Option<LeafKind>,
    pub log_target: Option<bool>,
}

impl LearnerSection {
    pub fn params(&self) -> TreeParams {
        let base = TreeParams::log_scale();
        TreeParams {
            max_depth: self.max_depth.unwrap_or(base.max_depth),
            min_leaf_weight: self.min_leaf_weight.unwrap_or(base.min_leaf_weight),
            leaf_kind: self.leaf_kind.unwrap_or(base.leaf_kind),
            log_target: self.log_target.unwrap_or(base.log_target),
        }
    }
}

/// Size of the initial synthetic training set: fixed, or found by
/// cross-validation. The sizing seed is always the run seed.
#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    pub n: Option<usize>,
    pub sizing: Option<SizingConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitPlan {
    Fixed(usize),
    Sized(SizingConfig),
}

pub const DEFAULT_INIT_N: usize = 10_000;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub cases: Option<Vec<CaseStudy>>,
    pub init_sizes: Option<Vec<usize>>,
    pub policies: Option<Vec<Policy>>,
    pub weights: Option<Vec<f64>>,
    pub cutoffs: Option<Vec<f64>>,
    pub fractions: Option<Vec<f64>>,
    pub am_mape_targets: Option<Vec<Degradation>>,
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub record_wall_time: bool,
    #[serde(default)]
    pub heatmaps: Vec<HeatmapRequest>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: default_dir() }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn config_error(e: impl std::fmt::Display) -> Error {
    Error::RunConfig(e.to_string())
}

impl RunConfig {
    /// Parses and validates; every failure is a [`Error::RunConfig`].
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(config_error)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::RunConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::RunConfig(format!(
                "unsupported schema_version {}, expected {SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        self.scenario_for(self.case)?;
        self.learner.params().validate().map_err(config_error)?;
        self.init_plan()?;
        self.update.validate().map_err(config_error)?;
        self.experiment_spec()?;
        Ok(())
    }

    pub fn scenario_for(&self, case: CaseStudy) -> Result<Scenario> {
        Scenario::new(case, self.tob.clone(), self.kvs.clone()).map_err(config_error)
    }

    pub fn scenario(&self) -> Result<Scenario> {
        self.scenario_for(self.case)
    }

    pub fn learner(&self) -> TreeParams {
        self.learner.params()
    }

    pub fn init_plan(&self) -> Result<InitPlan> {
        match (self.init.n, self.init.sizing) {
            (Some(_), Some(_)) => Err(Error::RunConfig("[init] takes either n or sizing, not both".into())),
            (Some(0), None) => Err(Error::RunConfig("[init] n must be positive".into())),
            (Some(n), None) => Ok(InitPlan::Fixed(n)),
            (None, Some(mut sz)) => {
                sz.seed = self.seed;
                sz.validate().map_err(config_error)?;
                Ok(InitPlan::Sized(sz))
            }
            (None, None) => Ok(InitPlan::Fixed(DEFAULT_INIT_N)),
        }
    }

    /// The sweep described by `[experiment]`, on top of the default grids.
    pub fn experiment_spec(&self) -> Result<ExperimentSpec> {
        let e = &self.experiment;
        let cases = e.cases.clone().unwrap_or_else(|| vec![CaseStudy::Tob, CaseStudy::Kvs]);
        let scenarios = cases.iter().map(|&c| self.scenario_for(c)).collect::<Result<Vec<_>>>()?;
        let d = ExperimentSpec::defaults(&cases);
        let spec = ExperimentSpec {
            scenarios,
            init_sizes: e.init_sizes.clone().unwrap_or(d.init_sizes),
            policies: e.policies.clone().unwrap_or(d.policies),
            weights: e.weights.clone().unwrap_or(d.weights),
            cutoffs: e.cutoffs.clone().unwrap_or(d.cutoffs),
            fractions: e.fractions.clone().unwrap_or(d.fractions),
            degradations: e.am_mape_targets.clone().unwrap_or(d.degradations),
            seeds: e.seeds.clone().unwrap_or(d.seeds),
            learner: self.learner(),
            record_wall_time: e.record_wall_time,
            heatmaps: e.heatmaps.clone(),
        };
        spec.validate().map_err(config_error)?;
        Ok(spec)
    }
}
