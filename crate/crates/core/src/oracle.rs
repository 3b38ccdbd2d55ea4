//! Simulated running systems that produce real-provenance samples.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng as _;
use rand_distr::{Distribution, LogNormal};

use crate::analytic::kvs::{self, KvsParams};
use crate::analytic::AnalyticalModel;
use crate::dataset::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::seed;
use crate::space::{Config, DimensionKind, FeatureSpace};

/// A ground-truth response surface observed through multiplicative
/// lognormal noise with mean 1.
#[derive(Clone)]
pub struct OracleSystem {
    truth: Arc<dyn AnalyticalModel>,
    noise: Option<LogNormal<f64>>,
    noise_cv: f64,
    seed: u64,
    draws: HashMap<u64, u64>,
}

impl std::fmt::Debug for OracleSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OracleSystem").field("noise_cv", &self.noise_cv).field("seed", &self.seed).finish()
    }
}

impl OracleSystem {
    pub fn new(truth: Arc<dyn AnalyticalModel>, noise_cv: f64, seed: u64) -> Result<Self> {
        if !(noise_cv.is_finite() && noise_cv >= 0.0) {
            return Err(Error::InvalidArgument(format!("noise_cv must be >= 0, got {noise_cv}")));
        }
        let noise = (noise_cv > 0.0).then(|| {
            let var = noise_cv.mul_add(noise_cv, 1.0).ln();
            LogNormal::new(-0.5 * var, var.sqrt()).expect("finite parameters")
        });
        Ok(OracleSystem { truth, noise, noise_cv, seed, draws: HashMap::new() })
    }

    pub fn space(&self) -> &Arc<FeatureSpace> {
        self.truth.space()
    }

    pub fn noise_cv(&self) -> f64 {
        self.noise_cv
    }

    pub fn truth(&self) -> &Arc<dyn AnalyticalModel> {
        &self.truth
    }

    /// The `draw`-th measurement at `config`. Pure: the value depends only
    /// on the system seed, the configuration and `draw`.
    pub fn measure_at(&self, config: &Config, draw: u64) -> Result<Sample> {
        self.measure_keyed(config, self.seed, draw)
    }

    fn measure_keyed(&self, config: &Config, seed: u64, draw: u64) -> Result<Sample> {
        let y = self.truth.query(config)?;
        let factor = match &self.noise {
            None => 1.0,
            Some(dist) => {
                let mut rng = seed::rng(seed::derive(seed, &[seed::hash_values(config.values()), draw]));
                dist.sample(&mut rng)
            }
        };
        Sample::real(config.clone(), y * factor)
    }

    /// Next measurement at `config`; repeated calls at one configuration
    /// draw fresh noise.
    pub fn measure(&mut self, config: &Config) -> Result<Sample> {
        let key = seed::hash_values(config.values());
        let draw = *self.draws.get(&key).unwrap_or(&0);
        let s = self.measure_at(config, draw)?;
        self.draws.insert(key, draw + 1);
        Ok(s)
    }
}

#[derive(Debug, Clone)]
pub struct OracleData {
    pub data: Dataset,
    pub seed: u64,
    /// Configurations the truth could not evaluate.
    pub skipped: usize,
}

/// One measurement per configuration, with noise keyed by `seed`.
/// Repeats of a configuration in the list get successive draws.
pub fn build_dataset(sys: &OracleSystem, configs: &[Config], seed: u64) -> OracleData {
    let mut seen: HashMap<u64, u64> = HashMap::new();
    let mut samples = Vec::with_capacity(configs.len());
    let mut skipped = 0;
    for c in configs {
        let count = seen.entry(seed::hash_values(c.values())).or_insert(0);
        match sys.measure_keyed(c, seed, *count) {
            Ok(s) => samples.push(s),
            Err(_) => skipped += 1,
        }
        *count += 1;
    }
    OracleData { data: Dataset::from_trusted(sys.space().clone(), samples), seed, skipped }
}

/// KVS ground truth: the synthetic throughput formula plus a residence-time
/// penalty `penalty * (wf * (N - N_min) / (N_max - N_min))^2` that only bites
/// with many nodes and many write transactions.
#[derive(Debug, Clone, PartialEq)]
pub struct KvsTruth {
    pub params: KvsParams,
    pub penalty: f64,
    space: Arc<FeatureSpace>,
}

pub const KVS_DEFAULT_PENALTY: f64 = 5e-3;

impl KvsTruth {
    pub fn new(params: KvsParams, penalty: f64, space: Arc<FeatureSpace>) -> Result<Self> {
        params.validate()?;
        if !(penalty.is_finite() && penalty >= 0.0) {
            return Err(Error::InvalidParams(format!("penalty must be >= 0, got {penalty}")));
        }
        Ok(KvsTruth { params, penalty, space })
    }
}

impl AnalyticalModel for KvsTruth {
    fn space(&self) -> &Arc<FeatureSpace> {
        &self.space
    }

    fn query(&self, config: &Config) -> Result<f64> {
        self.space.check(config.values())?;
        let v = config.values();
        let span = (kvs::MAX_NODES - kvs::MIN_NODES) as f64;
        let load = v[kvs::WRITE_FRACTION] * (v[kvs::NODES] - kvs::MIN_NODES as f64) / span;
        Ok(v[kvs::NODES] * self.params.k_c / (self.params.denominator(v) + self.penalty * load * load))
    }
}

/// Real-workload configurations for the KVS case: node counts with density
/// proportional to `1/N`, replication restricted to `{1, 2, 3, N/2, N}` and
/// the other dimensions uniform.
pub fn kvs_real_configs(space: &FeatureSpace, n: usize, seed: u64) -> Vec<Config> {
    let nodes: Vec<f64> = (kvs::MIN_NODES..=kvs::MAX_NODES).map(|v| v as f64).collect();
    let mut cumulative = Vec::with_capacity(nodes.len());
    let mut total = 0.0;
    for v in &nodes {
        total += 1.0 / v;
        cumulative.push(total);
    }
    let mut rng = seed::rng(seed);
    (0..n)
        .map(|_| {
            let u = rng.random::<f64>() * total;
            let i = cumulative.partition_point(|&c| c <= u).min(nodes.len() - 1);
            let n_nodes = nodes[i];
            let levels = kvs::replication_levels(n_nodes);
            let repl = levels[rng.random_range(0..levels.len())];
            let values = space
                .dims()
                .iter()
                .enumerate()
                .map(|(d, dim)| match d {
                    kvs::NODES => n_nodes,
                    kvs::REPLICATION => repl,
                    _ => match &dim.kind {
                        DimensionKind::Continuous { lo, hi } => (lo + (hi - lo) * rng.random::<f64>()).min(*hi),
                        DimensionKind::Discrete { levels } => levels[rng.random_range(0..levels.len())],
                    },
                })
                .collect();
            Config::from_raw(values)
        })
        .collect()
}
