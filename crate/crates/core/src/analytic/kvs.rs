//! Synthetic throughput model of a replicated transactional key-value store.
//!
//! Seven dimensions: node count `N`, replication degree, reads and writes
//! per transaction, write-transaction fraction, client think time and access
//! skew. Throughput in transactions per second is
//!
//! ```text
//! X = N * k_c / ( t_think
//!               + k_cpu * (reads + wf * writes * (1 + k_repl * repl / N))
//!               + k_net * repl
//!               + k_conf * wf * writes * skew * N )
//! ```
//!
//! The contention term grows with `N`, so throughput saturates as nodes are
//! added, and write-heavy skewed workloads degrade fastest.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{check_factors, AnalyticalModel, Perturb};
use crate::error::{Error, Result};
use crate::space::{Config, Dimension, FeatureSpace};

pub const MIN_NODES: i64 = 2;
pub const MAX_NODES: i64 = 140;

pub const NODES: usize = 0;
pub const REPLICATION: usize = 1;
pub const READS: usize = 2;
pub const WRITES: usize = 3;
pub const WRITE_FRACTION: usize = 4;
pub const THINK_TIME: usize = 5;
pub const SKEW: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KvsParams {
    /// Concurrent transactions per node.
    pub k_c: f64,
    /// CPU seconds per operation.
    pub k_cpu: f64,
    /// Relative cost of propagating a write to each replica.
    pub k_repl: f64,
    /// Network seconds per replica contacted.
    pub k_net: f64,
    /// Conflict cost, seconds per contending write per node.
    pub k_conf: f64,
}

impl Default for KvsParams {
    fn default() -> Self {
        KvsParams { k_c: 1.0, k_cpu: 2e-4, k_repl: 0.5, k_net: 2e-5, k_conf: 1e-5 }
    }
}

impl KvsParams {
    fn as_array(&self) -> [f64; 5] {
        [self.k_c, self.k_cpu, self.k_repl, self.k_net, self.k_conf]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in ["k_c", "k_cpu", "k_repl", "k_net", "k_conf"].iter().zip(self.as_array()) {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Seconds of per-transaction residence time; throughput is
    /// `N * k_c / denominator`.
    pub(crate) fn denominator(&self, v: &[f64]) -> f64 {
        let n = v[NODES];
        let write_ops = v[WRITE_FRACTION] * v[WRITES];
        v[THINK_TIME]
            + self.k_cpu * (v[READS] + write_ops * (1.0 + self.k_repl * v[REPLICATION] / n))
            + self.k_net * v[REPLICATION]
            + self.k_conf * write_ops * v[SKEW] * n
    }
}

impl Perturb for KvsParams {
    fn param_names(&self) -> Vec<&'static str> {
        vec!["k_c", "k_cpu", "k_repl", "k_net", "k_conf"]
    }

    fn perturb(&self, factors: &[f64]) -> Result<Self> {
        check_factors(factors, 5)?;
        let p = KvsParams {
            k_c: self.k_c * factors[0],
            k_cpu: self.k_cpu * factors[1],
            k_repl: self.k_repl * factors[2],
            k_net: self.k_net * factors[3],
            k_conf: self.k_conf * factors[4],
        };
        p.validate()?;
        Ok(p)
    }
}

pub fn kvs_query(values: &[f64], params: &KvsParams) -> f64 {
    values[NODES] * params.k_c / params.denominator(values)
}

/// The replication levels a deployment of `nodes` nodes can use:
/// `{1, 2, 3, N/2, N}`.
pub fn replication_levels(nodes: f64) -> [f64; 5] {
    [1.0, 2.0, 3.0, 0.5 * nodes, nodes]
}

pub fn kvs_space() -> FeatureSpace {
    FeatureSpace::new(vec![
        Dimension::integer("nodes", MIN_NODES, MAX_NODES),
        Dimension::continuous("replication", 1.0, MAX_NODES as f64),
        Dimension::integer("reads_per_tx", 1, 5),
        Dimension::integer("writes_per_tx", 1, 5),
        Dimension::continuous("write_fraction", 0.0, 1.0),
        Dimension::continuous("think_time", 1e-4, 1e-2),
        Dimension::continuous("skew", 0.0, 1.0),
    ])
    .expect("static space is valid")
}

#[derive(Debug, Clone, PartialEq)]
pub struct KvsModel {
    pub params: KvsParams,
    space: Arc<FeatureSpace>,
}

impl KvsModel {
    pub fn new(params: KvsParams, space: Arc<FeatureSpace>) -> Result<Self> {
        params.validate()?;
        if space.len() != 7 {
            return Err(Error::InvalidSpace("KVS model needs a 7-dimensional space".into()));
        }
        Ok(KvsModel { params, space })
    }
}

impl AnalyticalModel for KvsModel {
    fn space(&self) -> &Arc<FeatureSpace> {
        &self.space
    }

    fn query(&self, config: &Config) -> Result<f64> {
        self.space.check(config.values())?;
        Ok(kvs_query(config.values(), &self.params))
    }
}

impl Perturb for KvsModel {
    fn param_names(&self) -> Vec<&'static str> {
        self.params.param_names()
    }

    fn perturb(&self, factors: &[f64]) -> Result<Self> {
        Ok(KvsModel { params: self.params.perturb(factors)?, space: self.space.clone() })
    }
}
