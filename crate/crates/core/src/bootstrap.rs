//! Building the synthetic knowledge base and running the train/update loop.

use std::collections::HashSet;
use std::io::Write;
use std::time::Instant;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::analytic::AnalyticalModel;
use crate::dataset::{fmt_f64, Dataset, Sample};
use crate::error::{Error, Result};
use crate::eval::kfold_cv;
use crate::learner::Regressor;
use crate::seed;
use crate::space::{Config, DimensionKind, FeatureSpace};
use crate::update::{update_kb, UpdateConfig};

/// Redraws allowed per configuration before a duplicate is accepted.
const DEDUP_RETRIES: usize = 32;

/// Upper bound on top-up rounds in [`initial_knowledge_base`].
const TOP_UP_ROUNDS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizingConfig {
    pub epsilon: f64,
    #[serde(default = "default_start")]
    pub start_n: usize,
    #[serde(default = "default_growth")]
    pub growth: f64,
    #[serde(default = "default_cap")]
    pub cap_n: usize,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_start() -> usize {
    100
}

fn default_growth() -> f64 {
    2.0
}

fn default_cap() -> usize {
    16384
}

fn default_folds() -> usize {
    10
}

impl SizingConfig {
    pub fn new(epsilon: f64, seed: u64) -> Self {
        SizingConfig {
            epsilon,
            start_n: default_start(),
            growth: default_growth(),
            cap_n: default_cap(),
            folds: default_folds(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) {
            return Err(Error::InvalidArgument(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if self.start_n == 0 || self.start_n > self.cap_n {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= start_n <= cap_n, got {} and {}",
                self.start_n, self.cap_n
            )));
        }
        if !(self.growth > 1.0 && self.growth.is_finite()) {
            return Err(Error::InvalidArgument(format!("growth must be > 1, got {}", self.growth)));
        }
        if self.folds < 2 || self.start_n < self.folds {
            return Err(Error::InvalidArgument(format!(
                "folds must lie in [2, start_n], got {} with start_n {}",
                self.folds, self.start_n
            )));
        }
        Ok(())
    }

    /// Candidate sizes: `start_n * growth^i` below the cap, then the cap.
    pub fn schedule(&self) -> Vec<usize> {
        let mut sizes = Vec::new();
        let mut n = self.start_n as f64;
        while (n.round() as usize) < self.cap_n {
            let k = n.round() as usize;
            if sizes.last() != Some(&k) {
                sizes.push(k);
            }
            n *= self.growth;
        }
        sizes.push(self.cap_n);
        sizes
    }
}

fn draw(space: &FeatureSpace, rng: &mut seed::Rng) -> Vec<f64> {
    space
        .dims()
        .iter()
        .map(|d| match &d.kind {
            DimensionKind::Continuous { lo, hi } => (lo + (hi - lo) * rng.random::<f64>()).min(*hi),
            DimensionKind::Discrete { levels } => levels[rng.random_range(0..levels.len())],
        })
        .collect()
}

/// `n` configurations drawn uniformly and independently per dimension.
/// A duplicate is redrawn a bounded number of times, then kept.
pub fn sample_config_space(space: &FeatureSpace, n: usize, seed: u64) -> Vec<Config> {
    let mut rng = seed::rng(seed);
    let mut seen = HashSet::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut values = draw(space, &mut rng);
        for _ in 0..DEDUP_RETRIES {
            if !seen.contains(&key(&values)) {
                break;
            }
            values = draw(space, &mut rng);
        }
        seen.insert(key(&values));
        out.push(Config::from_raw(values));
    }
    out
}

fn key(values: &[f64]) -> Vec<u64> {
    values.iter().map(|v| v.to_bits()).collect()
}

/// Queries the model at each configuration. Returns the synthetic samples
/// and the number of configurations the model could not evaluate.
pub fn generate_synthetic<M: AnalyticalModel + ?Sized>(am: &M, configs: &[Config]) -> (Dataset, usize) {
    let mut skipped = 0;
    let mut samples = Vec::with_capacity(configs.len());
    for c in configs {
        match am.query(c).and_then(|y| Sample::synthetic(c.clone(), y)) {
            Ok(s) => samples.push(s),
            Err(_) => skipped += 1,
        }
    }
    (Dataset::from_trusted(am.space().clone(), samples), skipped)
}

/// Exactly `n` synthetic samples: configurations the model cannot evaluate
/// are replaced by further uniform draws.
pub fn initial_knowledge_base<M: AnalyticalModel + ?Sized>(am: &M, n: usize, seed: u64) -> Result<Dataset> {
    let space = am.space().clone();
    let (data, _) = generate_synthetic(am, &sample_config_space(&space, n, seed));
    let mut samples = data.into_samples();
    let mut round = 0;
    while samples.len() < n {
        round += 1;
        if round > TOP_UP_ROUNDS {
            return Err(Error::InvalidArgument(format!(
                "analytical model is undefined on too much of the space to draw {n} samples"
            )));
        }
        let missing = n - samples.len();
        let configs = sample_config_space(&space, missing, seed::derive(seed, &[seed::tag("top-up"), round as u64]));
        let (extra, _) = generate_synthetic(am, &configs);
        samples.extend(extra.into_samples());
    }
    Ok(Dataset::from_trusted(space, samples))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sizing {
    pub n: usize,
    pub cv_mape: f64,
    /// `(n, cv_mape)` for every size tried.
    pub trace: Vec<(usize, f64)>,
    /// The synthetic set drawn at the returned size.
    pub data: Dataset,
}

/// Smallest size on the schedule whose cross-validated MAPE against the
/// model's own outputs is at most `epsilon`, or the cap.
pub fn size_by_cv<M, R>(am: &M, learner: &R, sz: &SizingConfig) -> Result<Sizing>
where
    M: AnalyticalModel + ?Sized,
    R: Regressor + ?Sized,
{
    sz.validate()?;
    let mut trace = Vec::new();
    for (i, n) in sz.schedule().into_iter().enumerate() {
        let i = i as u64;
        let data = initial_knowledge_base(am, n, seed::derive(sz.seed, &[seed::tag("sizing"), i]))?;
        let cv = kfold_cv(learner, &data, sz.folds, seed::derive(sz.seed, &[seed::tag("folds"), i]))?;
        trace.push((n, cv));
        if cv <= sz.epsilon || n == sz.cap_n {
            return Ok(Sizing { n, cv_mape: cv, trace, data });
        }
    }
    unreachable!("schedule ends at the cap")
}

#[derive(Debug, Clone)]
pub struct Snapshot<M> {
    pub round: usize,
    pub model: M,
    pub n_synthetic: usize,
    pub n_real: usize,
    /// Zero unless timing was requested.
    pub train_seconds: f64,
}

pub struct LoopOutput<M> {
    pub snapshots: Vec<Snapshot<M>>,
    pub knowledge_base: Dataset,
}

/// Initial synthetic training set, then one update and retrain per batch.
pub fn bootstrap_loop<A, R, I>(
    am: &A,
    learner: &R,
    update: &UpdateConfig,
    batches: I,
    init_n: usize,
    seed: u64,
    timed: bool,
) -> Result<LoopOutput<R::Model>>
where
    A: AnalyticalModel + ?Sized,
    R: Regressor + ?Sized,
    I: IntoIterator<Item = Dataset>,
{
    if init_n == 0 {
        return Err(Error::InvalidArgument("initial knowledge base size must be >= 1".into()));
    }
    update.validate()?;
    let st = initial_knowledge_base(am, init_n, seed)?;
    continue_loop(st, learner, update, batches, timed)
}

/// The loop from an already built initial training set.
pub fn continue_loop<R, I>(
    mut st: Dataset,
    learner: &R,
    update: &UpdateConfig,
    batches: I,
    timed: bool,
) -> Result<LoopOutput<R::Model>>
where
    R: Regressor + ?Sized,
    I: IntoIterator<Item = Dataset>,
{
    let mut snapshots = vec![snapshot(0, &st, learner, timed)?];
    for (i, d) in batches.into_iter().enumerate() {
        st = update_kb(&st, &d, update)?;
        snapshots.push(snapshot(i + 1, &st, learner, timed)?);
    }
    Ok(LoopOutput { snapshots, knowledge_base: st })
}

fn snapshot<R: Regressor + ?Sized>(round: usize, st: &Dataset, learner: &R, timed: bool) -> Result<Snapshot<R::Model>> {
    let start = Instant::now();
    let model = learner.train(st)?;
    let train_seconds = if timed { start.elapsed().as_secs_f64() } else { 0.0 };
    Ok(Snapshot { round, model, n_synthetic: st.n_synthetic(), n_real: st.n_real(), train_seconds })
}

pub fn write_snapshots<M, W: Write>(snapshots: &[Snapshot<M>], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(["round", "n_synthetic", "n_real", "train_seconds"])?;
    for s in snapshots {
        w.write_record([s.round.to_string(), s.n_synthetic.to_string(), s.n_real.to_string(), fmt_f64(s.train_seconds)])?;
    }
    w.flush()?;
    Ok(())
}
