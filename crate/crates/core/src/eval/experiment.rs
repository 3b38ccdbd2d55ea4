//! The experiment sweep: every combination of case, initial size, update
//! policy, weight, cut-off, real-data fraction, AM degradation and seed.
//!
//! Work shared between combinations is computed once per group: the oracle
//! dataset per (case, seed), the calibrated AM per degradation target, the
//! synthetic training set per initial size, and the baselines per split.
//! Every seed is derived from the replicate seed and the parameters the
//! value depends on, so baselines are identical across policies and results
//! do not depend on scheduling.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{heatmap, model_error, split_real};
use crate::analytic::{model_mape, AnalyticalModel, WhiteBox};
use crate::bootstrap::{continue_loop, initial_knowledge_base};
use crate::cases::{CaseStudy, Scenario};
use crate::dataset::{fmt_f64, Dataset};
use crate::error::{Error, Result};
use crate::learner::{Predict, Regressor, TreeModel, TreeParams, TreeRegressor};
use crate::seed;
use crate::space::Config;
use crate::update::{Policy, UpdateConfig};

/// Which analytical model a combination uses: the scenario's default, or
/// one calibrated to reach a target MAPE against the oracle data.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Degradation {
    #[default]
    None,
    Target(f64),
}

impl Degradation {
    fn key(self) -> u64 {
        match self {
            Degradation::None => u64::MAX,
            Degradation::Target(t) => t.to_bits(),
        }
    }
}

impl fmt::Display for Degradation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Degradation::None => f.write_str("none"),
            Degradation::Target(t) => f.write_str(&fmt_f64(*t)),
        }
    }
}

impl FromStr for Degradation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("none") {
            return Ok(Degradation::None);
        }
        s.parse::<f64>()
            .ok()
            .filter(|t| t.is_finite() && *t >= 0.0)
            .map(Degradation::Target)
            .ok_or_else(|| Error::InvalidArgument(format!("degradation must be \"none\" or a MAPE >= 0, got '{s}'")))
    }
}

impl Serialize for Degradation {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Degradation::None => s.serialize_str("none"),
            Degradation::Target(t) => s.serialize_f64(*t),
        }
    }
}

impl<'de> Deserialize<'de> for Degradation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::Number(t) if t.is_finite() && t >= 0.0 => Ok(Degradation::Target(t)),
            Raw::Number(t) => Err(serde::de::Error::custom(format!("degradation target must be >= 0, got {t}"))),
        }
    }
}

/// A heat map to draw for the first combination matching the filters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatmapRequest {
    pub case: CaseStudy,
    pub policy: Policy,
    pub init_size: Option<usize>,
    pub weight: Option<f64>,
    pub cutoff: Option<f64>,
    pub fraction: Option<f64>,
    pub seed: Option<u64>,
    pub dims: Option<(usize, usize)>,
    #[serde(default = "default_bins")]
    pub bins: (usize, usize),
}

fn default_bins() -> (usize, usize) {
    (20, 20)
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub scenarios: Vec<Scenario>,
    pub init_sizes: Vec<usize>,
    pub policies: Vec<Policy>,
    pub weights: Vec<f64>,
    pub cutoffs: Vec<f64>,
    pub fractions: Vec<f64>,
    pub degradations: Vec<Degradation>,
    pub seeds: Vec<u64>,
    pub learner: TreeParams,
    pub record_wall_time: bool,
    pub heatmaps: Vec<HeatmapRequest>,
}

impl ExperimentSpec {
    /// The default sweep for the given cases.
    pub fn defaults(cases: &[CaseStudy]) -> Self {
        ExperimentSpec {
            scenarios: cases.iter().map(|&c| Scenario::default_for(c)).collect(),
            init_sizes: vec![1000, 10000],
            policies: Policy::ALL.to_vec(),
            weights: vec![1.0, 3.0, 10.0, 30.0, 100.0, 300.0],
            cutoffs: vec![0.01, 0.3],
            fractions: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
            degradations: vec![Degradation::None, Degradation::Target(0.35), Degradation::Target(0.7)],
            seeds: vec![1, 2, 3],
            learner: TreeParams::log_scale(),
            record_wall_time: false,
            heatmaps: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonempty = [
            ("cases", self.scenarios.len()),
            ("init_sizes", self.init_sizes.len()),
            ("policies", self.policies.len()),
            ("weights", self.weights.len()),
            ("cutoffs", self.cutoffs.len()),
            ("fractions", self.fractions.len()),
            ("am_mape_targets", self.degradations.len()),
            ("seeds", self.seeds.len()),
        ];
        for (name, len) in nonempty {
            if len == 0 {
                return Err(Error::InvalidArgument(format!("experiment list '{name}' is empty")));
            }
        }
        if let Some(f) = self.fractions.iter().find(|f| !(**f > 0.0 && **f < 1.0)) {
            return Err(Error::InvalidArgument(format!("fractions must lie in (0, 1), got {f}")));
        }
        if self.init_sizes.contains(&0) {
            return Err(Error::InvalidArgument("initial sizes must be >= 1".into()));
        }
        for &w in &self.weights {
            for &c in &self.cutoffs {
                UpdateConfig::new(Policy::Merge, w, c)?;
            }
        }
        for s in &self.scenarios {
            s.validate()?;
        }
        self.learner.validate()?;
        for h in &self.heatmaps {
            if h.bins.0 == 0 || h.bins.1 == 0 {
                return Err(Error::InvalidArgument("heat-map bins must be >= 1".into()));
            }
            if let Some((x, y)) = h.dims {
                let n = h.case.space().len();
                if x >= n || y >= n {
                    return Err(Error::InvalidArgument(format!("heat-map dims ({x}, {y}) out of range for {}", h.case)));
                }
            }
        }
        Ok(())
    }

    /// Number of result rows the sweep produces.
    pub fn n_combinations(&self) -> usize {
        self.scenarios.len()
            * self.init_sizes.len()
            * self.policies.len()
            * self.weights.len()
            * self.cutoffs.len()
            * self.fractions.len()
            * self.degradations.len()
            * self.seeds.len()
    }

    fn combinations(&self) -> Vec<Combination> {
        let mut out = Vec::with_capacity(self.n_combinations());
        for (scenario, s) in self.scenarios.iter().enumerate() {
            for &init_size in &self.init_sizes {
                for &policy in &self.policies {
                    for &weight in &self.weights {
                        for &cutoff in &self.cutoffs {
                            for &fraction in &self.fractions {
                                for &degradation in &self.degradations {
                                    for &seed in &self.seeds {
                                        out.push(Combination {
                                            scenario,
                                            case: s.case,
                                            init_size,
                                            update: UpdateConfig { policy, weight, cutoff },
                                            fraction,
                                            degradation,
                                            seed,
                                        });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Combination {
    pub scenario: usize,
    pub case: CaseStudy,
    pub init_size: usize,
    pub update: UpdateConfig,
    pub fraction: f64,
    pub degradation: Degradation,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub combination: Combination,
    pub gray_mape: f64,
    pub am_mape: f64,
    pub ml_mape: f64,
    pub n_synth_final: usize,
    pub n_real_final: usize,
    pub wall_seconds: f64,
    pub error: Option<String>,
}

pub const RESULT_HEADER: [&str; 14] = [
    "case",
    "init_size",
    "policy",
    "weight",
    "cutoff",
    "fraction",
    "am_mape_target",
    "seed",
    "gray_mape",
    "am_mape",
    "ml_mape",
    "n_synth_final",
    "n_real_final",
    "wall_seconds",
];

/// Writes the results CSV. Failed combinations have `NaN` errors and zero
/// counts.
pub fn write_results<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(RESULT_HEADER)?;
    for r in rows {
        let c = &r.combination;
        w.write_record([
            c.case.to_string(),
            c.init_size.to_string(),
            c.update.policy.to_string(),
            fmt_f64(c.update.weight),
            fmt_f64(c.update.cutoff),
            fmt_f64(c.fraction),
            c.degradation.to_string(),
            c.seed.to_string(),
            fmt_f64(r.gray_mape),
            fmt_f64(r.am_mape),
            fmt_f64(r.ml_mape),
            r.n_synth_final.to_string(),
            r.n_real_final.to_string(),
            fmt_f64(r.wall_seconds),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Adapter so an analytical model can be scored like a learned one.
/// Configurations it cannot evaluate predict `NaN`.
pub struct AmPredictor<'a, M: ?Sized>(pub &'a M);

impl<M: AnalyticalModel + ?Sized> Predict for AmPredictor<'_, M> {
    fn predict(&self, config: &Config) -> f64 {
        self.0.query(config).unwrap_or(f64::NAN)
    }
}

type SeedKey = (usize, u64);
type AmKey = (usize, u64, u64);

/// Shared per-group inputs of the sweep.
struct Groups {
    am: HashMap<AmKey, Result<WhiteBox>>,
    splits: HashMap<(usize, u64, u64), Result<(Dataset, Dataset)>>,
    initial: HashMap<(usize, u64, u64, usize), Result<Dataset>>,
    ml: HashMap<(usize, u64, u64), Result<f64>>,
}

fn share<T: Clone>(r: &Result<T>) -> Result<T> {
    r.as_ref().map(Clone::clone).map_err(|e| Error::InvalidArgument(e.to_string()))
}

fn oracle_seed(seed: u64, case: CaseStudy) -> u64 {
    seed::derive(seed, &[seed::tag("oracle"), seed::tag(&case.to_string())])
}

fn split_seed(seed: u64, case: CaseStudy, fraction: f64) -> u64 {
    seed::derive(seed, &[seed::tag("split"), seed::tag(&case.to_string()), fraction.to_bits()])
}

fn init_seed(seed: u64, case: CaseStudy, degradation: Degradation, init_size: usize) -> u64 {
    seed::derive(seed, &[seed::tag("init"), seed::tag(&case.to_string()), degradation.key(), init_size as u64])
}

fn unique<T: PartialEq + Copy>(items: impl Iterator<Item = T>) -> Vec<T> {
    let mut out = Vec::new();
    for x in items {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

impl Groups {
    fn build(spec: &ExperimentSpec, combos: &[Combination]) -> Groups {
        let learner = TreeRegressor::new(spec.learner);

        let seed_keys = unique(combos.iter().map(|c| (c.scenario, c.seed)));
        let oracle: HashMap<SeedKey, Result<Dataset>> = seed_keys
            .par_iter()
            .map(|&(s, seed)| {
                let sc = &spec.scenarios[s];
                (s, seed, sc.oracle_data(oracle_seed(seed, sc.case)).map(|o| o.data))
            })
            .collect::<Vec<_>>()
            .into_iter()
            .map(|(s, seed, d)| ((s, seed), d))
            .collect();

        let am_keys = unique(combos.iter().map(|c| (c.scenario, c.seed, c.degradation.key(), c.degradation)));
        let am: HashMap<AmKey, Result<WhiteBox>> = am_keys
            .par_iter()
            .map(|&(s, seed, k, deg)| {
                let sc = &spec.scenarios[s];
                let model = match deg {
                    Degradation::None => sc.am(),
                    Degradation::Target(t) => {
                        share(&oracle[&(s, seed)]).and_then(|d| sc.degraded_am(&d, t)).map(|c| c.model)
                    }
                };
                ((s, seed, k), model)
            })
            .collect::<Vec<_>>()
            .into_iter()
            .collect();

        let split_keys = unique(combos.iter().map(|c| (c.scenario, c.seed, c.fraction.to_bits())));
        let splits: HashMap<_, _> = split_keys
            .iter()
            .map(|&(s, seed, fb)| {
                let f = f64::from_bits(fb);
                let sp = share(&oracle[&(s, seed)])
                    .and_then(|d| split_real(&d, f, split_seed(seed, spec.scenarios[s].case, f)));
                ((s, seed, fb), sp)
            })
            .collect();

        let ml: HashMap<_, _> = split_keys
            .par_iter()
            .map(|key| {
                let m = share(&splits[key])
                    .and_then(|(train, test)| learner.train(&train).and_then(|m| model_error(&m, &test)));
                (*key, m)
            })
            .collect::<Vec<_>>()
            .into_iter()
            .collect();

        let init_keys =
            unique(combos.iter().map(|c| (c.scenario, c.seed, c.degradation.key(), c.init_size, c.degradation)));
        let initial: HashMap<_, _> = init_keys
            .par_iter()
            .map(|&(s, seed, k, n, deg)| {
                let st = share(&am[&(s, seed, k)])
                    .and_then(|m| initial_knowledge_base(&m, n, init_seed(seed, spec.scenarios[s].case, deg, n)));
                ((s, seed, k, n), st)
            })
            .collect::<Vec<_>>()
            .into_iter()
            .collect();

        Groups { am, splits, initial, ml }
    }
}

/// Everything computed for one combination.
pub struct Outcome {
    pub gray: TreeModel,
    pub am: WhiteBox,
    pub train: Dataset,
    pub test: Dataset,
    pub knowledge_base: Dataset,
}

fn run_one(spec: &ExperimentSpec, g: &Groups, c: &Combination) -> Result<Outcome> {
    let learner = TreeRegressor::new(spec.learner);
    let k = c.degradation.key();
    let am = share(&g.am[&(c.scenario, c.seed, k)])?;
    let (train, test) = share(&g.splits[&(c.scenario, c.seed, c.fraction.to_bits())])?;
    let st = share(&g.initial[&(c.scenario, c.seed, k, c.init_size)])?;
    let out = continue_loop(st, &learner, &c.update, [train.clone()], false)?;
    let gray = out.snapshots.into_iter().last().expect("one snapshot per batch plus the initial one").model;
    Ok(Outcome { gray, am, train, test, knowledge_base: out.knowledge_base })
}

fn score(spec: &ExperimentSpec, g: &Groups, c: &Combination) -> ResultRow {
    let start = Instant::now();
    let result = run_one(spec, g, c).and_then(|o| {
        let gray = model_error(&o.gray, &o.test)?;
        let am = model_mape(&o.am, &o.test)?;
        let ml = share(&g.ml[&(c.scenario, c.seed, c.fraction.to_bits())])?;
        Ok((gray, am, ml, o.knowledge_base.n_synthetic(), o.knowledge_base.n_real()))
    });
    let wall = if spec.record_wall_time { start.elapsed().as_secs_f64() } else { 0.0 };
    match result {
        Ok((gray_mape, am_mape, ml_mape, n_synth_final, n_real_final)) => ResultRow {
            combination: *c,
            gray_mape,
            am_mape,
            ml_mape,
            n_synth_final,
            n_real_final,
            wall_seconds: wall,
            error: None,
        },
        Err(e) => ResultRow {
            combination: *c,
            gray_mape: f64::NAN,
            am_mape: f64::NAN,
            ml_mape: f64::NAN,
            n_synth_final: 0,
            n_real_final: 0,
            wall_seconds: wall,
            error: Some(e.to_string()),
        },
    }
}

/// The effective identity of a combination: the cut-off is irrelevant to
/// policies that do not use it.
fn job_key(c: &Combination) -> (usize, u64, u64, usize, Policy, u64, u64, u64) {
    let cutoff = if c.update.policy.uses_cutoff() { c.update.cutoff.to_bits() } else { 0 };
    (c.scenario, c.seed, c.degradation.key(), c.init_size, c.update.policy, c.update.weight.to_bits(), cutoff, c.fraction.to_bits())
}

pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub heatmaps: Vec<HeatmapFile>,
}

/// A rendered heat map and the file name it should be written to.
pub struct HeatmapFile {
    pub name: String,
    pub contents: String,
}

/// Runs the sweep on the current rayon pool. Row order follows the spec's
/// nesting order regardless of scheduling.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    let combos = spec.combinations();
    let groups = Groups::build(spec, &combos);

    let mut job_index: HashMap<_, usize> = HashMap::new();
    let mut jobs = Vec::new();
    let mut row_job = Vec::with_capacity(combos.len());
    for c in &combos {
        let idx = *job_index.entry(job_key(c)).or_insert_with(|| {
            jobs.push(*c);
            jobs.len() - 1
        });
        row_job.push(idx);
    }
    let results: Vec<ResultRow> = jobs.par_iter().map(|c| score(spec, &groups, c)).collect();
    let rows: Vec<ResultRow> = combos
        .iter()
        .zip(&row_job)
        .map(|(c, &j)| ResultRow { combination: *c, ..results[j].clone() })
        .collect();

    let mut heatmaps = Vec::new();
    for h in &spec.heatmaps {
        let Some(c) = combos.iter().find(|c| matches_request(c, h)) else {
            continue;
        };
        let o = run_one(spec, &groups, c)?;
        let ml = TreeRegressor::new(spec.learner).train(&o.train)?;
        let (dx, dy) = h.dims.unwrap_or_else(|| c.case.heatmap_dims());
        let base = format!("heatmap_{}_{}", c.case, c.update.policy);
        let maps: [(&str, &dyn Predict); 3] = [("gray", &o.gray), ("am", &AmPredictor(&o.am)), ("ml", &ml)];
        for (label, model) in maps {
            let map = heatmap(model, &o.test, dx, dy, h.bins.0, h.bins.1)?;
            let mut buf = Vec::new();
            map.write(&mut buf)?;
            heatmaps.push(HeatmapFile {
                name: format!("{base}_{label}.dat"),
                contents: String::from_utf8(buf).expect("heat maps are ASCII"),
            });
        }
    }
    Ok(ExperimentOutput { rows, heatmaps })
}

fn matches_request(c: &Combination, h: &HeatmapRequest) -> bool {
    c.case == h.case
        && c.update.policy == h.policy
        && h.init_size.is_none_or(|v| v == c.init_size)
        && h.weight.is_none_or(|v| v == c.update.weight)
        && h.cutoff.is_none_or(|v| v == c.update.cutoff)
        && h.fraction.is_none_or(|v| v == c.fraction)
        && h.seed.is_none_or(|v| v == c.seed)
}

/// Runs the sweep with `jobs` worker threads and writes `results.csv` and
/// the heat maps into `dir`.
pub fn run_to_dir(spec: &ExperimentSpec, dir: &Path, jobs: usize) -> Result<(Vec<ResultRow>, Vec<PathBuf>)> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    let out = pool.install(|| run_experiment(spec))?;
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let results = dir.join("results.csv");
    write_results(&out.rows, std::io::BufWriter::new(std::fs::File::create(&results)?))?;
    written.push(results);
    for h in out.heatmaps {
        let path = dir.join(&h.name);
        std::fs::write(&path, h.contents)?;
        written.push(path);
    }
    Ok((out.rows, written))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bootstrap::bootstrap_loop;

    fn smoke(case: CaseStudy) -> ExperimentSpec {
        ExperimentSpec {
            init_sizes: vec![300],
            policies: vec![Policy::Merge],
            weights: vec![10.0],
            cutoffs: vec![0.1],
            fractions: vec![0.5],
            degradations: vec![Degradation::None],
            seeds: vec![4],
            ..ExperimentSpec::defaults(&[case])
        }
    }

    #[test]
    fn one_combination_one_row() {
        let out = run_experiment(&smoke(CaseStudy::Tob)).unwrap();
        assert_eq!(out.rows.len(), 1);
        let r = &out.rows[0];
        assert!(r.error.is_none());
        assert!(r.gray_mape.is_finite() && r.am_mape.is_finite() && r.ml_mape.is_finite());
        assert_eq!(r.n_synth_final, 300);
    }

    #[test]
    fn baselines_shared_across_policies() {
        let spec = ExperimentSpec { policies: Policy::ALL.to_vec(), cutoffs: vec![0.01, 0.3], ..smoke(CaseStudy::Kvs) };
        let out = run_experiment(&spec).unwrap();
        assert_eq!(out.rows.len(), 8);
        assert!(out.rows.iter().all(|r| r.ml_mape == out.rows[0].ml_mape && r.am_mape == out.rows[0].am_mape));
        // merge ignores the cut-off
        assert_eq!(out.rows[0].gray_mape, out.rows[1].gray_mape);
    }

    #[test]
    fn runner_matches_bootstrap_loop() {
        let spec = smoke(CaseStudy::Tob);
        let combos = spec.combinations();
        let g = Groups::build(&spec, &combos);
        let c = &combos[0];
        let o = run_one(&spec, &g, c).unwrap();
        let am = spec.scenarios[0].am().unwrap();
        let (train, _) = share(&g.splits[&(0, c.seed, c.fraction.to_bits())]).unwrap();
        let direct = bootstrap_loop(
            &am,
            &TreeRegressor::new(spec.learner),
            &c.update,
            [train],
            c.init_size,
            init_seed(c.seed, c.case, c.degradation, c.init_size),
            false,
        )
        .unwrap();
        assert_eq!(direct.snapshots.last().unwrap().model, o.gray);
    }

    #[test]
    fn failed_combination_yields_error_row() {
        let mut spec = smoke(CaseStudy::Tob);
        // every configuration saturates the modeling AM
        spec.scenarios[0].tob.am_factors = vec![1e3, 1e3];
        let out = run_experiment(&spec).unwrap();
        assert_eq!(out.rows.len(), 1);
        assert!(out.rows[0].error.is_some());
        let mut buf = Vec::new();
        write_results(&out.rows, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().lines().nth(1).unwrap().contains("NaN"));
    }

    #[test]
    fn degradation_parsing() {
        assert_eq!("none".parse::<Degradation>().unwrap(), Degradation::None);
        assert_eq!("0.35".parse::<Degradation>().unwrap(), Degradation::Target(0.35));
        assert!("-1".parse::<Degradation>().is_err());
        assert_eq!(Degradation::Target(0.7).to_string(), "0.7");
    }

    #[test]
    fn heatmaps_for_requested_policy() {
        let mut spec = smoke(CaseStudy::Kvs);
        spec.heatmaps.push(HeatmapRequest {
            case: CaseStudy::Kvs,
            policy: Policy::Merge,
            init_size: None,
            weight: None,
            cutoff: None,
            fraction: None,
            seed: None,
            dims: None,
            bins: (20, 20),
        });
        let out = run_experiment(&spec).unwrap();
        let names: Vec<&str> = out.heatmaps.iter().map(|h| h.name.as_str()).collect();
        assert_eq!(names, ["heatmap_kvs_merge_gray.dat", "heatmap_kvs_merge_am.dat", "heatmap_kvs_merge_ml.dat"]);
        assert!(out.heatmaps.iter().all(|h| !h.contents.is_empty()));
    }
}
