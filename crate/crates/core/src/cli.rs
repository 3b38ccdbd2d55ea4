//! Command-line interface. Exit codes: 0 success, 1 runtime failure,
//! 2 configuration or usage error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};

use crate::analytic::model_mape;
use crate::bootstrap::{initial_knowledge_base, size_by_cv};
use crate::config::{InitPlan, RunConfig};
use crate::dataset::{fmt_f64, parse_f64, Dataset};
use crate::error::{Error, Result};
use crate::eval::{experiment::run_to_dir, model_error};
use crate::learner::{Regressor, TreeModel, TreeRegressor};
use crate::space::{Config, FeatureSpace};
use crate::update::update_kb;

#[derive(Debug, Parser)]
#[command(name = "graybox", version, about = "Gray-box performance models bootstrapped from analytical models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Measure the simulated system of the configured case study.
    GenOracle {
        #[arg(long)]
        config: PathBuf,
        /// Output dataset CSV.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Build the synthetic training set from the AM and train the initial model.
    Init {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_model: PathBuf,
        #[arg(long)]
        out_st: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fold measured samples into a training set with the configured policy.
    Update {
        #[arg(long)]
        config: PathBuf,
        /// Current training set CSV.
        #[arg(long)]
        st: PathBuf,
        /// New measurements CSV.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out_st: PathBuf,
        /// Also retrain and write the model.
        #[arg(long)]
        out_model: Option<PathBuf>,
    },
    /// Predict at the configurations of a CSV whose header names the
    /// feature dimensions; other columns are ignored.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        configs: PathBuf,
        /// Defaults to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment sweep, writing results.csv and heat maps.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `[output] dir`.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Runs the single replicate `seed` instead of the configured list.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// MAPE of a model, or of the configured AM with --config, on a dataset.
    Eval {
        #[arg(long, conflicts_with = "config", required_unless_present = "config")]
        model: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
    },
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_config_error() {
        2
    } else {
        1
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenOracle { config, out, seed } => gen_oracle(&config, &out, seed),
        Command::Init { config, out_model, out_st, seed } => init(&config, &out_model, &out_st, seed),
        Command::Update { config, st, data, out_st, out_model } => update(&config, &st, &data, &out_st, out_model.as_deref()),
        Command::Predict { model, configs, out } => predict(&model, &configs, out.as_deref()),
        Command::Experiment { config, out_dir, jobs, seed } => experiment(&config, out_dir, jobs, seed),
        Command::Eval { model, config, data } => eval(model.as_deref(), config.as_deref(), &data),
    }
}

fn load(path: &Path, seed: Option<u64>) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn read_dataset(space: Arc<FeatureSpace>, path: &Path) -> Result<Dataset> {
    Dataset::read_csv(space, File::open(path)?)
}

fn write_model(model: &TreeModel, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer(&mut w, model)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn read_model(path: &Path) -> Result<TreeModel> {
    Ok(serde_json::from_reader(io::BufReader::new(File::open(path)?))?)
}

fn gen_oracle(config: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let cfg = load(config, seed)?;
    let data = cfg.scenario()?.oracle_data(cfg.seed)?;
    data.data.write_csv(create(out)?)?;
    eprintln!("{} samples, {} saturated configurations skipped", data.data.len(), data.skipped);
    Ok(())
}

fn init(config: &Path, out_model: &Path, out_st: &Path, seed: Option<u64>) -> Result<()> {
    let cfg = load(config, seed)?;
    let am = cfg.scenario()?.am()?;
    let learner = TreeRegressor::new(cfg.learner());
    let st = match cfg.init_plan()? {
        InitPlan::Fixed(n) => initial_knowledge_base(&am, n, cfg.seed)?,
        InitPlan::Sized(sz) => {
            let sizing = size_by_cv(&am, &learner, &sz)?;
            for (n, cv) in &sizing.trace {
                eprintln!("n={n} cv_mape={}", fmt_f64(*cv));
            }
            eprintln!("chose n={} with cv_mape={}", sizing.n, fmt_f64(sizing.cv_mape));
            sizing.data
        }
    };
    let model = learner.train(&st)?;
    st.write_csv(create(out_st)?)?;
    write_model(&model, out_model)
}

fn update(config: &Path, st: &Path, data: &Path, out_st: &Path, out_model: Option<&Path>) -> Result<()> {
    let cfg = load(config, None)?;
    let space = cfg.scenario()?.space().clone();
    let st = read_dataset(space.clone(), st)?;
    let d = read_dataset(space, data)?;
    let next = update_kb(&st, &d, &cfg.update)?;
    eprintln!("{} synthetic, {} real samples", next.n_synthetic(), next.n_real());
    next.write_csv(create(out_st)?)?;
    if let Some(path) = out_model {
        write_model(&TreeRegressor::new(cfg.learner()).train(&next)?, path)?;
    }
    Ok(())
}

fn predict(model: &Path, configs: &Path, out: Option<&Path>) -> Result<()> {
    let model = read_model(model)?;
    let space = model.space();
    let mut r = csv::Reader::from_reader(File::open(configs)?);
    let header = r.headers()?.clone();
    let columns = space
        .names()
        .map(|name| {
            header
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::Format(format!("input has no column '{name}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(sink);
    let mut names: Vec<&str> = space.names().collect();
    names.push("prediction");
    w.write_record(&names)?;
    for (line, record) in r.records().enumerate() {
        let record = record?;
        let values = columns.iter().map(|&c| parse_f64(&record[c], line)).collect::<Result<Vec<_>>>()?;
        let config = Config::new(space, values)?;
        let mut row: Vec<String> = config.values().iter().map(|v| fmt_f64(*v)).collect();
        row.push(fmt_f64(model.try_predict(&config)?));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn experiment(config: &Path, out_dir: Option<PathBuf>, jobs: usize, seed: Option<u64>) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let mut spec = cfg.experiment_spec()?;
    if let Some(s) = seed {
        spec.seeds = vec![s];
    }
    let dir = out_dir.unwrap_or_else(|| cfg.output.dir.clone());
    let (rows, files) = run_to_dir(&spec, &dir, jobs)?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    eprintln!("{} combinations ({failed} failed), {} files written to {}", rows.len(), files.len(), dir.display());
    Ok(())
}

fn eval(model: Option<&Path>, config: Option<&Path>, data: &Path) -> Result<()> {
    let mape = match (model, config) {
        (Some(m), _) => {
            let model = read_model(m)?;
            let d = read_dataset(Arc::new(model.space().clone()), data)?;
            model_error(&model, &d)?
        }
        (None, Some(c)) => {
            let scenario = load(c, None)?.scenario()?;
            let d = read_dataset(scenario.space().clone(), data)?;
            model_mape(&scenario.am()?, &d)?
        }
        (None, None) => return Err(Error::RunConfig("eval needs --model or --config".into())),
    };
    println!("mape,{}", fmt_f64(mape));
    Ok(())
}
