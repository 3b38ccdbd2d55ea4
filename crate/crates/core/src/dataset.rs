//! Samples and datasets, plus the dataset CSV format.
//!
//! The CSV header is `<dim names...>,target,weight,provenance`, with
//! provenance one of `synthetic` or `real`. Numbers are written in their
//! shortest round-trip form, so a write/read cycle is lossless.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{Config, FeatureSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Synthetic,
    Real,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Synthetic => "synthetic",
            Provenance::Real => "real",
        })
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synthetic" => Ok(Provenance::Synthetic),
            "real" => Ok(Provenance::Real),
            other => Err(Error::Format(format!("unknown provenance '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub config: Config,
    pub target: f64,
    pub weight: f64,
    pub provenance: Provenance,
}

impl Sample {
    pub fn new(config: Config, target: f64, weight: f64, provenance: Provenance) -> Result<Self> {
        if !target.is_finite() {
            return Err(Error::InvalidSample(format!("target {target} is not finite")));
        }
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::InvalidWeight(weight));
        }
        Ok(Sample { config, target, weight, provenance })
    }

    pub fn synthetic(config: Config, target: f64) -> Result<Self> {
        Self::new(config, target, 1.0, Provenance::Synthetic)
    }

    pub fn real(config: Config, target: f64) -> Result<Self> {
        Self::new(config, target, 1.0, Provenance::Real)
    }

    pub fn is_synthetic(&self) -> bool {
        self.provenance == Provenance::Synthetic
    }
}

/// An ordered multiset of samples over one feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    space: Arc<FeatureSpace>,
    samples: Vec<Sample>,
}

impl Dataset {
    pub fn empty(space: Arc<FeatureSpace>) -> Self {
        Dataset { space, samples: Vec::new() }
    }

    /// Builds a dataset, checking that every sample belongs to `space`.
    pub fn new(space: Arc<FeatureSpace>, samples: Vec<Sample>) -> Result<Self> {
        for s in &samples {
            space.check(s.config.values())?;
        }
        Ok(Dataset { space, samples })
    }

    /// For samples already known to belong to `space`.
    pub(crate) fn from_trusted(space: Arc<FeatureSpace>, samples: Vec<Sample>) -> Self {
        Dataset { space, samples }
    }

    pub fn space(&self) -> &Arc<FeatureSpace> {
        &self.space
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Sample> {
        self.samples.iter()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn count(&self, provenance: Provenance) -> usize {
        self.samples.iter().filter(|s| s.provenance == provenance).count()
    }

    pub fn n_synthetic(&self) -> usize {
        self.count(Provenance::Synthetic)
    }

    pub fn n_real(&self) -> usize {
        self.count(Provenance::Real)
    }

    pub fn targets(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.target).collect()
    }

    pub fn same_space(&self, other: &Dataset) -> bool {
        Arc::ptr_eq(&self.space, &other.space) || self.space == other.space
    }

    /// Splits into (synthetic, real), each preserving the original order.
    pub fn partition(&self) -> (Dataset, Dataset) {
        let (syn, real): (Vec<_>, Vec<_>) = self.samples.iter().cloned().partition(Sample::is_synthetic);
        (Dataset::from_trusted(self.space.clone(), syn), Dataset::from_trusted(self.space.clone(), real))
    }

    /// Subset by index, in the order given.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset::from_trusted(self.space.clone(), indices.iter().map(|&i| self.samples[i].clone()).collect())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        let mut header: Vec<String> = self.space.names().map(str::to_owned).collect();
        header.extend(["target", "weight", "provenance"].map(String::from));
        w.write_record(&header)?;
        for s in &self.samples {
            let mut row: Vec<String> = s.config.values().iter().map(|v| fmt_f64(*v)).collect();
            row.push(fmt_f64(s.target));
            row.push(fmt_f64(s.weight));
            row.push(s.provenance.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(space: Arc<FeatureSpace>, reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = r.headers()?.clone();
        let k = space.len();
        let expected: Vec<&str> = space.names().chain(["target", "weight", "provenance"]).collect();
        if header.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Format(format!(
                "dataset header {:?} does not match expected {:?}",
                header.iter().collect::<Vec<_>>(),
                expected
            )));
        }
        let mut samples = Vec::new();
        for (line, record) in r.records().enumerate() {
            let record = record?;
            let mut values = Vec::with_capacity(k);
            for field in record.iter().take(k) {
                values.push(parse_f64(field, line)?);
            }
            let config = Config::new(&space, values)?;
            let target = parse_f64(&record[k], line)?;
            let weight = parse_f64(&record[k + 1], line)?;
            let provenance: Provenance = record[k + 2].parse()?;
            samples.push(Sample::new(config, target, weight, provenance)?);
        }
        Ok(Dataset { space, samples })
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a Sample;
    type IntoIter = std::slice::Iter<'a, Sample>;

    fn into_iter(self) -> Self::IntoIter {
        self.samples.iter()
    }
}

pub(crate) fn parse_f64(field: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Format(format!("row {}: '{field}' is not a number", line + 1)))
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}
