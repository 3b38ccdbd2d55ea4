//! Feature spaces, configurations and the normalized distance metric.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DimensionKind {
    Continuous { lo: f64, hi: f64 },
    /// Ordered levels embedded by their numeric value.
    Discrete { levels: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    pub kind: DimensionKind,
}

impl Dimension {
    pub fn continuous(name: impl Into<String>, lo: f64, hi: f64) -> Self {
        Dimension { name: name.into(), kind: DimensionKind::Continuous { lo, hi } }
    }

    pub fn discrete(name: impl Into<String>, levels: impl IntoIterator<Item = f64>) -> Self {
        Dimension { name: name.into(), kind: DimensionKind::Discrete { levels: levels.into_iter().collect() } }
    }

    /// Integer levels `lo..=hi`.
    pub fn integer(name: impl Into<String>, lo: i64, hi: i64) -> Self {
        Self::discrete(name, (lo..=hi).map(|v| v as f64))
    }

    /// Numeric range `(min, max)` used for normalization.
    pub fn bounds(&self) -> (f64, f64) {
        match &self.kind {
            DimensionKind::Continuous { lo, hi } => (*lo, *hi),
            DimensionKind::Discrete { levels } => {
                let lo = levels.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = levels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            }
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        match &self.kind {
            DimensionKind::Continuous { lo, hi } => value >= *lo && value <= *hi,
            DimensionKind::Discrete { levels } => levels.iter().any(|l| *l == value),
        }
    }

    fn validate(&self) -> Result<()> {
        match &self.kind {
            DimensionKind::Continuous { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::InvalidSpace(format!(
                        "dimension '{}' needs finite bounds with lo < hi, got [{lo}, {hi}]",
                        self.name
                    )));
                }
            }
            DimensionKind::Discrete { levels } => {
                if levels.iter().any(|l| !l.is_finite()) {
                    return Err(Error::InvalidSpace(format!("dimension '{}' has a non-finite level", self.name)));
                }
                let distinct: HashSet<u64> = levels.iter().map(|l| l.to_bits()).collect();
                if distinct.len() < 2 {
                    return Err(Error::InvalidSpace(format!(
                        "dimension '{}' needs at least two distinct levels",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// An ordered list of named dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Dimension>", into = "Vec<Dimension>")]
pub struct FeatureSpace {
    dims: Vec<Dimension>,
    lo: Vec<f64>,
    span: Vec<f64>,
}

impl TryFrom<Vec<Dimension>> for FeatureSpace {
    type Error = Error;

    fn try_from(dims: Vec<Dimension>) -> Result<Self> {
        FeatureSpace::new(dims)
    }
}

impl From<FeatureSpace> for Vec<Dimension> {
    fn from(space: FeatureSpace) -> Self {
        space.dims
    }
}

impl FeatureSpace {
    pub fn new(dims: Vec<Dimension>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidSpace("at least one dimension is required".into()));
        }
        let mut names = HashSet::new();
        for d in &dims {
            d.validate()?;
            if !names.insert(d.name.as_str()) {
                return Err(Error::InvalidSpace(format!("duplicate dimension name '{}'", d.name)));
            }
        }
        let (lo, span) = dims
            .iter()
            .map(|d| {
                let (lo, hi) = d.bounds();
                (lo, hi - lo)
            })
            .unzip();
        Ok(FeatureSpace { dims, lo, span })
    }

    pub fn dims(&self) -> &[Dimension] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.dims.iter().position(|d| d.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.dims.iter().map(|d| d.name.as_str())
    }

    /// Checks that `values` is a point of this space.
    pub fn check(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.dims.len() {
            return Err(Error::InvalidConfig(format!(
                "expected {} coordinates, got {}",
                self.dims.len(),
                values.len()
            )));
        }
        for (d, v) in self.dims.iter().zip(values) {
            if !d.contains(*v) {
                return Err(Error::InvalidConfig(format!("value {v} out of bounds for dimension '{}'", d.name)));
            }
        }
        Ok(())
    }

    /// Affine map of each coordinate onto `[0, 1]`.
    pub fn normalize(&self, config: &Config) -> Result<Vec<f64>> {
        self.check(config.values())?;
        Ok(self.normalize_unchecked(config.values()))
    }

    pub(crate) fn normalize_unchecked(&self, values: &[f64]) -> Vec<f64> {
        values.iter().zip(self.lo.iter().zip(&self.span)).map(|(v, (lo, span))| (v - lo) / span).collect()
    }

    pub(crate) fn denormalize_coord(&self, dim: usize, unit: f64) -> f64 {
        self.lo[dim] + unit * self.span[dim]
    }

    /// Euclidean distance between normalized points, scaled by the
    /// unit-hypercube diagonal so the result lies in `[0, 1]`.
    pub fn distance(&self, a: &Config, b: &Config) -> Result<f64> {
        let na = self.normalize(a)?;
        let nb = self.normalize(b)?;
        Ok(unit_distance(&na, &nb))
    }
}

/// Distance between two already-normalized points.
pub(crate) fn unit_distance(a: &[f64], b: &[f64]) -> f64 {
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (sq / a.len() as f64).sqrt()
}

/// A point of a feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Config(Vec<f64>);

impl Config {
    pub fn new(space: &FeatureSpace, values: Vec<f64>) -> Result<Self> {
        space.check(&values)?;
        Ok(Config(values))
    }

    /// Builds a config without bounds checking; callers guarantee validity.
    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        Config(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, dim: usize) -> f64 {
        self.0[dim]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(lo: f64, hi: f64) -> FeatureSpace {
        FeatureSpace::new(vec![Dimension::continuous("x", lo, hi)]).unwrap()
    }

    fn cfg(space: &FeatureSpace, v: &[f64]) -> Config {
        Config::new(space, v.to_vec()).unwrap()
    }

    #[test]
    fn normalize_bounds() {
        let s = line(0.0, 10.0);
        assert_eq!(s.normalize(&cfg(&s, &[0.0])).unwrap(), vec![0.0]);
        assert_eq!(s.normalize(&cfg(&s, &[10.0])).unwrap(), vec![1.0]);
    }

    #[test]
    fn normalize_two_dims() {
        let s = FeatureSpace::new(vec![Dimension::continuous("a", 0.0, 10.0), Dimension::continuous("b", 0.0, 4.0)])
            .unwrap();
        assert_eq!(s.normalize(&cfg(&s, &[5.0, 1.0])).unwrap(), vec![0.5, 0.25]);
    }

    #[test]
    fn normalize_rejects_out_of_bounds() {
        let s = line(0.0, 10.0);
        let bad = Config::from_raw(vec![11.0]);
        assert!(matches!(s.normalize(&bad), Err(Error::InvalidConfig(_))));
        assert!(matches!(Config::new(&s, vec![-1.0]), Err(Error::InvalidConfig(_))));
        assert!(matches!(Config::new(&s, vec![1.0, 2.0]), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn distance_examples() {
        let s = line(0.0, 10.0);
        let a = cfg(&s, &[3.0]);
        assert_eq!(s.distance(&a, &a).unwrap(), 0.0);
        assert!((s.distance(&a, &cfg(&s, &[7.0])).unwrap() - 0.4).abs() < 1e-15);

        let sq = FeatureSpace::new(vec![Dimension::continuous("a", 0.0, 1.0), Dimension::continuous("b", 0.0, 1.0)])
            .unwrap();
        let d = sq.distance(&cfg(&sq, &[0.0, 0.0]), &cfg(&sq, &[1.0, 1.0])).unwrap();
        assert!((d - 1.0).abs() < 1e-15);
    }

    #[test]
    fn discrete_dimensions_normalize_by_level_range() {
        let s = FeatureSpace::new(vec![Dimension::discrete("b", [1.0, 2.0, 4.0, 8.0])]).unwrap();
        assert_eq!(s.normalize(&cfg(&s, &[4.0])).unwrap(), vec![3.0 / 7.0]);
        assert!(Config::new(&s, vec![3.0]).is_err());
    }

    #[test]
    fn invalid_spaces() {
        assert!(FeatureSpace::new(vec![]).is_err());
        assert!(FeatureSpace::new(vec![Dimension::continuous("x", 1.0, 1.0)]).is_err());
        assert!(FeatureSpace::new(vec![Dimension::discrete("x", [2.0, 2.0])]).is_err());
        assert!(FeatureSpace::new(vec![Dimension::continuous("x", 0.0, 1.0), Dimension::continuous("x", 0.0, 2.0)])
            .is_err());
    }

    #[test]
    fn serde_round_trip_revalidates() {
        let s = FeatureSpace::new(vec![Dimension::continuous("x", 0.0, 1.0), Dimension::integer("b", 1, 3)]).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        let back: FeatureSpace = serde_json::from_str(&json).unwrap();
        assert_eq!(s, back);
        assert!(serde_json::from_str::<FeatureSpace>("[]").is_err());
    }
}
