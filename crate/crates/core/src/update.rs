//! Knowledge-base update policies.
//!
//! Each policy takes the current training set `st` and a batch `d` of newly
//! collected samples and returns the next training set. Inputs are never
//! modified.
//!
//! * **Merge** appends `d`.
//! * **RNN** processes `d` in order; each sample replaces, in place, its
//!   nearest neighbour in the current set, whatever that neighbour's
//!   provenance. Samples inserted earlier in the same batch can be evicted.
//! * **RNR** processes `d` in order; each sample evicts every synthetic
//!   sample within distance `c` and is then appended.
//! * **RNR2** visits the synthetic samples of `st`; a synthetic sample whose
//!   nearest sample in `d` lies within `c` takes that sample's target and
//!   weight and becomes real, keeping its own configuration. Samples of `d`
//!   that matched nothing are appended.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Provenance, Sample};
use crate::error::{Error, Result};
use crate::space::unit_distance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Merge,
    Rnn,
    Rnr,
    Rnr2,
}

impl Policy {
    pub const ALL: [Policy; 4] = [Policy::Merge, Policy::Rnn, Policy::Rnr, Policy::Rnr2];

    pub fn uses_cutoff(self) -> bool {
        matches!(self, Policy::Rnr | Policy::Rnr2)
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Merge => "merge",
            Policy::Rnn => "rnn",
            Policy::Rnr => "rnr",
            Policy::Rnr2 => "rnr2",
        })
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "merge" => Ok(Policy::Merge),
            "rnn" => Ok(Policy::Rnn),
            "rnr" => Ok(Policy::Rnr),
            "rnr2" => Ok(Policy::Rnr2),
            other => Err(Error::InvalidArgument(format!("unknown update policy '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpdateConfig {
    pub policy: Policy,
    pub weight: f64,
    #[serde(default)]
    pub cutoff: f64,
}

impl UpdateConfig {
    pub fn new(policy: Policy, weight: f64, cutoff: f64) -> Result<Self> {
        let u = UpdateConfig { policy, weight, cutoff };
        u.validate()?;
        Ok(u)
    }

    pub fn validate(&self) -> Result<()> {
        check_weight(self.weight)?;
        check_cutoff(self.cutoff)
    }
}

fn check_weight(w: f64) -> Result<()> {
    if w.is_finite() && w > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidWeight(w))
    }
}

fn check_cutoff(c: f64) -> Result<()> {
    if (0.0..=1.0).contains(&c) {
        Ok(())
    } else {
        Err(Error::InvalidCutoff(c))
    }
}

fn check_spaces(st: &Dataset, d: &Dataset) -> Result<()> {
    if st.same_space(d) {
        Ok(())
    } else {
        Err(Error::SpaceMismatch)
    }
}

/// Incorporates `d` into `st`: weights the batch, then applies the policy.
pub fn update_kb(st: &Dataset, d: &Dataset, cfg: &UpdateConfig) -> Result<Dataset> {
    cfg.validate()?;
    let d = set_weight(d, cfg.weight)?;
    match cfg.policy {
        Policy::Merge => merge(st, &d),
        Policy::Rnn => rnn(st, &d),
        Policy::Rnr => rnr(st, &d, cfg.cutoff),
        Policy::Rnr2 => rnr2(st, &d, cfg.cutoff),
    }
}

pub fn set_weight(d: &Dataset, w: f64) -> Result<Dataset> {
    check_weight(w)?;
    let samples = d.iter().map(|s| Sample { weight: w, ..s.clone() }).collect();
    Ok(Dataset::from_trusted(d.space().clone(), samples))
}

pub fn merge(st: &Dataset, d: &Dataset) -> Result<Dataset> {
    check_spaces(st, d)?;
    let samples = st.iter().chain(d.iter()).cloned().collect();
    Ok(Dataset::from_trusted(st.space().clone(), samples))
}

fn normalized(d: &Dataset) -> Vec<Vec<f64>> {
    d.iter().map(|s| d.space().normalize_unchecked(s.config.values())).collect()
}

/// Index of the point nearest to `q`; ties go to the lowest index.
fn nearest<'a>(points: impl Iterator<Item = &'a Vec<f64>>, q: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in points.enumerate() {
        let dist = unit_distance(p, q);
        if best.is_none_or(|(_, b)| dist < b) {
            best = Some((i, dist));
        }
    }
    best
}

pub fn rnn(st: &Dataset, d: &Dataset) -> Result<Dataset> {
    check_spaces(st, d)?;
    if st.is_empty() {
        return Err(Error::EmptyKnowledgeBase);
    }
    let mut samples = st.samples().to_vec();
    let mut points = normalized(st);
    for (s, p) in d.iter().zip(normalized(d)) {
        let (i, _) = nearest(points.iter(), &p).expect("knowledge base is non-empty");
        samples[i] = s.clone();
        points[i] = p;
    }
    Ok(Dataset::from_trusted(st.space().clone(), samples))
}

pub fn rnr(st: &Dataset, d: &Dataset, cutoff: f64) -> Result<Dataset> {
    check_spaces(st, d)?;
    check_cutoff(cutoff)?;
    let mut entries: Vec<(Sample, Vec<f64>, bool)> =
        st.iter().cloned().zip(normalized(st)).map(|(s, p)| (s, p, true)).collect();
    for (s, p) in d.iter().zip(normalized(d)) {
        for (existing, q, alive) in entries.iter_mut() {
            if *alive && existing.is_synthetic() && unit_distance(q, &p) <= cutoff {
                *alive = false;
            }
        }
        entries.push((s.clone(), p, true));
    }
    let samples = entries.into_iter().filter_map(|(s, _, alive)| alive.then_some(s)).collect();
    Ok(Dataset::from_trusted(st.space().clone(), samples))
}

pub fn rnr2(st: &Dataset, d: &Dataset, cutoff: f64) -> Result<Dataset> {
    check_spaces(st, d)?;
    check_cutoff(cutoff)?;
    let d_points = normalized(d);
    let mut matched = vec![false; d.len()];
    let mut samples = Vec::with_capacity(st.len() + d.len());
    for s in st {
        if !s.is_synthetic() {
            samples.push(s.clone());
            continue;
        }
        let p = st.space().normalize_unchecked(s.config.values());
        match nearest(d_points.iter(), &p) {
            Some((r, dist)) if dist <= cutoff => {
                let real = &d.samples()[r];
                samples.push(Sample {
                    config: s.config.clone(),
                    target: real.target,
                    weight: real.weight,
                    provenance: Provenance::Real,
                });
                matched[r] = true;
            }
            _ => samples.push(s.clone()),
        }
    }
    samples.extend(d.iter().zip(&matched).filter(|(_, m)| !**m).map(|(s, _)| s.clone()));
    Ok(Dataset::from_trusted(st.space().clone(), samples))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::space::{Config, Dimension, FeatureSpace};

    fn line() -> Arc<FeatureSpace> {
        Arc::new(FeatureSpace::new(vec![Dimension::continuous("x", 0.0, 1.0)]).unwrap())
    }

    fn ds(space: &Arc<FeatureSpace>, pts: &[(f64, f64, Provenance)]) -> Dataset {
        let samples = pts
            .iter()
            .map(|&(x, y, p)| Sample::new(Config::new(space, vec![x]).unwrap(), y, 1.0, p).unwrap())
            .collect();
        Dataset::new(space.clone(), samples).unwrap()
    }

    fn xs(d: &Dataset) -> Vec<(f64, Provenance)> {
        d.iter().map(|s| (s.config.get(0), s.provenance)).collect()
    }

    use Provenance::{Real as R, Synthetic as S};

    #[test]
    fn set_weight_cases() {
        let s = line();
        let d = ds(&s, &[(0.1, 1.0, R), (0.2, 2.0, S)]);
        assert_eq!(set_weight(&d, 1.0).unwrap(), d);
        let heavy = set_weight(&d, 100.0).unwrap();
        assert!(heavy.iter().all(|x| x.weight == 100.0));
        assert_eq!(heavy.samples()[1].provenance, S);
        assert!(set_weight(&Dataset::empty(s), 5.0).unwrap().is_empty());
        assert!(matches!(set_weight(&d, 0.0), Err(Error::InvalidWeight(_))));
        assert!(matches!(set_weight(&d, -2.0), Err(Error::InvalidWeight(_))));
    }

    #[test]
    fn merge_cases() {
        let s = line();
        let st = ds(&s, &[(0.1, 1.0, S), (0.2, 1.0, S), (0.3, 1.0, S)]);
        let d = ds(&s, &[(0.1, 5.0, R), (0.9, 1.0, R)]);
        let m = merge(&st, &d).unwrap();
        assert_eq!(m.len(), 5);
        assert_eq!(m.n_synthetic(), 3);
        // contradicting duplicates coexist
        assert_eq!(m.iter().filter(|x| x.config.get(0) == 0.1).count(), 2);
        assert_eq!(merge(&st, &Dataset::empty(s)).unwrap(), st);
    }

    #[test]
    fn merge_space_mismatch() {
        let a = line();
        let b = Arc::new(FeatureSpace::new(vec![Dimension::continuous("y", 0.0, 1.0)]).unwrap());
        let st = ds(&a, &[(0.1, 1.0, S)]);
        let d = ds(&b, &[(0.1, 1.0, R)]);
        assert!(matches!(merge(&st, &d), Err(Error::SpaceMismatch)));
    }

    #[test]
    fn rnn_trace() {
        let s = line();
        let st = ds(&s, &[(0.0, 1.0, S), (1.0, 1.0, S)]);
        let d = ds(&s, &[(0.4, 2.0, R)]);
        assert_eq!(xs(&rnn(&st, &d).unwrap()), vec![(0.4, R), (1.0, S)]);
    }

    #[test]
    fn rnn_real_evicts_real() {
        let s = line();
        let st = ds(&s, &[(0.5, 1.0, S)]);
        let d = ds(&s, &[(0.4, 2.0, R), (0.45, 3.0, R)]);
        assert_eq!(xs(&rnn(&st, &d).unwrap()), vec![(0.45, R)]);
    }

    #[test]
    fn rnn_edge_cases() {
        let s = line();
        let st = ds(&s, &[(0.5, 1.0, S)]);
        assert_eq!(rnn(&st, &Dataset::empty(s.clone())).unwrap(), st);
        let d = ds(&s, &[(0.4, 2.0, R)]);
        assert!(matches!(rnn(&Dataset::empty(s), &d), Err(Error::EmptyKnowledgeBase)));
    }

    #[test]
    fn rnr_trace() {
        let s = line();
        let st = ds(&s, &[(0.0, 1.0, S), (0.1, 1.0, S), (0.2, 1.0, S), (0.9, 1.0, S)]);
        let d = ds(&s, &[(0.15, 2.0, R)]);
        assert_eq!(xs(&rnr(&st, &d, 0.1).unwrap()), vec![(0.0, S), (0.9, S), (0.15, R)]);
    }

    #[test]
    fn rnr_zero_cutoff_only_exact_collisions() {
        let s = line();
        let st = ds(&s, &[(0.2, 1.0, S), (0.3, 1.0, S)]);
        let d = ds(&s, &[(0.3, 2.0, R), (0.7, 2.0, R)]);
        let out = rnr(&st, &d, 0.0).unwrap();
        assert_eq!(xs(&out), vec![(0.2, S), (0.3, R), (0.7, R)]);
        assert!(out.len() >= st.len());
    }

    #[test]
    fn rnr_keeps_real_samples() {
        let s = line();
        let st = ds(&s, &[(0.2, 1.0, R), (0.3, 1.0, S)]);
        let d = ds(&s, &[(0.25, 2.0, R)]);
        assert_eq!(xs(&rnr(&st, &d, 1.0).unwrap()), vec![(0.2, R), (0.25, R)]);
    }

    #[test]
    fn rnr_invalid_cutoff() {
        let s = line();
        let st = ds(&s, &[(0.2, 1.0, S)]);
        assert!(matches!(rnr(&st, &st, 1.5), Err(Error::InvalidCutoff(_))));
        assert!(matches!(rnr2(&st, &st, -0.1), Err(Error::InvalidCutoff(_))));
    }

    #[test]
    fn rnr2_trace() {
        let s = line();
        let st = ds(&s, &[(0.0, 10.0, S), (0.2, 20.0, S)]);
        let d = ds(&s, &[(0.15, 99.0, R)]);
        let out = rnr2(&st, &d, 0.1).unwrap();
        let got: Vec<(f64, f64, Provenance)> = out.iter().map(|x| (x.config.get(0), x.target, x.provenance)).collect();
        assert_eq!(got, vec![(0.0, 10.0, S), (0.2, 99.0, R)]);
    }

    #[test]
    fn rnr2_zero_cutoff_appends() {
        let s = line();
        let st = ds(&s, &[(0.0, 10.0, S), (0.2, 20.0, S)]);
        let d = ds(&s, &[(0.15, 99.0, R), (0.5, 1.0, R)]);
        let out = rnr2(&st, &d, 0.0).unwrap();
        assert_eq!(out.len(), st.len() + d.len());
        assert_eq!(out.n_synthetic(), 2);
    }

    #[test]
    fn rnr2_one_real_updates_several_neighbours() {
        let s = line();
        let st = ds(&s, &[(0.1, 1.0, S), (0.2, 1.0, S), (0.9, 1.0, S)]);
        let d = ds(&s, &[(0.15, 5.0, R)]);
        let out = rnr2(&st, &d, 0.1).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(out.n_real(), 2);
        assert!(out.iter().take(2).all(|x| x.target == 5.0));
    }

    #[test]
    fn update_kb_applies_weight() {
        let s = line();
        let st = ds(&s, &[(0.0, 1.0, S)]);
        let d = ds(&s, &[(0.5, 2.0, R)]);
        let cfg = UpdateConfig::new(Policy::Merge, 100.0, 0.0).unwrap();
        let out = update_kb(&st, &d, &cfg).unwrap();
        assert_eq!(out.samples()[1].weight, 100.0);
        assert_eq!(out.samples()[0].weight, 1.0);
    }

    #[test]
    fn policy_parsing() {
        for p in Policy::ALL {
            assert_eq!(p.to_string().parse::<Policy>().unwrap(), p);
        }
        assert!("rnr3".parse::<Policy>().is_err());
    }
}
