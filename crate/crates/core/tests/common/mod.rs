//! Random (ST, D) instances for the update policies and brute-force checks
//! of each policy's contract. Shared by the property suite and the
//! acceptance harness.

#![allow(dead_code)]

use std::sync::Arc;

use graybox::dataset::{Dataset, Provenance, Sample};
use graybox::space::{Config, Dimension, FeatureSpace};
use graybox::update::{merge, rnn, rnr, rnr2, set_weight};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub const D_WEIGHT: f64 = 7.0;

#[derive(Debug, Clone)]
pub struct Case {
    pub space: Arc<FeatureSpace>,
    pub st: Dataset,
    pub d: Dataset,
    pub cutoff: f64,
}

fn coord(discrete: bool, idx: u8) -> f64 {
    // coarse grids so that distance ties and exact collisions occur
    if discrete {
        [1.0, 2.0, 4.0, 8.0][idx as usize % 4]
    } else {
        idx as f64 * 0.5
    }
}

pub fn build(kinds: &[bool], st: &[(Vec<u8>, bool, u8)], d: &[Vec<u8>], cutoff: f64) -> Case {
    let dims = kinds
        .iter()
        .enumerate()
        .map(|(i, &discrete)| {
            if discrete {
                Dimension::discrete(format!("d{i}"), [1.0, 2.0, 4.0, 8.0])
            } else {
                Dimension::continuous(format!("c{i}"), 0.0, 10.0)
            }
        })
        .collect();
    let space = Arc::new(FeatureSpace::new(dims).unwrap());
    let config = |idx: &[u8]| Config::new(&space, kinds.iter().zip(idx).map(|(&k, &v)| coord(k, v)).collect()).unwrap();
    let st_samples = st
        .iter()
        .map(|(idx, real, y)| {
            let prov = if *real { Provenance::Real } else { Provenance::Synthetic };
            Sample::new(config(idx), *y as f64, 1.0, prov).unwrap()
        })
        .collect();
    // distinct targets identify each measurement
    let d_samples = d.iter().enumerate().map(|(j, idx)| Sample::real(config(idx), 1000.0 + j as f64).unwrap()).collect();
    Case {
        st: Dataset::new(space.clone(), st_samples).unwrap(),
        d: set_weight(&Dataset::new(space.clone(), d_samples).unwrap(), D_WEIGHT).unwrap(),
        space,
        cutoff,
    }
}

/// Instances with 1 to 3 dimensions, `min_st..25` rows in ST and up to 11
/// measurements.
pub fn case(min_st: usize) -> impl Strategy<Value = Case> {
    (1usize..=3)
        .prop_flat_map(move |k| {
            (
                prop::collection::vec(any::<bool>(), k),
                prop::collection::vec((prop::collection::vec(0u8..=20, k), any::<bool>(), 0u8..50), min_st..25),
                prop::collection::vec(prop::collection::vec(0u8..=20, k), 0..12),
                prop_oneof![Just(0.0), Just(1.0), 0.0f64..=1.0, 0.0f64..0.2],
            )
        })
        .prop_map(|(kinds, st, d, c)| build(&kinds, &st, &d, c))
}

fn dist(space: &FeatureSpace, a: &Sample, b: &Sample) -> f64 {
    space.distance(&a.config, &b.config).unwrap()
}

/// Index and distance of the element of `pool` nearest to `q`, first on ties.
fn nearest(space: &FeatureSpace, pool: &[Sample], q: &Sample) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in pool.iter().enumerate() {
        let dd = dist(space, p, q);
        if best.is_none_or(|(_, b)| dd < b) {
            best = Some((i, dd));
        }
    }
    best
}

pub fn check_merge(c: &Case) -> Result<(), TestCaseError> {
    let out = merge(&c.st, &c.d).unwrap();
    prop_assert_eq!(out.len(), c.st.len() + c.d.len());
    prop_assert_eq!(&out.samples()[..c.st.len()], c.st.samples());
    prop_assert_eq!(&out.samples()[c.st.len()..], c.d.samples());
    prop_assert_eq!(out.n_synthetic(), c.st.n_synthetic());
    Ok(())
}

/// Requires a non-empty ST.
pub fn check_rnn(c: &Case) -> Result<(), TestCaseError> {
    let out = rnn(&c.st, &c.d).unwrap();
    prop_assert_eq!(out.len(), c.st.len());

    // ids: ST rows are 0..n, D rows are n..n+m
    let n = c.st.len();
    let mut cur: Vec<(Sample, usize)> = c.st.iter().cloned().zip(0..).collect();
    let mut evicted_by = vec![None; n + c.d.len()];
    for (j, s) in c.d.iter().enumerate() {
        let pool: Vec<Sample> = cur.iter().map(|(s, _)| s.clone()).collect();
        let (i, _) = nearest(&c.space, &pool, s).unwrap();
        evicted_by[cur[i].1] = Some(j);
        cur[i] = (s.clone(), n + j);
    }
    let expected: Vec<Sample> = cur.iter().map(|(s, _)| s.clone()).collect();
    prop_assert_eq!(out.samples(), &expected[..]);

    // every measurement is present unless a later measurement replaced it
    for j in 0..c.d.len() {
        let present = cur.iter().any(|(_, id)| *id == n + j);
        match evicted_by[n + j] {
            None => prop_assert!(present),
            Some(k) => prop_assert!(!present && k > j),
        }
    }
    if let Some(last) = c.d.samples().last() {
        prop_assert!(out.samples().contains(last));
    }
    Ok(())
}

pub fn check_rnr(c: &Case) -> Result<(), TestCaseError> {
    let out = rnr(&c.st, &c.d, c.cutoff).unwrap();
    let near_d = |s: &Sample| c.d.iter().any(|r| dist(&c.space, s, r) <= c.cutoff);

    // real samples are immortal and every measurement appears once
    for s in c.st.iter().filter(|s| !s.is_synthetic()) {
        let before = c.st.iter().filter(|t| *t == s).count();
        prop_assert_eq!(out.iter().filter(|t| *t == s).count(), before);
    }
    for r in &c.d {
        prop_assert_eq!(out.iter().filter(|t| t.target == r.target && !t.is_synthetic() && t.weight == D_WEIGHT).count(), 1);
    }
    // evicted: exactly the synthetic samples within c of some measurement
    let kept: Vec<&Sample> = c.st.iter().filter(|s| !(s.is_synthetic() && near_d(s))).collect();
    let evicted = c.st.len() - kept.len();
    prop_assert_eq!(out.len(), c.st.len() - evicted + c.d.len());
    let expected: Vec<Sample> = kept.into_iter().cloned().chain(c.d.iter().cloned()).collect();
    prop_assert_eq!(out.samples(), &expected[..]);
    Ok(())
}

/// Requires a non-empty D.
pub fn check_rnr2(c: &Case) -> Result<(), TestCaseError> {
    let out = rnr2(&c.st, &c.d, c.cutoff).unwrap();
    let mut matched = vec![false; c.d.len()];
    for (i, s) in c.st.iter().enumerate() {
        let o = &out.samples()[i];
        prop_assert_eq!(&o.config, &s.config);
        if !s.is_synthetic() {
            prop_assert_eq!(o, s);
            continue;
        }
        let (r, dd) = nearest(&c.space, c.d.samples(), s).unwrap();
        if dd <= c.cutoff {
            let real = &c.d.samples()[r];
            prop_assert_eq!(o.target, real.target);
            prop_assert_eq!(o.weight, real.weight);
            prop_assert_eq!(o.provenance, Provenance::Real);
            matched[r] = true;
        } else {
            prop_assert_eq!(o, s);
        }
    }
    let unmatched: Vec<Sample> = c.d.iter().zip(&matched).filter(|(_, m)| !**m).map(|(s, _)| s.clone()).collect();
    prop_assert_eq!(out.len(), c.st.len() + unmatched.len());
    prop_assert_eq!(&out.samples()[c.st.len()..], &unmatched[..]);
    Ok(())
}
