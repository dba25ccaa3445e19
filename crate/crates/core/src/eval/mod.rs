//! Ground-truth evaluation: link error rates, simple baselines, synthetic data
//! and the distortion study.

mod baselines;
mod roc;
mod simulate;
mod study;

pub use baselines::{exact_match_baseline, near_twins_baseline};
pub use roc::{roc_sweep, RocPoint};
pub use simulate::{simulate_dataset, PatternWeight, SimulatedData, SimulationSpec};
pub use study::{distortion_study, StudyConfig, StudyRow};

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::data::{GroundTruth, RecordId};
use crate::error::{Error, Result};

/// Estimated links, either as a partition of records or as raw pairs
/// (which need not be transitive).
#[derive(Clone, Debug, PartialEq)]
pub enum LinkSet {
    Partition(Vec<u32>),
    Pairs(Vec<(RecordId, RecordId)>),
}

/// Link counts over unordered record pairs. Both rates are relative to the
/// number of true links, so the false positive rate can exceed one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub true_links: u64,
    pub false_links: u64,
    pub missing_links: u64,
    pub truth_links: u64,
    pub fnr: f64,
    pub fpr: f64,
}

impl ErrorReport {
    pub fn from_counts(true_links: u64, false_links: u64, missing_links: u64) -> Self {
        let truth_links = true_links + missing_links;
        let rate = |x: u64| if truth_links == 0 { 0.0 } else { x as f64 / truth_links as f64 };
        Self {
            true_links,
            false_links,
            missing_links,
            truth_links,
            fnr: rate(missing_links),
            fpr: rate(false_links),
        }
    }
}

fn check_truth(truth: &GroundTruth, n: usize) -> Result<()> {
    if truth.len() != n {
        return Err(Error::Dimension(format!("truth covers {} records, estimate {n}", truth.len())));
    }
    if truth.missing() > 0 {
        return Err(Error::Contract(format!("{} records have no true id", truth.missing())));
    }
    Ok(())
}

pub fn error_report(links: &LinkSet, truth: &GroundTruth) -> Result<ErrorReport> {
    let truth_links = truth.link_count();
    let (found, estimated) = match links {
        LinkSet::Partition(labels) => {
            check_truth(truth, labels.len())?;
            let mut groups: HashMap<(u32, u32), u64> = HashMap::new();
            let mut sizes: HashMap<u32, u64> = HashMap::new();
            for (r, &c) in labels.iter().enumerate() {
                *groups.entry((c, truth.id(r).unwrap())).or_default() += 1;
                *sizes.entry(c).or_default() += 1;
            }
            let pairs = |c: &u64| c * c.saturating_sub(1) / 2;
            (groups.values().map(pairs).sum::<u64>(), sizes.values().map(pairs).sum::<u64>())
        }
        LinkSet::Pairs(pairs) => {
            let n = truth.len();
            check_truth(truth, n)?;
            let mut seen = HashSet::new();
            let mut found = 0;
            for &(a, b) in pairs {
                if a >= n || b >= n {
                    return Err(Error::Dimension(format!("pair ({a}, {b}) outside {n} records")));
                }
                if a == b || !seen.insert((a.min(b), a.max(b))) {
                    continue;
                }
                found += truth.same(a, b) as u64;
            }
            (found, seen.len() as u64)
        }
    };
    Ok(ErrorReport::from_counts(found, estimated - found, truth_links - found))
}

/// Fraction of true individuals whose records form exactly one estimated cluster.
pub fn matched_fraction(labels: &[u32], truth: &GroundTruth) -> Result<f64> {
    check_truth(truth, labels.len())?;
    let mut sizes: HashMap<u32, usize> = HashMap::new();
    for &c in labels {
        *sizes.entry(c).or_default() += 1;
    }
    let clusters = truth.clusters();
    if clusters.is_empty() {
        return Ok(0.0);
    }
    let matched = clusters
        .iter()
        .filter(|c| {
            let l = labels[c[0]];
            c.iter().all(|&r| labels[r] == l) && sizes[&l] == c.len()
        })
        .count();
    Ok(matched as f64 / clusters.len() as f64)
}
