//! Summaries of a posterior linkage trace: match probabilities, most probable
//! maximal matching sets, population size and subgroup counts.

mod confusion;
mod coref;
mod dot;
mod mpmms;
mod report;

pub use confusion::{confusion_matrix, file_patterns, pattern_label, ConfusionMatrix};
pub use coref::{coreference_matrix, CoreferenceMatrix};
pub use dot::{to_dot, DotOptions};
pub use mpmms::{shared_mpmms_estimate, LinkageEstimate, MatchingSet, MpmmsTable};
pub use report::{build_report, MpmmsRow, PairQuery, Report, ReportOptions, SubgroupRow};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::data::{FileLayout, RecordId};
use crate::error::{Error, Result};
use crate::model::LinkageMode;
use crate::sampler::PosteriorSampleSet;

/// Fraction of stored draws in which `a` and `b` share a latent.
pub fn pairwise_match_prob(samples: &PosteriorSampleSet, a: RecordId, b: RecordId) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let hits = samples.lambdas().filter(|l| l[a] == l[b]).count();
    hits as f64 / samples.len() as f64
}

/// Groups of record ids sharing a label, ordered by label.
pub(crate) fn clusters_of(lambda: &[u32]) -> Vec<Vec<RecordId>> {
    let k = lambda.iter().max().map_or(0, |&m| m as usize + 1);
    let mut out = vec![Vec::new(); k];
    for (r, &c) in lambda.iter().enumerate() {
        out[c as usize].push(r);
    }
    out.retain(|c| !c.is_empty());
    out
}

/// Fraction of draws in which `candidate` is exactly the record set of one latent.
pub fn mms_probability(samples: &PosteriorSampleSet, candidate: &[RecordId]) -> f64 {
    if samples.is_empty() || candidate.is_empty() {
        return 0.0;
    }
    let set: BTreeSet<RecordId> = candidate.iter().copied().collect();
    let first = *set.iter().next().unwrap();
    let hits = samples
        .lambdas()
        .filter(|l| {
            let c = l[first];
            set.iter().all(|&r| l[r] == c) && l.iter().filter(|&&x| x == c).count() == set.len()
        })
        .count();
    hits as f64 / samples.len() as f64
}

/// Mean number of latents whose records span exactly `files` (0-based).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternMean {
    pub pattern: String,
    pub files: Vec<usize>,
    pub mean: f64,
}

/// Average number of latents per file-presence pattern, and per number of files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KwayProfile {
    /// Observed patterns, ordered by size and then file list.
    pub by_pattern: Vec<PatternMean>,
    /// `by_way[w - 1]` is the mean number of latents found in exactly `w` files.
    pub by_way: Vec<f64>,
}

pub fn kway_match_profile(samples: &PosteriorSampleSet) -> KwayProfile {
    let layout = FileLayout::new(&samples.meta.file_sizes);
    let k = layout.k();
    let mut by_pattern: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    let mut by_way = vec![0.0; k];
    let s = samples.len().max(1) as f64;
    for lambda in samples.lambdas() {
        for cluster in clusters_of(lambda) {
            let pattern = pattern_of(&cluster, &layout);
            by_way[pattern.len() - 1] += 1.0 / s;
            *by_pattern.entry(pattern).or_default() += 1.0 / s;
        }
    }
    let mut by_pattern: Vec<PatternMean> = by_pattern
        .into_iter()
        .map(|(files, mean)| PatternMean { pattern: pattern_label(&files), files, mean })
        .collect();
    by_pattern.sort_by(|a, b| a.files.len().cmp(&b.files.len()).then_with(|| a.files.cmp(&b.files)));
    KwayProfile { by_pattern, by_way }
}

impl KwayProfile {
    pub fn mean_for(&self, files: &[usize]) -> f64 {
        self.by_pattern.iter().find(|p| p.files == files).map_or(0.0, |p| p.mean)
    }
}

pub(crate) fn pattern_of(records: &[RecordId], layout: &FileLayout) -> Vec<usize> {
    let mut files: Vec<usize> = records.iter().map(|&r| layout.file_of(r)).collect();
    files.sort_unstable();
    files.dedup();
    files
}

/// Posterior of the number of distinct latents `N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationSummary {
    /// `N -> posterior probability`
    pub distribution: BTreeMap<usize, f64>,
    pub mean: f64,
    pub median: f64,
    /// Most frequent value; the smallest on ties.
    pub mode: usize,
    /// Sample standard deviation (divisor `S - 1`).
    pub sd: f64,
}

pub fn population_size_posterior(samples: &PosteriorSampleSet) -> Result<PopulationSummary> {
    let sizes: Vec<usize> = samples.snapshots.iter().map(|s| s.cluster_count()).collect();
    population_summary(&sizes)
}

pub fn population_summary(sizes: &[usize]) -> Result<PopulationSummary> {
    if sizes.is_empty() {
        return Err(Error::Contract("no posterior draws to summarize".into()));
    }
    let s = sizes.len() as f64;
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &n in sizes {
        *counts.entry(n).or_default() += 1;
    }
    let mean = sizes.iter().sum::<usize>() as f64 / s;
    let sd = if sizes.len() > 1 {
        (sizes.iter().map(|&n| (n as f64 - mean).powi(2)).sum::<f64>() / (s - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = sizes.to_vec();
    sorted.sort_unstable();
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 {
        sorted[mid] as f64
    } else {
        (sorted[mid - 1] + sorted[mid]) as f64 / 2.0
    };
    let top = *counts.values().max().unwrap();
    let mode = *counts.iter().find(|(_, &c)| c == top).unwrap().0;
    Ok(PopulationSummary {
        distribution: counts.into_iter().map(|(n, c)| (n, c as f64 / s)).collect(),
        mean,
        median,
        mode,
        sd,
    })
}

/// Mean number of latents with records in every file of `files_in` and in
/// none of `files_out`. Without de-duplication membership means exactly one
/// record; with it, at least one.
pub fn subgroup_counts(samples: &PosteriorSampleSet, files_in: &[usize], files_out: &[usize]) -> Result<f64> {
    let layout = FileLayout::new(&samples.meta.file_sizes);
    let k = layout.k();
    if let Some(f) = files_in.iter().chain(files_out).find(|&&f| f >= k) {
        return Err(Error::Contract(format!("file {} out of range (k = {k})", f + 1)));
    }
    if files_in.iter().any(|f| files_out.contains(f)) {
        return Err(Error::Contract("a file is both required and excluded".into()));
    }
    if samples.is_empty() {
        return Ok(0.0);
    }
    let exact = samples.meta.mode == LinkageMode::Smere;
    let mut total = 0usize;
    for lambda in samples.lambdas() {
        for cluster in clusters_of(lambda) {
            let mut per_file = vec![0usize; k];
            for &r in &cluster {
                per_file[layout.file_of(r)] += 1;
            }
            let inside = files_in.iter().all(|&f| if exact { per_file[f] == 1 } else { per_file[f] >= 1 });
            let outside = files_out.iter().all(|&f| per_file[f] == 0);
            total += (inside && outside) as usize;
        }
    }
    Ok(total as f64 / samples.len() as f64)
}
