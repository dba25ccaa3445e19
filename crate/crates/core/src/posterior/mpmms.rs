use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::RecordId;
use crate::sampler::PosteriorSampleSet;

use super::clusters_of;

/// A set of records with the fraction of draws in which it is exactly one
/// latent's record set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchingSet {
    pub members: Vec<RecordId>,
    pub probability: f64,
}

/// Observed clusters with their frequencies, and each record's most probable
/// maximal matching set among them.
#[derive(Clone, Debug)]
pub struct MpmmsTable {
    draws: usize,
    clusters: Vec<(Vec<RecordId>, usize)>,
    index: HashMap<Vec<RecordId>, usize>,
    best: Vec<usize>,
}

impl MpmmsTable {
    pub fn new(samples: &PosteriorSampleSet) -> Self {
        let n = samples.n_records();
        let mut index: HashMap<Vec<RecordId>, usize> = HashMap::new();
        let mut clusters: Vec<(Vec<RecordId>, usize)> = Vec::new();
        for lambda in samples.lambdas() {
            for cluster in clusters_of(lambda) {
                match index.get(&cluster) {
                    Some(&i) => clusters[i].1 += 1,
                    None => {
                        index.insert(cluster.clone(), clusters.len());
                        clusters.push((cluster, 1));
                    }
                }
            }
        }
        let mut best = vec![usize::MAX; n];
        for (i, (members, _)) in clusters.iter().enumerate() {
            for &r in members {
                if best[r] == usize::MAX || better(&clusters[i], &clusters[best[r]]) {
                    best[r] = i;
                }
            }
        }
        Self {
            draws: samples.len(),
            clusters,
            index,
            best,
        }
    }

    pub fn draws(&self) -> usize {
        self.draws
    }

    fn set(&self, i: usize) -> MatchingSet {
        MatchingSet {
            members: self.clusters[i].0.clone(),
            probability: self.clusters[i].1 as f64 / self.draws as f64,
        }
    }

    /// The most probable maximal matching set of `record`: the most frequent
    /// observed cluster containing it, ties going to the larger set and then
    /// the lexicographically smaller member list.
    pub fn most_probable(&self, record: RecordId) -> MatchingSet {
        match self.best.get(record) {
            Some(&i) if i != usize::MAX => self.set(i),
            _ => MatchingSet {
                members: vec![record],
                probability: 0.0,
            },
        }
    }

    /// Observed clusters, most frequent first.
    pub fn observed(&self) -> Vec<MatchingSet> {
        let mut order: Vec<usize> = (0..self.clusters.len()).collect();
        order.sort_by(|&a, &b| {
            if better(&self.clusters[a], &self.clusters[b]) {
                Ordering::Less
            } else if better(&self.clusters[b], &self.clusters[a]) {
                Ordering::Greater
            } else {
                Ordering::Equal
            }
        });
        order.into_iter().map(|i| self.set(i)).collect()
    }

    fn frequency(&self, members: &[RecordId]) -> f64 {
        self.index
            .get(members)
            .map_or(0.0, |&i| self.clusters[i].1 as f64 / self.draws as f64)
    }

    /// Link records that share their most probable maximal matching set and,
    /// when `threshold` is given, only if that set's probability reaches it.
    /// Everything else becomes a singleton.
    pub fn shared_estimate(&self, threshold: Option<f64>) -> LinkageEstimate {
        let n = self.best.len();
        let mut label = vec![u32::MAX; n];
        let mut clusters = Vec::new();
        for r in 0..n {
            if label[r] != u32::MAX {
                continue;
            }
            let i = self.best[r];
            let shared = i != usize::MAX && {
                let (members, count) = &self.clusters[i];
                members.iter().all(|&q| self.best[q] == i)
                    && threshold.is_none_or(|v| *count as f64 / self.draws as f64 >= v)
            };
            let set = if shared {
                self.set(i)
            } else {
                MatchingSet {
                    members: vec![r],
                    probability: self.frequency(&[r]),
                }
            };
            for &q in &set.members {
                label[q] = clusters.len() as u32;
            }
            clusters.push(set);
        }
        LinkageEstimate {
            clusters,
            labels: label,
            threshold,
        }
    }
}

fn better(a: &(Vec<RecordId>, usize), b: &(Vec<RecordId>, usize)) -> bool {
    match a.1.cmp(&b.1) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => match a.0.len().cmp(&b.0.len()) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => a.0 < b.0,
        },
    }
}

/// A transitive point estimate: clusters partition the records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkageEstimate {
    pub clusters: Vec<MatchingSet>,
    /// Cluster index of every record.
    pub labels: Vec<u32>,
    pub threshold: Option<f64>,
}

impl LinkageEstimate {
    pub fn n_records(&self) -> usize {
        self.labels.len()
    }

    pub fn linked(&self, a: RecordId, b: RecordId) -> bool {
        self.labels[a] == self.labels[b]
    }

    /// Unordered linked pairs `(a, b)` with `a < b`.
    pub fn pairs(&self) -> Vec<(RecordId, RecordId)> {
        let mut out = Vec::new();
        for c in &self.clusters {
            for (i, &a) in c.members.iter().enumerate() {
                for &b in &c.members[i + 1..] {
                    out.push((a, b));
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// True when the clusters are disjoint, cover every record and agree with `labels`.
    pub fn is_partition(&self) -> bool {
        let mut seen = vec![false; self.labels.len()];
        for (i, c) in self.clusters.iter().enumerate() {
            if c.members.is_empty() {
                return false;
            }
            for &r in &c.members {
                if r >= seen.len() || seen[r] || self.labels[r] != i as u32 {
                    return false;
                }
                seen[r] = true;
            }
        }
        seen.into_iter().all(|s| s)
    }
}

pub fn shared_mpmms_estimate(samples: &PosteriorSampleSet, threshold: Option<f64>) -> LinkageEstimate {
    MpmmsTable::new(samples).shared_estimate(threshold)
}
