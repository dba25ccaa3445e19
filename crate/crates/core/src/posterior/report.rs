use serde::{Deserialize, Serialize};

use crate::data::{FileLayout, GroundTruth, RecordId};
use crate::error::Result;
use crate::sampler::PosteriorSampleSet;

use super::{
    confusion_matrix, file_patterns, kway_match_profile, pairwise_match_prob, pattern_label,
    population_size_posterior, subgroup_counts, KwayProfile, MpmmsTable, PopulationSummary,
};

#[derive(Clone, Debug, Default)]
pub struct ReportOptions<'a> {
    pub pairs: Vec<(RecordId, RecordId)>,
    /// Threshold for the point estimate.
    pub threshold: Option<f64>,
    /// Number of records listed in the MPMMS table; all when `None`.
    pub mpmms_rows: Option<usize>,
    pub truth: Option<&'a GroundTruth>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairQuery {
    pub a: String,
    pub b: String,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpmmsRow {
    pub record: String,
    pub set: Vec<String>,
    pub probability: f64,
}

/// Mean number of latents present in exactly the files of `pattern`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubgroupRow {
    pub pattern: String,
    pub mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusionReport {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<f64>>,
    pub normalized: Vec<Vec<f64>>,
    pub log_relative: Vec<Vec<Option<f64>>>,
    pub excluded: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub n_records: usize,
    pub draws: usize,
    pub population: PopulationSummary,
    pub kway: KwayProfile,
    pub subgroups: Vec<SubgroupRow>,
    pub pairs: Vec<PairQuery>,
    pub mpmms: Vec<MpmmsRow>,
    pub threshold: Option<f64>,
    /// Non-singleton clusters of the shared-MPMMS estimate.
    pub estimate: Vec<Vec<String>>,
    pub estimate_clusters: usize,
    pub confusion: Option<ConfusionReport>,
}

pub fn build_report(samples: &PosteriorSampleSet, options: &ReportOptions) -> Result<Report> {
    let layout = FileLayout::new(&samples.meta.file_sizes);
    let name = |r: RecordId| layout.coord(r).to_string();
    let table = MpmmsTable::new(samples);
    let estimate = table.shared_estimate(options.threshold);

    let k = layout.k();
    let mut subgroups = Vec::new();
    if k <= 16 {
        for pattern in file_patterns(k) {
            let out: Vec<usize> = (0..k).filter(|f| !pattern.contains(f)).collect();
            subgroups.push(SubgroupRow {
                pattern: pattern_label(&pattern),
                mean: subgroup_counts(samples, &pattern, &out)?,
            });
        }
    }
    let rows = options.mpmms_rows.unwrap_or(layout.n_records()).min(layout.n_records());
    let mpmms = (0..rows)
        .map(|r| {
            let m = table.most_probable(r);
            MpmmsRow {
                record: name(r),
                set: m.members.iter().map(|&q| name(q)).collect(),
                probability: m.probability,
            }
        })
        .collect();
    let confusion = match options.truth {
        Some(t) => {
            let m = confusion_matrix(samples.lambdas(), t, &layout)?;
            Some(ConfusionReport {
                labels: m.labels(),
                normalized: m.normalized(),
                log_relative: m.log_relative(),
                counts: m.counts,
                excluded: m.excluded,
            })
        }
        None => None,
    };
    Ok(Report {
        version: samples.meta.version.clone(),
        config_hash: samples.meta.config_hash.clone(),
        seed: samples.meta.seed,
        n_records: layout.n_records(),
        draws: samples.len(),
        population: population_size_posterior(samples)?,
        kway: kway_match_profile(samples),
        subgroups,
        pairs: options
            .pairs
            .iter()
            .map(|&(a, b)| PairQuery { a: name(a), b: name(b), probability: pairwise_match_prob(samples, a, b) })
            .collect(),
        mpmms,
        threshold: options.threshold,
        estimate: estimate
            .clusters
            .iter()
            .filter(|c| c.members.len() > 1)
            .map(|c| c.members.iter().map(|&r| name(r)).collect())
            .collect(),
        estimate_clusters: estimate.clusters.len(),
        confusion,
    })
}
