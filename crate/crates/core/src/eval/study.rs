use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Hyperparameters, LinkageMode};
use crate::posterior::{population_size_posterior, shared_mpmms_estimate};
use crate::sampler::{build_blocks, run_chain, ChainConfig};
use crate::serde_util::json_sha256;

use super::{error_report, matched_fraction, simulate_dataset, LinkSet, SimulationSpec};

/// Simulate at several distortion levels, link, and score against the truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub levels: Vec<f64>,
    pub replications: usize,
    pub simulation: SimulationSpec,
    pub chain: ChainConfig,
    pub a: f64,
    #[serde(with = "crate::serde_util::f64_inf")]
    pub b: f64,
    pub mu: f64,
    pub block_fields: Vec<String>,
    pub seed: u64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            levels: vec![0.0, 0.0025, 0.005, 0.01, 0.02, 0.05],
            replications: 3,
            simulation: SimulationSpec::default(),
            chain: ChainConfig {
                mode: LinkageMode::Smere,
                sweeps: 1000,
                ..ChainConfig::default()
            },
            a: 1.0,
            b: 99.0,
            mu: 1.0,
            block_fields: vec!["sex".into(), "birth_year".into()],
            seed: 1,
        }
    }
}

/// One `(level, replication)` outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub level: f64,
    pub replication: usize,
    pub records: usize,
    pub true_n: usize,
    pub n_mean: f64,
    pub n_sd: f64,
    pub true_links: u64,
    pub false_links: u64,
    pub missing_links: u64,
    pub fnr: f64,
    pub fpr: f64,
    pub matched_fraction: f64,
    pub chain_seed: u64,
    pub config_hash: String,
    pub version: String,
}

pub fn distortion_study(config: &StudyConfig) -> Result<Vec<StudyRow>> {
    if config.replications == 0 || config.levels.is_empty() {
        return Err(Error::Config("need at least one level and one replication".into()));
    }
    config.chain.validate()?;
    let hash = json_sha256(config);
    let runs: Vec<(usize, usize)> =
        (0..config.replications).flat_map(|rep| (0..config.levels.len()).map(move |i| (rep, i))).collect();
    let mut rows: Vec<StudyRow> = runs
        .par_iter()
        .map(|&(rep, i)| run_one(config, rep, i, &hash))
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.level.total_cmp(&b.level).then(a.replication.cmp(&b.replication)));
    Ok(rows)
}

fn run_one(config: &StudyConfig, rep: usize, level_index: usize, hash: &str) -> Result<StudyRow> {
    let level = config.levels[level_index];
    // one data stream per replication, shared by every level
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(rep as u64);
    let spec = SimulationSpec { distortion: level, ..config.simulation.clone() };
    let sim = simulate_dataset(&spec, &mut rng)?;
    let data = &sim.table;

    let keys = config
        .block_fields
        .iter()
        .map(|name| {
            data.schema()
                .index_of(name)
                .ok_or_else(|| Error::Config(format!("unknown block field {name:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let blocks = build_blocks(data, &keys)?;
    let hp = Hyperparameters::uniform(data.schema(), config.a, config.b, config.mu);
    let chain_seed = config
        .seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add((rep * config.levels.len() + level_index) as u64 + 1);
    let samples = run_chain(data, &hp, &config.chain, &blocks, chain_seed)?;

    let estimate = shared_mpmms_estimate(&samples, None);
    let report = error_report(&LinkSet::Partition(estimate.labels.clone()), &sim.truth)?;
    let population = population_size_posterior(&samples)?;
    Ok(StudyRow {
        level,
        replication: rep,
        records: data.n_records(),
        true_n: sim.truth.clusters().len(),
        n_mean: population.mean,
        n_sd: population.sd,
        true_links: report.true_links,
        false_links: report.false_links,
        missing_links: report.missing_links,
        fnr: report.fnr,
        fpr: report.fpr,
        matched_fraction: matched_fraction(&estimate.labels, &sim.truth)?,
        chain_seed,
        config_hash: hash.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    })
}
