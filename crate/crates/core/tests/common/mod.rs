#![allow(dead_code)]

pub mod oracle;

use bayeslink::data::{FieldSchema, RecordTable};
use bayeslink::model::{Hyperparameters, LinkageMode};
use bayeslink::sampler::{
    run_chain, AcceptanceMode, BlockPartition, ChainConfig, MoveStats, PosteriorSampleSet, Snapshot, TraceMeta,
};

/// Table from per-record file indices and values.
pub fn table(files: &[usize], records: &[Vec<u32>], levels: &[u32]) -> RecordTable {
    let k = files.iter().max().unwrap() + 1;
    let mut by_file = vec![Vec::new(); k];
    for (f, r) in files.iter().zip(records) {
        by_file[*f].push(r.clone());
    }
    RecordTable::new(FieldSchema::anonymous(levels.to_vec()).unwrap(), by_file).unwrap()
}

/// A trace holding only linkage draws.
pub fn trace_of(file_sizes: Vec<usize>, lambdas: Vec<Vec<u32>>) -> PosteriorSampleSet {
    PosteriorSampleSet {
        meta: TraceMeta {
            version: "test".into(),
            config_hash: String::new(),
            seed: 0,
            mode: LinkageMode::Smered,
            acceptance: AcceptanceMode::HastingsCorrected,
            sweeps: lambdas.len(),
            metropolis_steps: 1,
            split_merge_ops: 1,
            burn_in: 0,
            thin: 1,
            file_sizes,
            block_key_fields: Vec::new(),
            blocks: 1,
            moves: MoveStats::default(),
        },
        snapshots: lambdas
            .into_iter()
            .enumerate()
            .map(|(i, lambda)| Snapshot { iteration: i + 1, lambda, beta: vec![], theta: vec![], y: None, z: None })
            .collect(),
    }
}

/// Pairwise match frequencies of a single-block chain on an oracle instance,
/// in the oracle's pair order. Records are reordered file-major first.
pub fn chain_pair_probabilities(
    inst: &oracle::Instance,
    acceptance: AcceptanceMode,
    sweeps: usize,
    split_merge_ops: usize,
    seed: u64,
) -> Vec<((usize, usize), f64)> {
    let data = table(&inst.files, &inst.records, &inst.levels);
    // position of each instance record in file-major order
    let mut order: Vec<usize> = (0..inst.files.len()).collect();
    order.sort_by_key(|&r| (inst.files[r], r));
    let mut pos = vec![0; order.len()];
    for (i, &r) in order.iter().enumerate() {
        pos[r] = i;
    }
    let hp = Hyperparameters::uniform(data.schema(), inst.a, inst.b, inst.mu);
    let config = ChainConfig {
        mode: if inst.dedup { LinkageMode::Smered } else { LinkageMode::Smere },
        sweeps,
        split_merge_ops,
        acceptance,
        burn_in: Some(sweeps / 100),
        ..ChainConfig::default()
    };
    let trace = run_chain(&data, &hp, &config, &BlockPartition::single(&data), seed).unwrap();
    let n = inst.records.len();
    let mut out = Vec::new();
    for r in 0..n {
        for q in r + 1..n {
            let hits = trace.lambdas().filter(|l| l[pos[r]] == l[pos[q]]).count();
            out.push(((r, q), hits as f64 / trace.len() as f64));
        }
    }
    out
}
