use serde::{Deserialize, Serialize};

use crate::data::RecordTable;
use crate::error::{Error, Result};
use crate::model::LinkageMode;

use super::AcceptanceMode;

/// One stored posterior draw. `lambda` is relabelled by first appearance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub iteration: usize,
    pub lambda: Vec<u32>,
    pub beta: Vec<f64>,
    pub theta: Vec<Vec<f64>>,
    /// Latent values indexed by relabelled latent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<Vec<u32>>>,
    /// Distortion flags, one `0`/`1` character per record and field.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<String>,
}

impl Snapshot {
    pub fn cluster_count(&self) -> usize {
        self.lambda.iter().max().map_or(0, |&m| m as usize + 1)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveStats {
    pub split_proposed: u64,
    pub split_accepted: u64,
    pub merge_proposed: u64,
    pub merge_accepted: u64,
}

impl MoveStats {
    pub fn add(&mut self, other: &MoveStats) {
        self.split_proposed += other.split_proposed;
        self.split_accepted += other.split_accepted;
        self.merge_proposed += other.merge_proposed;
        self.merge_accepted += other.merge_accepted;
    }
}

/// Provenance and run settings stored next to the draws.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub mode: LinkageMode,
    pub acceptance: AcceptanceMode,
    pub sweeps: usize,
    pub metropolis_steps: usize,
    pub split_merge_ops: usize,
    pub burn_in: usize,
    /// Thinning actually applied, after any doubling forced by the storage cap.
    pub thin: usize,
    pub file_sizes: Vec<usize>,
    pub block_key_fields: Vec<usize>,
    pub blocks: usize,
    pub moves: MoveStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSampleSet {
    pub meta: TraceMeta,
    pub snapshots: Vec<Snapshot>,
}

impl PosteriorSampleSet {
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn n_records(&self) -> usize {
        self.meta.file_sizes.iter().sum()
    }

    pub fn lambdas(&self) -> impl Iterator<Item = &[u32]> {
        self.snapshots.iter().map(|s| s.lambda.as_slice())
    }

    /// Every stored linkage has the right length and, without
    /// de-duplication, at most one record per file on each latent.
    pub fn check_feasible(&self, data: &RecordTable) -> Result<()> {
        if self.meta.file_sizes != data.file_sizes() {
            return Err(Error::Dimension(format!(
                "trace file sizes {:?} differ from data {:?}",
                self.meta.file_sizes,
                data.file_sizes()
            )));
        }
        for s in &self.snapshots {
            if s.lambda.len() != data.n_records() {
                return Err(Error::Dimension(format!(
                    "iteration {} has {} labels for {} records",
                    s.iteration,
                    s.lambda.len(),
                    data.n_records()
                )));
            }
            if self.meta.mode == LinkageMode::Smere {
                for f in 0..data.k() {
                    let mut labels: Vec<u32> = data.file_range(f).map(|r| s.lambda[r]).collect();
                    labels.sort_unstable();
                    if labels.windows(2).any(|w| w[0] == w[1]) {
                        return Err(Error::Invariant(format!(
                            "iteration {} links two records of file {}",
                            s.iteration,
                            f + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}
