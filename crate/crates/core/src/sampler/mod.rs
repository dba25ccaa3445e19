//! Split-merge Metropolis-within-Gibbs sampling of the linkage posterior.

mod blocks;
mod chain;
mod proposal;
mod trace;

pub use blocks::{build_blocks, Block, BlockPartition};
pub use chain::{run_chain, ChainConfig, Checkpoint, RngState, Sampler, CHECKPOINT_FORMAT};
pub use proposal::{
    apply, cluster_log_weight, log_acceptance_ratio, log_posterior_ratio, mh_accept, propose_merge,
    propose_split, AcceptanceMode, Decision, MoveKind, PairSampler, Proposal,
};
pub use trace::{MoveStats, PosteriorSampleSet, Snapshot, TraceMeta};
