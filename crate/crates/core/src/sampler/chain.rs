use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{RecordId, RecordTable};
use crate::error::{Error, Result};
use crate::model::{
    canonicalize, draw_beta, draw_theta, sample_y, sample_z, Hyperparameters, LatentId, Linkage,
    LinkageMode, LinkageState, Parameters, SufficientStats,
};
use crate::serde_util::json_sha256;

use super::blocks::BlockPartition;
use super::proposal::{apply, mh_accept, propose_merge, propose_split, AcceptanceMode, MoveKind, PairSampler};
use super::trace::{MoveStats, PosteriorSampleSet, Snapshot, TraceMeta};

/// Sampler settings. `sweeps` Gibbs sweeps, each running `metropolis_steps`
/// Metropolis steps of `split_merge_ops` split-merge proposals per block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    pub mode: LinkageMode,
    pub sweeps: usize,
    pub metropolis_steps: usize,
    pub split_merge_ops: usize,
    pub acceptance: AcceptanceMode,
    /// Sweeps discarded before storing; defaults to a fifth of `sweeps`.
    pub burn_in: Option<usize>,
    pub thin: usize,
    /// Cap on stored snapshots. Exceeding it doubles the thinning.
    pub max_stored: Option<usize>,
    /// Keep `y` and `z` in every snapshot.
    pub store_latents: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            mode: LinkageMode::Smered,
            sweeps: 1000,
            metropolis_steps: 1,
            split_merge_ops: 10,
            acceptance: AcceptanceMode::HastingsCorrected,
            burn_in: None,
            thin: 1,
            max_stored: None,
            store_latents: false,
        }
    }
}

impl ChainConfig {
    pub fn burn_in_sweeps(&self) -> usize {
        self.burn_in.unwrap_or(self.sweeps / 5)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweeps == 0 || self.metropolis_steps == 0 || self.split_merge_ops == 0 || self.thin == 0 {
            return Err(Error::Config("sweeps, metropolis_steps, split_merge_ops and thin must be at least 1".into()));
        }
        if self.burn_in_sweeps() >= self.sweeps {
            return Err(Error::Config(format!(
                "burn-in {} must be below the sweep count {}",
                self.burn_in_sweeps(),
                self.sweeps
            )));
        }
        if self.max_stored == Some(0) {
            return Err(Error::Config("max_stored must be at least 1".into()));
        }
        Ok(())
    }
}

/// Saved ChaCha position: the stream is derived from the run seed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub stream: u64,
    /// Word offset, decimal (it is a 68-bit counter).
    pub word_pos: String,
}

impl RngState {
    fn of(rng: &ChaCha8Rng) -> Self {
        Self {
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    fn restore(&self, seed: u64) -> Result<ChaCha8Rng> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(self.stream);
        let pos = self
            .word_pos
            .parse::<u128>()
            .map_err(|e| Error::Format { what: "checkpoint", message: format!("bad rng position: {e}") })?;
        rng.set_word_pos(pos);
        Ok(rng)
    }
}

/// Everything needed to continue a chain exactly where it stopped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: u32,
    pub input_hash: String,
    pub config_hash: String,
    pub seed: u64,
    pub sweep: usize,
    pub thin: usize,
    /// Latent label per record (block offset plus label within the block).
    pub lambda: Vec<LatentId>,
    pub y: BTreeMap<LatentId, Vec<u32>>,
    /// `0`/`1` per record and field.
    pub z: String,
    pub params: Parameters,
    pub rng: RngState,
    pub block_rngs: Vec<RngState>,
    pub block_moves: Vec<MoveStats>,
    pub snapshots: Vec<Snapshot>,
}

pub const CHECKPOINT_FORMAT: u32 = 1;

struct BlockChain {
    records: Vec<RecordId>,
    offset: LatentId,
    data: RecordTable,
    linkage: Linkage,
    pairs: PairSampler,
    rng: ChaCha8Rng,
    moves: MoveStats,
}

impl BlockChain {
    /// `split_merge_ops` proposals; `free` tracks unused labels over all blocks.
    fn split_merge(&mut self, params: &Parameters, config: &ChainConfig, free: &mut usize) -> Result<()> {
        for _ in 0..config.split_merge_ops {
            let Some((a, b)) = self.pairs.draw(&mut self.rng) else {
                break;
            };
            let proposal = if self.linkage.latent_of(a) == self.linkage.latent_of(b) {
                propose_split(&self.linkage, params, &self.data, a, b, &mut self.rng)?
            } else {
                propose_merge(&self.linkage, params, &self.data, a, b, config.mode, &mut self.rng)?
            };
            let decision =
                mh_accept(&self.linkage, params, &self.data, &proposal, config.acceptance, *free, &mut self.rng);
            match proposal.kind {
                MoveKind::Split => {
                    self.moves.split_proposed += 1;
                    self.moves.split_accepted += decision.accepted as u64;
                }
                MoveKind::Merge => {
                    self.moves.merge_proposed += 1;
                    self.moves.merge_accepted += decision.accepted as u64;
                }
            }
            if decision.accepted {
                match proposal.kind {
                    MoveKind::Split => *free -= 1,
                    MoveKind::Merge => *free += 1,
                }
                apply(&mut self.linkage, proposal);
            }
        }
        Ok(())
    }

    fn refresh_latents(&mut self, params: &Parameters) -> Result<()> {
        sample_y(&mut self.linkage, &params.theta, &self.data, &mut self.rng)?;
        sample_z(&mut self.linkage, &params.theta, &params.beta, &self.data, &mut self.rng);
        Ok(())
    }
}

#[derive(Serialize)]
struct ChainInputs<'a> {
    config: &'a ChainConfig,
    hp: &'a Hyperparameters,
    block_key_fields: &'a [usize],
    file_sizes: &'a [usize],
    cells: &'a str,
}

/// Blocked split-merge Metropolis-within-Gibbs sampler.
///
/// Every block draws from its own ChaCha stream and blocks are visited in a
/// fixed order, so results do not depend on the thread count.
pub struct Sampler {
    config: ChainConfig,
    hp: Hyperparameters,
    seed: u64,
    input_hash: String,
    config_hash: String,
    key_fields: Vec<usize>,
    file_sizes: Vec<usize>,
    n_records: usize,
    p: usize,
    blocks: Vec<BlockChain>,
    params: Parameters,
    rng: ChaCha8Rng,
    sweep: usize,
    thin: usize,
    snapshots: Vec<Snapshot>,
}

impl Sampler {
    /// Fresh chain: every record its own latent, `theta` and `beta` drawn
    /// from the prior.
    pub fn new(
        data: &RecordTable,
        hp: &Hyperparameters,
        config: &ChainConfig,
        partition: &BlockPartition,
        seed: u64,
    ) -> Result<Self> {
        let mut s = Self::skeleton(data, hp, config, partition, seed)?;
        s.params = Parameters::from_prior(hp, &mut s.rng);
        Ok(s)
    }

    fn skeleton(
        data: &RecordTable,
        hp: &Hyperparameters,
        config: &ChainConfig,
        partition: &BlockPartition,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        hp.validate(data.schema())?;
        partition.validate(data)?;
        let cells: String = data.cells().iter().map(|c| format!("{c},")).collect();
        let input_hash = json_sha256(&ChainInputs {
            config,
            hp,
            block_key_fields: &partition.key_fields,
            file_sizes: &data.file_sizes(),
            cells: &json_sha256(&cells),
        });
        let mut offset = 0;
        let mut blocks = Vec::with_capacity(partition.len());
        for (b, block) in partition.blocks.iter().enumerate() {
            let sub = data.subset(&block.records)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64 + 1);
            blocks.push(BlockChain {
                records: block.records.clone(),
                offset,
                linkage: Linkage::singletons(&sub),
                pairs: PairSampler::new(&sub, config.mode),
                data: sub,
                rng,
                moves: MoveStats::default(),
            });
            offset += block.records.len() as LatentId;
        }
        Ok(Self {
            config: config.clone(),
            hp: hp.clone(),
            seed,
            config_hash: input_hash.clone(),
            input_hash,
            key_fields: partition.key_fields.clone(),
            file_sizes: data.file_sizes(),
            n_records: data.n_records(),
            p: data.p(),
            blocks,
            params: Parameters { theta: Vec::new(), beta: Vec::new() },
            rng: ChaCha8Rng::seed_from_u64(seed),
            sweep: 0,
            thin: config.thin,
            snapshots: Vec::new(),
        })
    }

    /// Continue from a checkpoint written by [`Sampler::checkpoint`] for the
    /// same data, hyperparameters, configuration and blocking.
    pub fn resume(
        data: &RecordTable,
        hp: &Hyperparameters,
        config: &ChainConfig,
        partition: &BlockPartition,
        checkpoint: &Checkpoint,
    ) -> Result<Self> {
        if checkpoint.format != CHECKPOINT_FORMAT {
            return Err(Error::Format {
                what: "checkpoint",
                message: format!("unsupported format {}", checkpoint.format),
            });
        }
        let mut s = Self::skeleton(data, hp, config, partition, checkpoint.seed)?;
        if s.input_hash != checkpoint.input_hash {
            return Err(Error::Config(
                "checkpoint was written for different data, hyperparameters or chain settings".into(),
            ));
        }
        let n = data.n_records();
        let p = data.p();
        let z: Vec<bool> = checkpoint.z.bytes().map(|c| c == b'1').collect();
        if checkpoint.lambda.len() != n || z.len() != n * p || checkpoint.block_rngs.len() != s.blocks.len() {
            return Err(Error::Dimension("checkpoint does not match the data or blocking".into()));
        }
        for (b, block) in s.blocks.iter_mut().enumerate() {
            let size = block.records.len() as LatentId;
            let mut lambda = Vec::with_capacity(block.records.len());
            let mut zb = Vec::with_capacity(block.records.len() * p);
            let mut y = BTreeMap::new();
            for &r in &block.records {
                let g = checkpoint.lambda[r];
                if g < block.offset || g >= block.offset + size {
                    return Err(Error::Invariant(format!("checkpoint links record {r} across blocks")));
                }
                let row = checkpoint
                    .y
                    .get(&g)
                    .ok_or_else(|| Error::Dimension(format!("checkpoint lacks latent values for {g}")))?;
                y.insert(g - block.offset, row.clone());
                lambda.push(g - block.offset);
                zb.extend_from_slice(&z[r * p..(r + 1) * p]);
            }
            block.linkage = Linkage::from_parts(&block.data, lambda, &y, zb)?;
            block.rng = checkpoint.block_rngs[b].restore(checkpoint.seed)?;
            block.moves = checkpoint.block_moves.get(b).copied().unwrap_or_default();
        }
        s.params = checkpoint.params.clone();
        s.rng = checkpoint.rng.restore(checkpoint.seed)?;
        s.sweep = checkpoint.sweep;
        s.thin = checkpoint.thin;
        s.snapshots = checkpoint.snapshots.clone();
        s.config_hash = checkpoint.config_hash.clone();
        Ok(s)
    }

    /// Provenance hash written into the trace; defaults to a hash of the
    /// chain inputs.
    pub fn set_config_hash(&mut self, hash: String) {
        self.config_hash = hash;
    }

    pub fn sweeps_done(&self) -> usize {
        self.sweep
    }

    pub fn params(&self) -> &Parameters {
        &self.params
    }

    pub fn is_finished(&self) -> bool {
        self.sweep >= self.config.sweeps
    }

    /// One Gibbs sweep: Metropolis steps over the blocks, then `theta` and `beta`.
    ///
    /// The label prior ties blocks together through the total cluster count,
    /// so split-merge runs block by block; `y` and `z` updates run in parallel.
    pub fn sweep(&mut self) -> Result<()> {
        let params = &self.params;
        let config = &self.config;
        for _ in 0..config.metropolis_steps {
            let used: usize = self.blocks.iter().map(|b| b.linkage.active_count()).sum();
            let mut free = self.n_records - used;
            for block in &mut self.blocks {
                block.split_merge(params, config, &mut free)?;
            }
            self.blocks.par_iter_mut().try_for_each(|block| block.refresh_latents(params))?;
        }
        let mut stats = SufficientStats::empty(&self.hp.mu.iter().map(|m| m.len() as u32).collect::<Vec<_>>());
        for block in &self.blocks {
            stats.add(&SufficientStats::collect(&block.linkage, &block.data));
        }
        self.params.theta = draw_theta(&stats, &self.hp, &mut self.rng);
        self.params.beta = draw_beta(&stats, &self.hp, &mut self.rng);
        self.sweep += 1;
        self.store();
        Ok(())
    }

    /// Run the remaining sweeps.
    pub fn run(&mut self) -> Result<()> {
        while !self.is_finished() {
            self.sweep()?;
        }
        Ok(())
    }

    /// Run at most `count` more sweeps.
    pub fn run_for(&mut self, count: usize) -> Result<()> {
        for _ in 0..count {
            if self.is_finished() {
                break;
            }
            self.sweep()?;
        }
        Ok(())
    }

    fn keeps(&self, iteration: usize, thin: usize) -> bool {
        let burn = self.config.burn_in_sweeps();
        iteration > burn && (iteration - burn).is_multiple_of(thin)
    }

    fn store(&mut self) {
        if !self.keeps(self.sweep, self.thin) {
            return;
        }
        let snapshot = self.snapshot();
        self.snapshots.push(snapshot);
        if let Some(cap) = self.config.max_stored {
            while self.snapshots.len() > cap {
                self.thin *= 2;
                let thin = self.thin;
                let burn = self.config.burn_in_sweeps();
                self.snapshots.retain(|s| (s.iteration - burn).is_multiple_of(thin));
            }
        }
    }

    fn global_lambda(&self) -> Vec<LatentId> {
        let mut lambda = vec![0; self.n_records];
        for block in &self.blocks {
            for (i, &r) in block.records.iter().enumerate() {
                lambda[r] = block.offset + block.linkage.latent_of(i);
            }
        }
        lambda
    }

    fn global_z(&self) -> Vec<bool> {
        let mut z = vec![false; self.n_records * self.p];
        for block in &self.blocks {
            for (i, &r) in block.records.iter().enumerate() {
                z[r * self.p..(r + 1) * self.p].copy_from_slice(block.linkage.z_row(i));
            }
        }
        z
    }

    fn global_y(&self) -> BTreeMap<LatentId, Vec<u32>> {
        let mut y = BTreeMap::new();
        for block in &self.blocks {
            for c in block.linkage.active_latents() {
                y.insert(block.offset + c, block.linkage.y(c).to_vec());
            }
        }
        y
    }

    fn snapshot(&self) -> Snapshot {
        let raw = self.global_lambda();
        let lambda = canonicalize(&raw);
        let (y, z) = if self.config.store_latents {
            let rows = self.global_y();
            let mut y = Vec::new();
            for (r, &c) in lambda.iter().enumerate() {
                if c as usize == y.len() {
                    y.push(rows[&raw[r]].clone());
                }
            }
            (Some(y), Some(bits(&self.global_z())))
        } else {
            (None, None)
        };
        Snapshot {
            iteration: self.sweep,
            lambda,
            beta: self.params.beta.clone(),
            theta: self.params.theta.clone(),
            y,
            z,
        }
    }

    /// Current state assembled over all blocks, with latent ids offset per block.
    pub fn state(&self, data: &RecordTable) -> Result<LinkageState> {
        Ok(LinkageState {
            linkage: Linkage::from_parts(data, self.global_lambda(), &self.global_y(), self.global_z())?,
            params: self.params.clone(),
        })
    }

    /// Coupling holds in every block and, without de-duplication, no latent
    /// holds two records of one file.
    pub fn check_invariants(&self) -> Result<()> {
        for block in &self.blocks {
            if !block.linkage.check_coupling(&block.data) {
                return Err(Error::Invariant("an undistorted record disagrees with its latent".into()));
            }
            if self.config.mode == LinkageMode::Smere {
                for c in block.linkage.active_latents() {
                    let mut files: Vec<usize> =
                        block.linkage.members(c).iter().map(|&r| block.data.file_of(r as usize)).collect();
                    files.dedup();
                    if files.len() != block.linkage.members(c).len() {
                        return Err(Error::Invariant(format!("latent {c} holds two records of one file")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn moves(&self) -> MoveStats {
        let mut m = MoveStats::default();
        for b in &self.blocks {
            m.add(&b.moves);
        }
        m
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT,
            input_hash: self.input_hash.clone(),
            config_hash: self.config_hash.clone(),
            seed: self.seed,
            sweep: self.sweep,
            thin: self.thin,
            lambda: self.global_lambda(),
            y: self.global_y(),
            z: bits(&self.global_z()),
            params: self.params.clone(),
            rng: RngState::of(&self.rng),
            block_rngs: self.blocks.iter().map(|b| RngState::of(&b.rng)).collect(),
            block_moves: self.blocks.iter().map(|b| b.moves).collect(),
            snapshots: self.snapshots.clone(),
        }
    }

    pub fn meta(&self) -> TraceMeta {
        TraceMeta {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: self.config_hash.clone(),
            seed: self.seed,
            mode: self.config.mode,
            acceptance: self.config.acceptance,
            sweeps: self.config.sweeps,
            metropolis_steps: self.config.metropolis_steps,
            split_merge_ops: self.config.split_merge_ops,
            burn_in: self.config.burn_in_sweeps(),
            thin: self.thin,
            file_sizes: self.file_sizes.clone(),
            block_key_fields: self.key_fields.clone(),
            blocks: self.blocks.len(),
            moves: self.moves(),
        }
    }

    pub fn finish(self) -> PosteriorSampleSet {
        PosteriorSampleSet {
            meta: self.meta(),
            snapshots: self.snapshots,
        }
    }
}

fn bits(z: &[bool]) -> String {
    z.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// Run a full chain from the singleton start.
pub fn run_chain(
    data: &RecordTable,
    hp: &Hyperparameters,
    config: &ChainConfig,
    partition: &BlockPartition,
    seed: u64,
) -> Result<PosteriorSampleSet> {
    let mut sampler = Sampler::new(data, hp, config, partition, seed)?;
    sampler.run()?;
    Ok(sampler.finish())
}
