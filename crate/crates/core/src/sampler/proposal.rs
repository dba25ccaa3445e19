//! Split-merge moves on the linkage of one block and their acceptance test.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::RecordTable;
use crate::error::{Error, Result};
use crate::model::{z_probability, ClusterParts, LatentId, Linkage, LinkageMode, Parameters};

/// How the Metropolis ratio is formed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AcceptanceMode {
    /// Posterior ratio of the proposed and current states only.
    PosteriorRatio,
    /// Posterior ratio times the proposal-density ratio and the label-count
    /// factor, so the chain leaves the posterior over partitions invariant.
    #[default]
    HastingsCorrected,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MoveKind {
    Split,
    Merge,
}

/// A proposed replacement of the latents in `old` by `clusters`.
///
/// For a split `old = [c]` and `clusters = [side of recordA, side of recordB]`;
/// for a merge `old = [latent of recordA, latent of recordB]` and a single
/// merged cluster. Member lists are ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct Proposal {
    pub kind: MoveKind,
    pub old: Vec<LatentId>,
    pub clusters: Vec<ClusterParts>,
    /// False when the merged set breaks the no-duplicates rule.
    pub feasible: bool,
    pub log_q_forward: f64,
    pub log_q_reverse: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decision {
    pub accepted: bool,
    pub log_ratio: f64,
}

/// Uniform draws of ordered record pairs eligible for a split-merge move.
///
/// Under [`LinkageMode::Smere`] the two records come from different files.
/// Local record ids must be grouped by file, which [`RecordTable::subset`]
/// guarantees.
#[derive(Clone, Debug)]
pub struct PairSampler {
    mode: LinkageMode,
    n: usize,
    // (start, len, cumulative weight) per non-empty file
    files: Vec<(usize, usize, u64)>,
}

impl PairSampler {
    pub fn new(data: &RecordTable, mode: LinkageMode) -> Self {
        let n = data.n_records();
        let mut files = Vec::new();
        let mut total = 0u64;
        for f in 0..data.k() {
            let range = data.file_range(f);
            if range.is_empty() {
                continue;
            }
            let len = range.len();
            total += (len * (n - len)) as u64;
            files.push((range.start, len, total));
        }
        Self { mode, n, files }
    }

    /// Number of eligible ordered pairs.
    pub fn pair_count(&self) -> u64 {
        match self.mode {
            LinkageMode::Smered => (self.n as u64) * (self.n as u64).saturating_sub(1),
            LinkageMode::Smere => self.files.last().map_or(0, |f| f.2),
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<(usize, usize)> {
        if self.pair_count() == 0 {
            return None;
        }
        match self.mode {
            LinkageMode::Smered => {
                let a = rng.random_range(0..self.n);
                let mut b = rng.random_range(0..self.n - 1);
                if b >= a {
                    b += 1;
                }
                Some((a, b))
            }
            LinkageMode::Smere => {
                let u = rng.random_range(0..self.pair_count());
                let i = self.files.partition_point(|f| f.2 <= u);
                let (start, len, _) = self.files[i];
                let a = start + rng.random_range(0..len);
                let mut b = rng.random_range(0..self.n - len);
                if b >= start {
                    b += len;
                }
                Some((a, b))
            }
        }
    }
}

/// Per-field uniform copy of a member record. Returns the values and
/// `log q(y | members)`.
fn seed_values<R: Rng + ?Sized>(members: &[u32], data: &RecordTable, rng: &mut R) -> (Vec<u32>, f64) {
    let values: Vec<u32> = (0..data.p())
        .map(|l| data.value(members[rng.random_range(0..members.len())] as usize, l))
        .collect();
    let lq = log_seed_probability(&values, members, data);
    (values, lq)
}

/// `sum_l log(#{members with x_l = y_l} / |members|)`.
fn log_seed_probability(values: &[u32], members: &[u32], data: &RecordTable) -> f64 {
    let size = (members.len() as f64).ln();
    values
        .iter()
        .enumerate()
        .map(|(l, &v)| {
            let hits = members.iter().filter(|&&r| data.value(r as usize, l) == v).count();
            (hits as f64).ln() - size
        })
        .sum()
}

/// Draw `z` for `members` given latent values. Returns member-major flags and
/// their log probability.
fn draw_distortion<R: Rng + ?Sized>(
    members: &[u32],
    values: &[u32],
    params: &Parameters,
    data: &RecordTable,
    rng: &mut R,
) -> (Vec<bool>, f64) {
    let mut z = Vec::with_capacity(members.len() * values.len());
    for &r in members {
        for (l, &y) in values.iter().enumerate() {
            let x = data.value(r as usize, l);
            let q = z_probability(x, y, &params.theta[l], params.beta[l]);
            z.push(q >= 1.0 || (q > 0.0 && rng.random::<f64>() < q));
        }
    }
    let lq = log_distortion_probability(members, values, &z, params, data);
    (z, lq)
}

fn log_distortion_probability(
    members: &[u32],
    values: &[u32],
    z: &[bool],
    params: &Parameters,
    data: &RecordTable,
) -> f64 {
    let p = values.len();
    let mut total = 0.0;
    for (i, &r) in members.iter().enumerate() {
        for (l, &y) in values.iter().enumerate() {
            let q = z_probability(data.value(r as usize, l), y, &params.theta[l], params.beta[l]);
            total += if z[i * p + l] { q.ln() } else { (1.0 - q).ln() };
        }
    }
    total
}

fn current_z(linkage: &Linkage, members: &[u32]) -> Vec<bool> {
    members
        .iter()
        .flat_map(|&r| linkage.z_row(r as usize).iter().copied())
        .collect()
}

/// Split the latent shared by `a` and `b`: `a` and `b` seed the two sides,
/// every other member joins one side by a fair coin.
pub fn propose_split<R: Rng + ?Sized>(
    linkage: &Linkage,
    params: &Parameters,
    data: &RecordTable,
    a: usize,
    b: usize,
    rng: &mut R,
) -> Result<Proposal> {
    let c = linkage.latent_of(a);
    if a == b || linkage.latent_of(b) != c {
        return Err(Error::Contract(format!("split needs two co-linked records, got {a} and {b}")));
    }
    let members = linkage.members(c);
    let (mut side_a, mut side_b) = (Vec::new(), Vec::new());
    for &r in members {
        let r_us = r as usize;
        if r_us == a || (r_us != b && rng.random::<bool>()) {
            side_a.push(r);
        } else {
            side_b.push(r);
        }
    }
    let free = (members.len() - 2) as f64;

    let (ya, qya) = seed_values(&side_a, data, rng);
    let (yb, qyb) = seed_values(&side_b, data, rng);
    let (za, qza) = draw_distortion(&side_a, &ya, params, data, rng);
    let (zb, qzb) = draw_distortion(&side_b, &yb, params, data, rng);
    let log_q_forward = -free * std::f64::consts::LN_2 + qya + qyb + qza + qzb;

    let y = linkage.y(c);
    let log_q_reverse = log_seed_probability(y, members, data)
        + log_distortion_probability(members, y, &current_z(linkage, members), params, data);

    Ok(Proposal {
        kind: MoveKind::Split,
        old: vec![c],
        clusters: vec![
            ClusterParts { members: side_a, values: ya, z: za },
            ClusterParts { members: side_b, values: yb, z: zb },
        ],
        feasible: true,
        log_q_forward,
        log_q_reverse,
    })
}

/// Merge the latents of `a` and `b`; the merged latent copies each field from
/// a uniformly chosen member.
pub fn propose_merge<R: Rng + ?Sized>(
    linkage: &Linkage,
    params: &Parameters,
    data: &RecordTable,
    a: usize,
    b: usize,
    mode: LinkageMode,
    rng: &mut R,
) -> Result<Proposal> {
    let (ca, cb) = (linkage.latent_of(a), linkage.latent_of(b));
    if ca == cb {
        return Err(Error::Contract(format!("merge needs records in distinct latents, got {a} and {b}")));
    }
    let (ma, mb) = (linkage.members(ca), linkage.members(cb));
    let mut merged = Vec::with_capacity(ma.len() + mb.len());
    let (mut i, mut j) = (0, 0);
    while i < ma.len() || j < mb.len() {
        if j == mb.len() || (i < ma.len() && ma[i] < mb[j]) {
            merged.push(ma[i]);
            i += 1;
        } else {
            merged.push(mb[j]);
            j += 1;
        }
    }
    let feasible = match mode {
        LinkageMode::Smered => true,
        LinkageMode::Smere => {
            let mut files: Vec<usize> = merged.iter().map(|&r| data.file_of(r as usize)).collect();
            files.dedup();
            files.len() == merged.len()
        }
    };

    let (y, qy) = seed_values(&merged, data, rng);
    let (z, qz) = draw_distortion(&merged, &y, params, data, rng);
    let log_q_forward = qy + qz;

    let free = (merged.len() - 2) as f64;
    let (ya, yb) = (linkage.y(ca), linkage.y(cb));
    let log_q_reverse = -free * std::f64::consts::LN_2
        + log_seed_probability(ya, ma, data)
        + log_seed_probability(yb, mb, data)
        + log_distortion_probability(ma, ya, &current_z(linkage, ma), params, data)
        + log_distortion_probability(mb, yb, &current_z(linkage, mb), params, data);

    Ok(Proposal {
        kind: MoveKind::Merge,
        old: vec![ca, cb],
        clusters: vec![ClusterParts { members: merged, values: y, z }],
        feasible,
        log_q_forward,
        log_q_reverse,
    })
}

/// Log posterior contribution of one latent and its records:
/// `sum_l log theta_l[y_l]` plus, per cell, `log beta + log theta[x]` when
/// distorted and `log(1 - beta)` when not (`-inf` on a mismatch).
pub fn cluster_log_weight(
    members: &[u32],
    values: &[u32],
    z: impl Fn(usize, usize) -> bool,
    params: &Parameters,
    data: &RecordTable,
) -> f64 {
    let mut w: f64 = values.iter().enumerate().map(|(l, &v)| params.theta[l][v as usize].ln()).sum();
    for (i, &r) in members.iter().enumerate() {
        for (l, &y) in values.iter().enumerate() {
            let x = data.value(r as usize, l);
            w += if z(i, l) {
                params.beta[l].ln() + params.theta[l][x as usize].ln()
            } else if x == y {
                (-params.beta[l]).ln_1p()
            } else {
                f64::NEG_INFINITY
            };
        }
    }
    w
}

/// Log posterior ratio of the proposed over the current state.
pub fn log_posterior_ratio(linkage: &Linkage, params: &Parameters, data: &RecordTable, proposal: &Proposal) -> f64 {
    if !proposal.feasible {
        return f64::NEG_INFINITY;
    }
    let p = data.p();
    let new: f64 = proposal
        .clusters
        .iter()
        .map(|c| cluster_log_weight(&c.members, &c.values, |i, l| c.z[i * p + l], params, data))
        .sum();
    let old: f64 = proposal
        .old
        .iter()
        .map(|&c| {
            let members = linkage.members(c);
            cluster_log_weight(members, linkage.y(c), |i, l| linkage.z(members[i] as usize, l), params, data)
        })
        .sum();
    new - old
}

/// Log acceptance ratio of `proposal` against the current block state.
///
/// `free_labels` is the number of latent labels unused anywhere in the data
/// before the move. Labels are exchangeable, so a partition with `K` clusters
/// stands for `N_max! / (N_max - K)!` equally likely labellings.
pub fn log_acceptance_ratio(
    linkage: &Linkage,
    params: &Parameters,
    data: &RecordTable,
    proposal: &Proposal,
    mode: AcceptanceMode,
    free_labels: usize,
) -> f64 {
    let ratio = log_posterior_ratio(linkage, params, data, proposal);
    let r = match mode {
        AcceptanceMode::PosteriorRatio => ratio,
        AcceptanceMode::HastingsCorrected => {
            let free = free_labels as f64;
            let labels = match proposal.kind {
                MoveKind::Split => free.ln(),
                MoveKind::Merge => -(free + 1.0).ln(),
            };
            ratio + labels + proposal.log_q_reverse - proposal.log_q_forward
        }
    };
    if r.is_nan() {
        f64::NEG_INFINITY
    } else {
        r
    }
}

/// Metropolis test for `proposal`. Does not modify the state.
pub fn mh_accept<R: Rng + ?Sized>(
    linkage: &Linkage,
    params: &Parameters,
    data: &RecordTable,
    proposal: &Proposal,
    mode: AcceptanceMode,
    free_labels: usize,
    rng: &mut R,
) -> Decision {
    let log_ratio = log_acceptance_ratio(linkage, params, data, proposal, mode, free_labels);
    let accepted = if log_ratio >= 0.0 {
        true
    } else if log_ratio == f64::NEG_INFINITY {
        false
    } else {
        rng.random::<f64>().ln() < log_ratio
    };
    Decision { accepted, log_ratio }
}

/// Install an accepted proposal.
pub fn apply(linkage: &mut Linkage, proposal: Proposal) -> Vec<LatentId> {
    linkage.reassign(&proposal.old, proposal.clusters)
}
