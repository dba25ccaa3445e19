//! The prior over record partitions induced by drawing each record's latent
//! uniformly from a population of size `M`, and tools for choosing `M`.
//!
//! A partition `xi` of `N` records has prior `M! / ((M - |xi|)! M^N)` when
//! `|xi| <= M` and zero otherwise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `N` for which the Stirling table is built.
pub const MAX_STIRLING_N: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionPriorSpec {
    pub n: u64,
    pub m: u64,
}

impl PartitionPriorSpec {
    /// `m` defaults to `n`.
    pub fn new(n: u64, m: Option<u64>) -> Result<Self> {
        let m = m.unwrap_or(n);
        if n == 0 || m == 0 {
            return Err(Error::Config(format!("need N >= 1 and M >= 1, got N = {n}, M = {m}")));
        }
        Ok(Self { n, m })
    }
}

/// Log prior of any single partition with `size` blocks.
pub fn log_partition_prior(spec: &PartitionPriorSpec, size: u64) -> Result<f64> {
    if size == 0 || size > spec.n {
        return Err(Error::Contract(format!("partition size {size} outside 1..={}", spec.n)));
    }
    if size > spec.m {
        return Ok(f64::NEG_INFINITY);
    }
    let m = spec.m as f64;
    // log M!/(M-k)! - N log M = sum_{i<k} log(1 - i/M) + (k - N) log M
    let falling: f64 = (0..size).map(|i| (-(i as f64) / m).ln_1p()).sum();
    Ok(falling + (size as f64 - spec.n as f64) * m.ln())
}

/// `ln S(n, k)` for `k = 0..=n`, Stirling numbers of the second kind.
pub fn log_stirling2_row(n: usize) -> Result<Vec<f64>> {
    if n > MAX_STIRLING_N {
        return Err(Error::Contract(format!("Stirling table limited to N <= {MAX_STIRLING_N}, got {n}")));
    }
    let mut row = vec![f64::NEG_INFINITY; n + 1];
    row[0] = 0.0;
    for i in 1..=n {
        // S(i, k) = k S(i-1, k) + S(i-1, k-1), updated in place from high k down
        for k in (1..=i).rev() {
            let stay = row[k] + (k as f64).ln();
            let open = row[k - 1];
            row[k] = log_add(stay, open);
        }
        row[0] = f64::NEG_INFINITY;
    }
    Ok(row)
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let hi = a.max(b);
    hi + (-(a - b).abs()).exp().ln_1p()
}

/// Prior probability of `k` distinct latents, `k = 1..=min(N, M)`.
pub fn prior_cardinality_distribution(spec: &PartitionPriorSpec) -> Result<Vec<(u64, f64)>> {
    let n = usize::try_from(spec.n).map_err(|_| Error::Contract("N too large".into()))?;
    let stirling = log_stirling2_row(n)?;
    (1..=spec.n.min(spec.m))
        .map(|k| Ok((k, (stirling[k as usize] + log_partition_prior(spec, k)?).exp())))
        .collect()
}

/// Prior mean of the number of distinct latents, `M (1 - ((M - 1) / M)^N)`,
/// or the approximation `M (1 - exp(-N / M))`.
pub fn prior_mean_cardinality(n: u64, m: u64, exact: bool) -> f64 {
    if m == 1 {
        return 1.0;
    }
    let (n, m) = (n as f64, m as f64);
    if exact {
        -m * (n * (-1.0 / m).ln_1p()).exp_m1()
    } else {
        -m * (-n / m).exp_m1()
    }
}

/// Smallest `M` with exact prior mean at least `target - tolerance`.
pub fn solve_m_for_target_mean(n: u64, target: f64, tolerance: f64) -> Result<u64> {
    if n == 0 {
        return Err(Error::Config("N must be at least 1".into()));
    }
    if !(target >= 1.0) || !(tolerance >= 0.0) {
        return Err(Error::Config(format!("target mean {target} must be at least 1, tolerance non-negative")));
    }
    if target > n as f64 {
        return Err(Error::Infeasible(format!("target mean {target} exceeds N = {n}")));
    }
    let goal = target - tolerance;
    if goal >= n as f64 {
        return Err(Error::Infeasible(format!(
            "prior mean reaches N = {n} only as M grows without bound; loosen the tolerance"
        )));
    }
    let mean = |m: u64| prior_mean_cardinality(n, m, true);
    let mut hi = 1u64;
    while mean(hi) < goal {
        if hi >= 1 << 62 {
            return Err(Error::Infeasible(format!("no M below 2^62 reaches mean {goal}")));
        }
        hi *= 2;
    }
    let mut lo = hi / 2;
    // invariant: mean(lo) < goal <= mean(hi), or lo == 0
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if mean(mid) >= goal {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
