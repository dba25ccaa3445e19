//! Unnormalized joint posterior and the full conditionals of `beta`, `theta`,
//! `y`, `z`, plus the support check for `lambda`.

use rand::Rng;

use super::dist::{beta_draw, categorical_draw, dirichlet_draw, xlogy};
use super::state::{LatentId, Linkage, LinkageState};
use super::{Hyperparameters, LinkageMode};
use crate::data::RecordTable;
use crate::error::{Error, Result};

/// Counts that `theta_l` and `beta_l` depend on.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FieldStats {
    /// `#{j' active : y_j'l = m}`
    pub latent_counts: Vec<u64>,
    /// `#{(i,j) : z_ijl = 1, x_ijl = m}`
    pub distorted_counts: Vec<u64>,
    /// `sum z_ijl`
    pub distorted: u64,
    /// number of records contributing cells
    pub cells: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SufficientStats {
    pub fields: Vec<FieldStats>,
}

impl SufficientStats {
    pub fn empty(levels: &[u32]) -> Self {
        Self {
            fields: levels
                .iter()
                .map(|&m| FieldStats {
                    latent_counts: vec![0; m as usize],
                    distorted_counts: vec![0; m as usize],
                    distorted: 0,
                    cells: 0,
                })
                .collect(),
        }
    }

    pub fn collect(linkage: &Linkage, data: &RecordTable) -> Self {
        let mut stats = Self::empty(data.schema().levels());
        for c in linkage.active_latents() {
            for (l, &v) in linkage.y(c).iter().enumerate() {
                stats.fields[l].latent_counts[v as usize] += 1;
            }
        }
        for r in 0..data.n_records() {
            let x = data.record(r);
            for (l, f) in stats.fields.iter_mut().enumerate() {
                f.cells += 1;
                if linkage.z(r, l) {
                    f.distorted += 1;
                    f.distorted_counts[x[l] as usize] += 1;
                }
            }
        }
        stats
    }

    /// Accumulate counts from a disjoint set of records.
    pub fn add(&mut self, other: &Self) {
        for (f, g) in self.fields.iter_mut().zip(&other.fields) {
            for (a, b) in f.latent_counts.iter_mut().zip(&g.latent_counts) {
                *a += b;
            }
            for (a, b) in f.distorted_counts.iter_mut().zip(&g.distorted_counts) {
                *a += b;
            }
            f.distorted += g.distorted;
            f.cells += g.cells;
        }
    }
}

/// `beta_l ~ Beta(a_l + sum z, b_l + sum (1 - z))`; exactly zero when `b_l` is infinite.
pub fn draw_beta<R: Rng + ?Sized>(stats: &SufficientStats, hp: &Hyperparameters, rng: &mut R) -> Vec<f64> {
    stats
        .fields
        .iter()
        .enumerate()
        .map(|(l, f)| {
            if hp.distortion_disabled(l) {
                0.0
            } else {
                let z = f.distorted as f64;
                beta_draw(hp.a[l] + z, hp.b[l] + (f.cells as f64 - z), rng)
            }
        })
        .collect()
}

/// `theta_l ~ Dirichlet(mu_lm + #{y = m} + #{z = 1, x = m})`.
pub fn draw_theta<R: Rng + ?Sized>(
    stats: &SufficientStats,
    hp: &Hyperparameters,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    stats
        .fields
        .iter()
        .zip(&hp.mu)
        .map(|(f, mu)| {
            let alpha: Vec<f64> = mu
                .iter()
                .zip(f.latent_counts.iter().zip(&f.distorted_counts))
                .map(|(&m, (&y, &d))| m + (y + d) as f64)
                .collect();
            dirichlet_draw(&alpha, rng)
        })
        .collect()
}

pub fn sample_beta<R: Rng + ?Sized>(
    state: &mut LinkageState,
    data: &RecordTable,
    hp: &Hyperparameters,
    rng: &mut R,
) {
    let stats = SufficientStats::collect(&state.linkage, data);
    state.params.beta = draw_beta(&stats, hp, rng);
}

pub fn sample_theta<R: Rng + ?Sized>(
    state: &mut LinkageState,
    data: &RecordTable,
    hp: &Hyperparameters,
    rng: &mut R,
) {
    let stats = SufficientStats::collect(&state.linkage, data);
    state.params.theta = draw_theta(&stats, hp, rng);
}

/// Resample every active latent's values. A field is pinned to the record
/// value when some linked record is undistorted there, otherwise drawn from
/// `theta_l`.
pub fn sample_y<R: Rng + ?Sized>(
    linkage: &mut Linkage,
    theta: &[Vec<f64>],
    data: &RecordTable,
    rng: &mut R,
) -> Result<()> {
    let p = data.p();
    let latents: Vec<LatentId> = linkage.active_latents().collect();
    for c in latents {
        for l in 0..p {
            let mut forced: Option<u32> = None;
            for &r in linkage.members(c) {
                let r = r as usize;
                if !linkage.z(r, l) {
                    let x = data.value(r, l);
                    match forced {
                        None => forced = Some(x),
                        Some(v) if v != x => {
                            return Err(Error::Invariant(format!(
                                "latent {c} has undistorted records disagreeing on field {l} ({v} vs {x})"
                            )))
                        }
                        Some(_) => {}
                    }
                }
            }
            let v = match forced {
                Some(v) => v,
                None => categorical_draw(&theta[l], rng) as u32,
            };
            linkage.set_y(c, l, v);
        }
    }
    Ok(())
}

/// `P(z = 1)` for a cell: one on mismatch, otherwise
/// `beta theta[x] / (beta theta[x] + 1 - beta)`.
#[inline]
pub fn z_probability(x: u32, y: u32, theta: &[f64], beta: f64) -> f64 {
    if x != y {
        1.0
    } else {
        let w = beta * theta[x as usize];
        if w == 0.0 {
            0.0
        } else {
            w / (w + (1.0 - beta))
        }
    }
}

pub fn sample_z<R: Rng + ?Sized>(
    linkage: &mut Linkage,
    theta: &[Vec<f64>],
    beta: &[f64],
    data: &RecordTable,
    rng: &mut R,
) {
    let p = data.p();
    for r in 0..data.n_records() {
        let c = linkage.latent_of(r);
        for l in 0..p {
            let x = data.value(r, l);
            let y = linkage.y(c)[l];
            let z = if x != y {
                true
            } else {
                let q = z_probability(x, y, &theta[l], beta[l]);
                q > 0.0 && rng.random::<f64>() < q
            };
            linkage.set_z(r, l, z);
        }
    }
}

fn check_dims(state: &LinkageState, data: &RecordTable, hp: &Hyperparameters) -> Result<()> {
    hp.validate(data.schema())?;
    let l = &state.linkage;
    if l.n_records() != data.n_records() || l.p() != data.p() {
        return Err(Error::Dimension(format!(
            "state covers {} records x {} fields, data has {} x {}",
            l.n_records(),
            l.p(),
            data.n_records(),
            data.p()
        )));
    }
    let (theta, beta) = (&state.params.theta, &state.params.beta);
    if theta.len() != data.p() || beta.len() != data.p() {
        return Err(Error::Dimension("theta/beta field count differs from schema".into()));
    }
    for (t, &m) in theta.iter().zip(data.schema().levels()) {
        if t.len() != m as usize {
            return Err(Error::Dimension(format!("theta has {} levels, field has {m}", t.len())));
        }
    }
    Ok(())
}

/// Unnormalized log posterior `log pi(lambda, y, z, theta, beta | x)`:
///
/// ```text
///   sum_cells  log[(1 - z) delta_y(x) + z theta_l[x]]
/// + sum_{l,m} (mu_lm - 1 + #{y_j'l = m}) log theta_lm
/// + sum_l (a_l - 1 + Z_l) log beta_l + (b_l - 1 + n - Z_l) log(1 - beta_l)
/// ```
///
/// Zero-probability states give `-inf`. Fields with infinite `b_l` contribute
/// nothing when `beta_l = 0` and no cell is distorted, `-inf` otherwise.
pub fn log_joint(state: &LinkageState, data: &RecordTable, hp: &Hyperparameters) -> Result<f64> {
    check_dims(state, data, hp)?;
    let linkage = &state.linkage;
    let (theta, beta) = (&state.params.theta, &state.params.beta);
    let p = data.p();

    let mut total = 0.0;
    let mut latent_counts: Vec<Vec<u64>> = theta.iter().map(|t| vec![0; t.len()]).collect();
    for c in linkage.active_latents() {
        for (l, &v) in linkage.y(c).iter().enumerate() {
            latent_counts[l][v as usize] += 1;
        }
    }
    let mut distorted = vec![0u64; p];
    for r in 0..data.n_records() {
        let y = linkage.y(linkage.latent_of(r));
        for l in 0..p {
            let x = data.value(r, l);
            if linkage.z(r, l) {
                distorted[l] += 1;
                total += theta[l][x as usize].ln();
            } else if x != y[l] {
                return Ok(f64::NEG_INFINITY);
            }
        }
    }
    for l in 0..p {
        for (m, &count) in latent_counts[l].iter().enumerate() {
            total += xlogy(hp.mu[l][m] - 1.0 + count as f64, theta[l][m]);
        }
        let n = data.n_records() as f64;
        let z = distorted[l] as f64;
        if hp.distortion_disabled(l) {
            if beta[l] != 0.0 || distorted[l] > 0 {
                return Ok(f64::NEG_INFINITY);
            }
        } else {
            total += xlogy(hp.a[l] - 1.0 + z, beta[l]) + xlogy(hp.b[l] - 1.0 + n - z, 1.0 - beta[l]);
        }
    }
    Ok(if total.is_nan() { f64::NEG_INFINITY } else { total })
}

/// Per-file feasibility of a candidate assignment `candidate[r]` given the
/// current `y` and `z`: a file is infeasible when an undistorted cell disagrees
/// with its candidate latent, or (in [`LinkageMode::Smere`]) when two of its
/// records share a latent. Candidate ids must be active latents of `linkage`.
pub fn lambda_support_check(
    linkage: &Linkage,
    candidate: &[LatentId],
    data: &RecordTable,
    mode: LinkageMode,
) -> Result<Vec<bool>> {
    if candidate.len() != data.n_records() || linkage.n_records() != data.n_records() {
        return Err(Error::Dimension(format!(
            "candidate has {} entries for {} records",
            candidate.len(),
            data.n_records()
        )));
    }
    let mut feasible = vec![true; data.k()];
    for (file, ok) in feasible.iter_mut().enumerate() {
        let mut seen = std::collections::HashSet::new();
        for r in data.file_range(file) {
            let c = candidate[r];
            if c as usize >= linkage.capacity() || !linkage.is_active(c) {
                return Err(Error::Contract(format!("candidate latent {c} has no latent values")));
            }
            let y = linkage.y(c);
            let x = data.record(r);
            if (0..data.p()).any(|l| !linkage.z(r, l) && x[l] != y[l]) {
                *ok = false;
            }
            if mode == LinkageMode::Smere && !seen.insert(c) {
                *ok = false;
            }
        }
    }
    Ok(feasible)
}
