use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use crate::data::RecordTable;
use crate::error::{Error, Result};

/// Index of a latent individual, `0..N_max`.
pub type LatentId = u32;

/// Field-level parameters: `theta[l]` is a probability vector over the levels
/// of field `l`, `beta[l]` its distortion probability.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Parameters {
    pub theta: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
}

/// The linkage structure with its latent values and distortion indicators:
/// `lambda` (record -> latent), `y` (one row per active latent) and `z`
/// (record x field).
///
/// Latent ids live in `0..n_records`. Rows of `y` exist only for latents that
/// some record points at; released ids go to a min-heap so the next fresh id
/// is always the smallest unused one.
#[derive(Clone, Debug)]
pub struct Linkage {
    p: usize,
    lambda: Vec<LatentId>,
    members: Vec<Vec<u32>>,
    values: Vec<u32>,
    z: Vec<bool>,
    free: BinaryHeap<Reverse<LatentId>>,
    active: usize,
}

impl PartialEq for Linkage {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p
            && self.lambda == other.lambda
            && self.z == other.z
            && self.members == other.members
            && self.active_latents().all(|c| self.y(c) == other.y(c))
    }
}

impl Linkage {
    /// Every record its own latent, `y` copied from the record, no distortion.
    pub fn singletons(data: &RecordTable) -> Self {
        let n = data.n_records();
        let p = data.p();
        Self {
            p,
            lambda: (0..n as LatentId).collect(),
            members: (0..n as u32).map(|r| vec![r]).collect(),
            values: data.cells().to_vec(),
            z: vec![false; n * p],
            free: BinaryHeap::new(),
            active: n,
        }
    }

    /// Assemble from explicit parts. `y` must hold a row for every latent id
    /// referenced by `lambda`; extra rows are ignored.
    pub fn from_parts(
        data: &RecordTable,
        lambda: Vec<LatentId>,
        y: &BTreeMap<LatentId, Vec<u32>>,
        z: Vec<bool>,
    ) -> Result<Self> {
        let n = data.n_records();
        let p = data.p();
        if lambda.len() != n {
            return Err(Error::Dimension(format!("lambda has {} entries for {n} records", lambda.len())));
        }
        if z.len() != n * p {
            return Err(Error::Dimension(format!("z has {} cells, expected {}", z.len(), n * p)));
        }
        let mut members = vec![Vec::new(); n];
        for (r, &c) in lambda.iter().enumerate() {
            if c as usize >= n {
                return Err(Error::Dimension(format!("latent id {c} outside 0..{n}")));
            }
            members[c as usize].push(r as u32);
        }
        let mut values = vec![0u32; n * p];
        let mut free = BinaryHeap::new();
        let mut active = 0;
        for (c, m) in members.iter().enumerate() {
            if m.is_empty() {
                free.push(Reverse(c as LatentId));
                continue;
            }
            active += 1;
            let row = y
                .get(&(c as LatentId))
                .ok_or_else(|| Error::Dimension(format!("no latent values for active latent {c}")))?;
            if row.len() != p {
                return Err(Error::Dimension(format!("latent {c} has {} fields, expected {p}", row.len())));
            }
            for (l, &v) in row.iter().enumerate() {
                if v >= data.schema().level_count(l) {
                    return Err(Error::Dimension(format!("latent {c} field {l} code {v} out of range")));
                }
            }
            values[c * p..(c + 1) * p].copy_from_slice(row);
        }
        Ok(Self {
            p,
            lambda,
            members,
            values,
            z,
            free,
            active,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n_records(&self) -> usize {
        self.lambda.len()
    }

    /// Size of the latent id space (equal to the record count).
    pub fn capacity(&self) -> usize {
        self.members.len()
    }

    /// `N`, the number of latents with at least one record.
    pub fn active_count(&self) -> usize {
        self.active
    }

    pub fn lambda(&self) -> &[LatentId] {
        &self.lambda
    }

    #[inline]
    pub fn latent_of(&self, record: usize) -> LatentId {
        self.lambda[record]
    }

    pub fn is_active(&self, latent: LatentId) -> bool {
        !self.members[latent as usize].is_empty()
    }

    pub fn active_latents(&self) -> impl Iterator<Item = LatentId> + '_ {
        self.members
            .iter()
            .enumerate()
            .filter(|(_, m)| !m.is_empty())
            .map(|(c, _)| c as LatentId)
    }

    /// Records linked to `latent` (the sets `R_ij'` over all files).
    pub fn members(&self, latent: LatentId) -> &[u32] {
        &self.members[latent as usize]
    }

    pub fn y(&self, latent: LatentId) -> &[u32] {
        let c = latent as usize;
        &self.values[c * self.p..(c + 1) * self.p]
    }

    pub fn set_y(&mut self, latent: LatentId, field: usize, value: u32) {
        self.values[latent as usize * self.p + field] = value;
    }

    #[inline]
    pub fn z(&self, record: usize, field: usize) -> bool {
        self.z[record * self.p + field]
    }

    pub fn z_row(&self, record: usize) -> &[bool] {
        &self.z[record * self.p..(record + 1) * self.p]
    }

    pub fn z_cells(&self) -> &[bool] {
        &self.z
    }

    #[inline]
    pub fn set_z(&mut self, record: usize, field: usize, value: bool) {
        self.z[record * self.p + field] = value;
    }

    /// `z_ijl = 0` implies `y_{lambda_ij, l} = x_ijl` for every cell.
    pub fn check_coupling(&self, data: &RecordTable) -> bool {
        (0..self.n_records()).all(|r| {
            let y = self.y(self.lambda[r]);
            let x = data.record(r);
            (0..self.p).all(|l| self.z(r, l) || x[l] == y[l])
        })
    }

    /// `lambda` relabelled by order of first appearance.
    pub fn canonical_lambda(&self) -> Vec<LatentId> {
        canonicalize(&self.lambda)
    }

    /// Replace the latents in `old` by `clusters` (members, y row, z rows in
    /// member order). Cluster `i` reuses `old[i]` when there is one, otherwise
    /// takes the smallest free id; leftover old ids are released. Returns the
    /// ids assigned to the clusters.
    pub fn reassign(&mut self, old: &[LatentId], clusters: Vec<ClusterParts>) -> Vec<LatentId> {
        debug_assert_eq!(
            old.iter().map(|&c| self.members[c as usize].len()).sum::<usize>(),
            clusters.iter().map(|c| c.members.len()).sum::<usize>()
        );
        for &c in old {
            self.members[c as usize].clear();
            self.active -= 1;
        }
        let mut ids = Vec::with_capacity(clusters.len());
        for (i, cluster) in clusters.into_iter().enumerate() {
            let id = match old.get(i) {
                Some(&c) => c,
                None => self.free.pop().expect("latent id space exhausted").0,
            };
            let c = id as usize;
            self.values[c * self.p..(c + 1) * self.p].copy_from_slice(&cluster.values);
            for (k, &r) in cluster.members.iter().enumerate() {
                self.lambda[r as usize] = id;
                let r = r as usize;
                self.z[r * self.p..(r + 1) * self.p]
                    .copy_from_slice(&cluster.z[k * self.p..(k + 1) * self.p]);
            }
            self.members[c] = cluster.members;
            self.active += 1;
            ids.push(id);
        }
        for &c in old.iter().skip(ids.len()) {
            self.free.push(Reverse(c));
        }
        ids
    }
}

/// One latent's worth of proposed state.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterParts {
    pub members: Vec<u32>,
    pub values: Vec<u32>,
    /// `members.len() * p` indicators, member-major.
    pub z: Vec<bool>,
}

pub(crate) fn canonicalize(lambda: &[LatentId]) -> Vec<LatentId> {
    let mut map = std::collections::HashMap::new();
    lambda
        .iter()
        .map(|&c| {
            let next = map.len() as LatentId;
            *map.entry(c).or_insert(next)
        })
        .collect()
}

/// The full parameter vector of the model.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkageState {
    pub linkage: Linkage,
    pub params: Parameters,
}
