//! Categorical record tables spread over `k` files.
//!
//! Records are addressed two ways: by a global [`RecordId`] (file-major order,
//! `0..N_max`) and by a [`RecordCoord`] `(file, row)`. Field values are dense
//! 0-based category codes; the label dictionary lives with ingestion.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Global record index, file-major.
pub type RecordId = usize;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSchema {
    names: Vec<String>,
    levels: Vec<u32>,
}

impl FieldSchema {
    pub fn new(names: Vec<String>, levels: Vec<u32>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Schema("at least one field is required".into()));
        }
        if names.len() != levels.len() {
            return Err(Error::Schema(format!(
                "{} field names for {} fields",
                names.len(),
                levels.len()
            )));
        }
        if let Some((l, m)) = levels.iter().enumerate().find(|(_, &m)| m < 2) {
            return Err(Error::Schema(format!(
                "field {} has {m} levels, need at least 2",
                names[l]
            )));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema(format!("duplicate field name {name:?}")));
            }
        }
        Ok(Self { names, levels })
    }

    /// Schema with generated names `f1..fp`.
    pub fn anonymous(levels: Vec<u32>) -> Result<Self> {
        let names = (1..=levels.len()).map(|l| format!("f{l}")).collect();
        Self::new(names, levels)
    }

    pub fn p(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    pub fn level_count(&self, field: usize) -> u32 {
        self.levels[field]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// `(file, row)` address of a record, both 0-based. Displays as the 1-based
/// `file.row` form used in reports and graph exports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RecordCoord {
    pub file: usize,
    pub row: usize,
}

impl fmt::Display for RecordCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.file + 1, self.row + 1)
    }
}

impl FromStr for RecordCoord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Format {
            what: "record coordinate",
            message: format!("expected FILE.ROW (1-based), got {s:?}"),
        };
        let (file, row) = s.trim().split_once('.').ok_or_else(bad)?;
        let file: usize = file.parse().map_err(|_| bad())?;
        let row: usize = row.parse().map_err(|_| bad())?;
        if file == 0 || row == 0 {
            return Err(bad());
        }
        Ok(Self {
            file: file - 1,
            row: row - 1,
        })
    }
}

/// Observed categorical data `x_ijl`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecordTable {
    schema: FieldSchema,
    /// `offsets[i]..offsets[i + 1]` are the global ids of file `i`.
    offsets: Vec<usize>,
    cells: Vec<u32>,
}

impl RecordTable {
    /// Build from `files[i][j][l]`.
    pub fn new(schema: FieldSchema, files: Vec<Vec<Vec<u32>>>) -> Result<Self> {
        let sizes: Vec<usize> = files.iter().map(Vec::len).collect();
        let p = schema.p();
        let mut cells = Vec::with_capacity(sizes.iter().sum::<usize>() * p);
        for (i, file) in files.into_iter().enumerate() {
            for (j, record) in file.into_iter().enumerate() {
                if record.len() != p {
                    return Err(Error::Dimension(format!(
                        "record {} has {} fields, schema has {p}",
                        RecordCoord { file: i, row: j },
                        record.len()
                    )));
                }
                cells.extend(record);
            }
        }
        Self::from_flat(schema, &sizes, cells)
    }

    /// Build from record-major cells with `sizes[i]` records in file `i`.
    pub fn from_flat(schema: FieldSchema, sizes: &[usize], cells: Vec<u32>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::Dimension("at least one file is required".into()));
        }
        let n: usize = sizes.iter().sum();
        if n == 0 {
            return Err(Error::Dimension("table has no records".into()));
        }
        let p = schema.p();
        if cells.len() != n * p {
            return Err(Error::Dimension(format!(
                "{} cells for {n} records of {p} fields",
                cells.len()
            )));
        }
        for (idx, &v) in cells.iter().enumerate() {
            let l = idx % p;
            if v >= schema.levels[l] {
                return Err(Error::Dimension(format!(
                    "record {} field {} has code {v} outside 0..{}",
                    idx / p,
                    schema.names[l],
                    schema.levels[l]
                )));
            }
        }
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        offsets.push(0);
        for &s in sizes {
            offsets.push(offsets.last().unwrap() + s);
        }
        Ok(Self {
            schema,
            offsets,
            cells,
        })
    }

    pub fn schema(&self) -> &FieldSchema {
        &self.schema
    }

    pub fn k(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn p(&self) -> usize {
        self.schema.p()
    }

    /// `N_max`, the total record count.
    pub fn n_records(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn file_sizes(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn file_range(&self, file: usize) -> std::ops::Range<usize> {
        self.offsets[file]..self.offsets[file + 1]
    }

    pub fn file_of(&self, record: RecordId) -> usize {
        // offsets is sorted; partition_point finds the first offset > record
        self.offsets.partition_point(|&o| o <= record) - 1
    }

    pub fn coord(&self, record: RecordId) -> RecordCoord {
        let file = self.file_of(record);
        RecordCoord {
            file,
            row: record - self.offsets[file],
        }
    }

    pub fn record_id(&self, coord: RecordCoord) -> Option<RecordId> {
        if coord.file >= self.k() {
            return None;
        }
        let r = self.offsets[coord.file] + coord.row;
        (r < self.offsets[coord.file + 1]).then_some(r)
    }

    pub fn record(&self, record: RecordId) -> &[u32] {
        let p = self.p();
        &self.cells[record * p..(record + 1) * p]
    }

    #[inline]
    pub fn value(&self, record: RecordId, field: usize) -> u32 {
        self.cells[record * self.p() + field]
    }

    pub fn cells(&self) -> &[u32] {
        &self.cells
    }

    /// Sub-table over `records` (ascending global ids). Keeps all `k` files so
    /// file indices stay comparable; files without selected records are empty.
    pub fn subset(&self, records: &[RecordId]) -> Result<Self> {
        if records.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Contract("subset records must be strictly ascending".into()));
        }
        let mut sizes = vec![0usize; self.k()];
        let mut cells = Vec::with_capacity(records.len() * self.p());
        for &r in records {
            if r >= self.n_records() {
                return Err(Error::Dimension(format!("record {r} out of range")));
            }
            sizes[self.file_of(r)] += 1;
            cells.extend_from_slice(self.record(r));
        }
        Self::from_flat(self.schema.clone(), &sizes, cells)
    }
}

/// File boundaries of the global record numbering, without the data.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FileLayout {
    offsets: Vec<usize>,
}

impl FileLayout {
    pub fn new(sizes: &[usize]) -> Self {
        let mut offsets = vec![0];
        for s in sizes {
            offsets.push(offsets.last().unwrap() + s);
        }
        Self { offsets }
    }

    pub fn k(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn n_records(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn file_of(&self, record: RecordId) -> usize {
        self.offsets.partition_point(|&o| o <= record) - 1
    }

    pub fn coord(&self, record: RecordId) -> RecordCoord {
        let file = self.file_of(record);
        RecordCoord {
            file,
            row: record - self.offsets[file],
        }
    }

    pub fn record_id(&self, coord: RecordCoord) -> Option<RecordId> {
        if coord.file >= self.k() {
            return None;
        }
        let r = self.offsets[coord.file] + coord.row;
        (r < self.offsets[coord.file + 1]).then_some(r)
    }
}

impl From<&RecordTable> for FileLayout {
    fn from(t: &RecordTable) -> Self {
        Self {
            offsets: t.offsets.clone(),
        }
    }
}

/// True individual of each record, when known.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroundTruth {
    ids: Vec<Option<u32>>,
}

impl GroundTruth {
    pub fn new(ids: Vec<Option<u32>>) -> Self {
        Self { ids }
    }

    /// Dense ids from arbitrary labels, numbered by first appearance.
    pub fn from_labels<S: AsRef<str>>(labels: &[Option<S>]) -> Self {
        let mut map = std::collections::HashMap::new();
        let ids = labels
            .iter()
            .map(|l| {
                l.as_ref().map(|l| {
                    let next = map.len() as u32;
                    *map.entry(l.as_ref().to_string()).or_insert(next)
                })
            })
            .collect();
        Self { ids }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn id(&self, record: RecordId) -> Option<u32> {
        self.ids[record]
    }

    pub fn ids(&self) -> &[Option<u32>] {
        &self.ids
    }

    pub fn missing(&self) -> usize {
        self.ids.iter().filter(|i| i.is_none()).count()
    }

    /// Records grouped by true id, ascending; records without an id are left out.
    pub fn clusters(&self) -> Vec<Vec<RecordId>> {
        let mut map: std::collections::BTreeMap<u32, Vec<RecordId>> = Default::default();
        for (r, id) in self.ids.iter().enumerate() {
            if let Some(id) = id {
                map.entry(*id).or_default().push(r);
            }
        }
        let mut out: Vec<_> = map.into_values().collect();
        out.sort();
        out
    }

    /// Number of unordered record pairs sharing a true id.
    pub fn link_count(&self) -> u64 {
        self.clusters().iter().map(|c| (c.len() * (c.len() - 1) / 2) as u64).sum()
    }

    pub fn same(&self, a: RecordId, b: RecordId) -> bool {
        matches!((self.ids[a], self.ids[b]), (Some(x), Some(y)) if x == y)
    }
}
