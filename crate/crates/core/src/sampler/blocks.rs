use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{RecordCoord, RecordId, RecordTable};
use crate::error::{Error, Result};

/// Records grouped by exact agreement on a set of key fields.
///
/// Blocks are ordered by key (lexicographic on codes) and hold record ids in
/// ascending order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPartition {
    pub key_fields: Vec<usize>,
    pub blocks: Vec<Block>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub key: Vec<u32>,
    pub records: Vec<RecordId>,
}

impl BlockPartition {
    /// Everything in one block.
    pub fn single(data: &RecordTable) -> Self {
        Self {
            key_fields: Vec::new(),
            blocks: vec![Block {
                key: Vec::new(),
                records: (0..data.n_records()).collect(),
            }],
        }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Block index of every record.
    pub fn assignment(&self, n_records: usize) -> Vec<usize> {
        let mut out = vec![usize::MAX; n_records];
        for (b, block) in self.blocks.iter().enumerate() {
            for &r in &block.records {
                out[r] = b;
            }
        }
        out
    }

    pub fn coordinates(&self, data: &RecordTable) -> Vec<Vec<RecordCoord>> {
        self.blocks
            .iter()
            .map(|b| b.records.iter().map(|&r| data.coord(r)).collect())
            .collect()
    }

    /// Checks that the blocks partition `0..n_records` and agree on the keys.
    pub fn validate(&self, data: &RecordTable) -> Result<()> {
        let mut seen = vec![false; data.n_records()];
        for block in &self.blocks {
            for &r in &block.records {
                if r >= seen.len() || std::mem::replace(&mut seen[r], true) {
                    return Err(Error::Contract(format!("record {r} missing or repeated in blocks")));
                }
                let key: Vec<u32> = self.key_fields.iter().map(|&l| data.value(r, l)).collect();
                if key != block.key {
                    return Err(Error::Contract(format!("record {r} does not match its block key")));
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Contract("blocks do not cover every record".into()));
        }
        Ok(())
    }
}

/// Exact-key blocking. An empty key set gives a single block.
pub fn build_blocks(data: &RecordTable, key_fields: &[usize]) -> Result<BlockPartition> {
    for &l in key_fields {
        if l >= data.p() {
            return Err(Error::Schema(format!("block key field {l} out of range (p = {})", data.p())));
        }
    }
    let mut map: BTreeMap<Vec<u32>, Vec<RecordId>> = BTreeMap::new();
    for r in 0..data.n_records() {
        let key = key_fields.iter().map(|&l| data.value(r, l)).collect();
        map.entry(key).or_default().push(r);
    }
    Ok(BlockPartition {
        key_fields: key_fields.to_vec(),
        blocks: map.into_iter().map(|(key, records)| Block { key, records }).collect(),
    })
}
