use std::collections::HashMap;

use crate::data::{RecordId, RecordTable};

use super::LinkSet;

/// Link records exactly when they agree on every field.
pub fn exact_match_baseline(data: &RecordTable) -> LinkSet {
    let mut classes: HashMap<&[u32], u32> = HashMap::new();
    let labels = (0..data.n_records())
        .map(|r| {
            let next = classes.len() as u32;
            *classes.entry(data.record(r)).or_insert(next)
        })
        .collect();
    LinkSet::Partition(labels)
}

/// Link every pair agreeing on at least `p - 1` fields. The result is a raw
/// pair list with no transitive closure.
pub fn near_twins_baseline(data: &RecordTable) -> LinkSet {
    let p = data.p();
    let mut pairs = Vec::new();
    for masked in 0..p {
        let mut groups: HashMap<Vec<u32>, Vec<RecordId>> = HashMap::new();
        for r in 0..data.n_records() {
            let key: Vec<u32> =
                data.record(r).iter().enumerate().filter(|&(l, _)| l != masked).map(|(_, &v)| v).collect();
            groups.entry(key).or_default().push(r);
        }
        for members in groups.values() {
            for (i, &a) in members.iter().enumerate() {
                for &b in &members[i + 1..] {
                    // full agreement shows up under every mask; keep it once
                    if data.value(a, masked) != data.value(b, masked) || masked == 0 {
                        pairs.push((a, b));
                    }
                }
            }
        }
    }
    pairs.sort_unstable();
    LinkSet::Pairs(pairs)
}
