use serde::{Deserialize, Serialize};

use crate::data::{FileLayout, GroundTruth};
use crate::error::{Error, Result};

use super::{clusters_of, pattern_of};

/// Non-empty file subsets, by size and then lexicographically.
pub fn file_patterns(k: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = (1u32..(1 << k))
        .map(|mask| (0..k).filter(|&f| mask >> f & 1 == 1).collect())
        .collect();
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out
}

/// `"1&3"` for files 0 and 2.
pub fn pattern_label(pattern: &[usize]) -> String {
    pattern.iter().map(|f| (f + 1).to_string()).collect::<Vec<_>>().join("&")
}

/// Records cross-tabulated by estimated (rows) and true (columns) file-presence
/// pattern of their cluster, averaged over draws.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub patterns: Vec<Vec<usize>>,
    pub counts: Vec<Vec<f64>>,
    /// Records left out for lack of a true id.
    pub excluded: usize,
}

impl ConfusionMatrix {
    /// Rows scaled to sum to one; empty rows stay zero.
    pub fn normalized(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let s: f64 = row.iter().sum();
                row.iter().map(|&c| if s > 0.0 { c / s } else { 0.0 }).collect()
            })
            .collect()
    }

    /// Natural log of the row-normalized entries; `None` where the entry is zero.
    pub fn log_relative(&self) -> Vec<Vec<Option<f64>>> {
        self.normalized()
            .into_iter()
            .map(|row| row.into_iter().map(|p| (p > 0.0).then(|| p.ln())).collect())
            .collect()
    }

    pub fn labels(&self) -> Vec<String> {
        self.patterns.iter().map(|p| pattern_label(p)).collect()
    }
}

/// Confusion matrix over one or more linkages (`lambda` per draw, or the
/// labels of a point estimate).
pub fn confusion_matrix<'a>(
    lambdas: impl IntoIterator<Item = &'a [u32]>,
    truth: &GroundTruth,
    layout: &FileLayout,
) -> Result<ConfusionMatrix> {
    let n = layout.n_records();
    if truth.len() != n {
        return Err(Error::Dimension(format!("truth covers {} records, data has {n}", truth.len())));
    }
    let k = layout.k();
    if k > 16 {
        return Err(Error::Contract(format!("{k} files give too many presence patterns")));
    }
    let patterns = file_patterns(k);
    let index = |p: &[usize]| patterns.iter().position(|q| q == p).unwrap();

    let mut true_pattern = vec![usize::MAX; n];
    for cluster in truth.clusters() {
        let i = index(&pattern_of(&cluster, layout));
        for r in cluster {
            true_pattern[r] = i;
        }
    }

    let size = patterns.len();
    let mut counts = vec![vec![0.0; size]; size];
    let mut draws = 0usize;
    for lambda in lambdas {
        if lambda.len() != n {
            return Err(Error::Dimension(format!("linkage has {} labels for {n} records", lambda.len())));
        }
        draws += 1;
        for cluster in clusters_of(lambda) {
            let i = index(&pattern_of(&cluster, layout));
            for r in cluster {
                if true_pattern[r] != usize::MAX {
                    counts[i][true_pattern[r]] += 1.0;
                }
            }
        }
    }
    if draws > 1 {
        for row in &mut counts {
            for c in row {
                *c /= draws as f64;
            }
        }
    }
    Ok(ConfusionMatrix {
        patterns,
        counts,
        excluded: truth.missing(),
    })
}
