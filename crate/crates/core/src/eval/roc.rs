use serde::{Deserialize, Serialize};

use crate::data::GroundTruth;
use crate::error::{Error, Result};
use crate::posterior::MpmmsTable;

use super::{error_report, ErrorReport, LinkSet};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub report: ErrorReport,
}

/// Error rates of the thresholded shared-MPMMS estimate at each threshold
/// (ascending).
pub fn roc_sweep(table: &MpmmsTable, truth: &GroundTruth, thresholds: &[f64]) -> Result<Vec<RocPoint>> {
    if thresholds.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::Contract("thresholds must be sorted ascending".into()));
    }
    thresholds
        .iter()
        .map(|&v| {
            let est = table.shared_estimate(Some(v));
            Ok(RocPoint {
                threshold: v,
                report: error_report(&LinkSet::Partition(est.labels), truth)?,
            })
        })
        .collect()
}
