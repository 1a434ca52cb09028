//! Records to training samples: alignment, split by pair and window extraction.

use std::collections::BTreeSet;

use gripcast_core::{align_handover, extract_samples, split_by_pair, HandoverRecord, SamplingPolicy, TrainingSample};

use crate::error::{CliError, CliResult};

/// Samples of both sides of a pair split.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSamples {
    pub train: Vec<TrainingSample>,
    pub test: Vec<TrainingSample>,
    pub train_pairs: BTreeSet<u32>,
    pub test_pairs: BTreeSet<u32>,
}

pub fn pair_ids(records: &[HandoverRecord]) -> BTreeSet<u32> {
    records.iter().map(|r| r.pair_id).collect()
}

/// Aligns every record, splits on `test_pairs` and extracts windows.
pub fn prepare(
    records: &[HandoverRecord],
    test_pairs: &BTreeSet<u32>,
    policy: &SamplingPolicy,
) -> CliResult<SplitSamples> {
    let present = pair_ids(records);
    if let Some(missing) = test_pairs.iter().find(|p| !present.contains(p)) {
        return Err(CliError::Data(format!(
            "test pair {missing} does not occur in the data (pairs present: {present:?})"
        )));
    }
    let aligned = records
        .iter()
        .map(|r| {
            align_handover(r).map_err(|e| {
                CliError::Data(format!("pair {}, handover {}: {e}", r.pair_id, r.handover_id))
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let (train, test) = split_by_pair(aligned, test_pairs)?;
    let extract = |side: &[HandoverRecord]| -> CliResult<Vec<TrainingSample>> {
        let mut out = Vec::new();
        for r in side {
            out.extend(extract_samples(r, policy)?);
        }
        Ok(out)
    };
    Ok(SplitSamples {
        train_pairs: pair_ids(&train),
        test_pairs: pair_ids(&test),
        train: extract(&train)?,
        test: extract(&test)?,
    })
}
