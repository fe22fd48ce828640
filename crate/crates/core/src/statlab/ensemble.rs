use std::collections::BTreeMap;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::birkhoff::{run_birkhoff, CheckpointRecord};
use crate::error::{Result, WalkError};
use crate::lattice_walk::StepLaw;
use crate::observables::Observable;

/// What an ensemble was run with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMeta {
    pub law: String,
    pub observable: String,
    pub checkpoints: Vec<u64>,
}

/// Per-trial checkpoint records keyed by trial index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialEnsemble {
    pub master_seed: u64,
    pub meta: EnsembleMeta,
    records: BTreeMap<u64, Vec<CheckpointRecord>>,
}

impl TrialEnsemble {
    pub fn new(master_seed: u64, meta: EnsembleMeta) -> Self {
        Self {
            master_seed,
            meta,
            records: BTreeMap::new(),
        }
    }

    /// Add one trial; its records must follow the checkpoint schedule.
    pub fn insert(&mut self, trial: u64, records: Vec<CheckpointRecord>) -> Result<()> {
        let ns: Vec<u64> = records.iter().map(|r| r.n).collect();
        if ns != self.meta.checkpoints {
            return Err(WalkError::InvalidParameter(format!(
                "trial {trial} records do not follow the checkpoint schedule"
            )));
        }
        if self.records.insert(trial, records).is_some() {
            return Err(WalkError::OverlappingTrials(trial));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn trials(&self) -> impl Iterator<Item = (u64, &[CheckpointRecord])> + '_ {
        self.records.iter().map(|(&t, r)| (t, r.as_slice()))
    }

    /// Indices in `0..max+1` without a record.
    pub fn missing(&self) -> Vec<u64> {
        let Some((&max, _)) = self.records.last_key_value() else {
            return Vec::new();
        };
        (0..=max).filter(|t| !self.records.contains_key(t)).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.missing().is_empty()
    }

    /// Union of two ensembles over disjoint trial sets.
    pub fn merge(mut self, other: TrialEnsemble) -> Result<Self> {
        if self.master_seed != other.master_seed || self.meta != other.meta {
            return Err(WalkError::InvalidParameter("ensembles differ in seed or metadata".into()));
        }
        for (t, r) in other.records {
            if self.records.contains_key(&t) {
                return Err(WalkError::OverlappingTrials(t));
            }
            self.records.insert(t, r);
        }
        Ok(self)
    }

    /// `T_n` across trials in trial order.
    pub fn values_at(&self, n: u64) -> Result<Vec<f64>> {
        let i = self
            .meta
            .checkpoints
            .iter()
            .position(|&c| c == n)
            .ok_or_else(|| WalkError::InvalidParameter(format!("{n} is not a checkpoint")))?;
        Ok(self.records.values().map(|r| r[i].t).collect())
    }

    /// `(n, T_n across trials)` for every checkpoint.
    pub fn columns(&self) -> Vec<(u64, Vec<f64>)> {
        self.meta
            .checkpoints
            .iter()
            .enumerate()
            .map(|(i, &n)| (n, self.records.values().map(|r| r[i].t).collect()))
            .collect()
    }
}

/// Run trials `range` in parallel on the current rayon pool.
///
/// Each trial draws from its own stream keyed by `(seed, trial)`, so the
/// result does not depend on the number of threads or on scheduling.
pub fn run_ensemble(
    law: &StepLaw,
    f: &Observable,
    seed: u64,
    range: Range<u64>,
    checkpoints: &[u64],
) -> Result<TrialEnsemble> {
    let meta = EnsembleMeta {
        law: law.name().to_string(),
        observable: f.kind().to_string(),
        checkpoints: checkpoints.to_vec(),
    };
    let runs: Vec<(u64, Vec<CheckpointRecord>)> = range
        .into_par_iter()
        .map(|t| run_birkhoff(law, f, seed, t, checkpoints).map(|r| (t, r)))
        .collect::<Result<_>>()?;
    let mut ens = TrialEnsemble::new(seed, meta);
    for (t, r) in runs {
        ens.insert(t, r)?;
    }
    Ok(ens)
}
