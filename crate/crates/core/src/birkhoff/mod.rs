//! Birkhoff sums `T_N = sum_{n=1}^N F(S_n)` along sampled walks.
//!
//! Sums are streamed: only the checkpoint values are kept. Occupation times
//! of drifting walks and the block events of the ocean observable live in
//! the submodules.

mod events;
mod occupation;

pub use events::{ocean_event_check, ocean_event_scan, EventCheck, EventScanRow};
pub use occupation::{
    certify_horizon, occupation_covariance, occupation_samples, run_occupation, site_occupation,
    CovarianceReport, OccupationPlan, OccupationRun, OccupationTally, SiteOccupation,
};

use serde::{Deserialize, Serialize};

use crate::error::{Result, WalkError};
use crate::lattice_walk::{StepLaw, Walker};
use crate::numeric::CompensatedSum;
use crate::observables::Observable;
use crate::rng::{stream_rng, streams};

/// `T_n` and `S_n` at a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub n: u64,
    pub t: f64,
    pub position: Vec<i64>,
}

/// Running Birkhoff sum with a checkpoint schedule.
#[derive(Debug, Clone)]
pub struct BirkhoffAccumulator {
    sum: CompensatedSum,
    n: u64,
    checkpoints: Vec<u64>,
    next: usize,
    records: Vec<CheckpointRecord>,
}

impl BirkhoffAccumulator {
    /// The schedule must be strictly increasing. A checkpoint at 0 records `T_0 = 0`.
    pub fn new(checkpoints: Vec<u64>, start: &[i64]) -> Result<Self> {
        check_schedule(&checkpoints)?;
        let mut acc = Self {
            sum: CompensatedSum::new(),
            n: 0,
            checkpoints,
            next: 0,
            records: Vec::new(),
        };
        acc.record_if_due(start);
        Ok(acc)
    }

    fn record_if_due(&mut self, pos: &[i64]) {
        if self.checkpoints.get(self.next) == Some(&self.n) {
            self.records.push(CheckpointRecord {
                n: self.n,
                t: self.sum.value(),
                position: pos.to_vec(),
            });
            self.next += 1;
        }
    }

    /// Add `F(S_n)` for the next time step.
    #[inline]
    pub fn push(&mut self, value: f64, pos: &[i64]) {
        self.sum.add(value);
        self.n += 1;
        self.record_if_due(pos);
    }

    pub fn value(&self) -> f64 {
        self.sum.value()
    }

    pub fn steps(&self) -> u64 {
        self.n
    }

    /// Last checkpoint, the number of steps needed.
    pub fn horizon(&self) -> u64 {
        self.checkpoints.last().copied().unwrap_or(0)
    }

    pub fn is_done(&self) -> bool {
        self.next == self.checkpoints.len()
    }

    pub fn into_records(self) -> Vec<CheckpointRecord> {
        self.records
    }
}

fn check_schedule(checkpoints: &[u64]) -> Result<()> {
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(WalkError::InvalidParameter("checkpoints must be strictly increasing".into()));
    }
    Ok(())
}

/// Birkhoff sums of one trial of the walk keyed by `(seed, trial)`.
pub fn run_birkhoff(
    law: &StepLaw,
    f: &Observable,
    seed: u64,
    trial: u64,
    checkpoints: &[u64],
) -> Result<Vec<CheckpointRecord>> {
    if law.dim() != f.dim() {
        return Err(WalkError::DimensionMismatch {
            expected: law.dim(),
            got: f.dim(),
        });
    }
    let mut walker = Walker::new(law, stream_rng(seed, trial, streams::STEPS));
    let mut acc = BirkhoffAccumulator::new(checkpoints.to_vec(), walker.position())?;
    let horizon = acc.horizon();
    if law.dim() == 1 {
        let mut pos = [0i64];
        while walker.time() < horizon {
            pos[0] = walker.step_1d();
            acc.push(f.eval_1d(pos[0]), &pos);
        }
    } else {
        while walker.time() < horizon {
            let pos = walker.step();
            let v = f.eval(pos);
            acc.push(v, pos);
        }
    }
    Ok(acc.into_records())
}

/// `floor(theta^k)` for all k, restricted to `[first, last]`, deduplicated,
/// with `last` appended if missing.
pub fn geometric_checkpoints(first: u64, last: u64, theta: f64) -> Result<Vec<u64>> {
    if !(theta > 1.0) || first == 0 || first > last {
        return Err(WalkError::InvalidParameter(format!(
            "geometric schedule needs theta > 1 and 1 <= first <= last (theta {theta}, {first}..{last})"
        )));
    }
    let mut out: Vec<u64> = Vec::new();
    let mut k = 0i32;
    loop {
        let v = theta.powi(k).floor();
        k += 1;
        if v > last as f64 {
            break;
        }
        let v = v as u64;
        if v >= first && out.last() != Some(&v) {
            out.push(v);
        }
    }
    if out.last() != Some(&last) {
        out.push(last);
    }
    Ok(out)
}

/// `2^k` for `k = k0..=k1`.
pub fn dyadic_checkpoints(k0: u32, k1: u32) -> Vec<u64> {
    (k0..=k1.min(63)).map(|k| 1u64 << k).collect()
}
