//! Events `A_n = {S_k in I_n for all k in [t_n, 3 t_n]}` of the ocean observable.
//!
//! On `A_n` the Birkhoff sum is pinned: for even n the walk spends at least
//! `2 t_n + 1` steps where F = 1, so `T_{3 t_n} >= 2 t_n`; for odd n it
//! spends them where F = 0, so `T_{3 t_n} <= t_n`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WalkError};
use crate::lattice_walk::{StepLaw, Walker};
use crate::numeric::CompensatedSum;
use crate::observables::{Observable, ObservableKind, OceanSchedule};
use crate::rng::{stream_rng, streams};

/// Outcome of one event check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventCheck {
    pub n: u64,
    pub t_n: u64,
    pub event: bool,
    /// `T_{3 t_n}` by direct summation.
    pub t_sum: f64,
    /// `None` when the event did not occur.
    pub implication: Option<bool>,
}

fn schedule_of(f: &Observable) -> Result<&OceanSchedule> {
    match f.kind() {
        ObservableKind::Ocean | ObservableKind::OceanMultidim => Ok(f.ocean_schedule().expect("ocean kinds carry a schedule")),
        k => Err(WalkError::InvalidParameter(format!("event check needs an ocean observable, got {k}"))),
    }
}

/// Check `A_n` and its implication on a path given as flattened positions
/// `S_0, S_1, ...` (stride `f.dim()`), which must reach time `3 t_n`.
pub fn ocean_event_check(f: &Observable, n: u64, positions: &[i64]) -> Result<EventCheck> {
    let s = schedule_of(f)?;
    let d = f.dim();
    let t = s.t(n)?;
    let end = t.checked_mul(3).ok_or_else(|| WalkError::Overflow("3 t_n".into()))?;
    let have = (positions.len() / d) as u64;
    if have < end + 1 {
        return Err(WalkError::IncompleteSegment {
            needed: end,
            got: have.saturating_sub(1),
        });
    }
    let (lo, hi) = s.interval(n)?;
    let w = s.half_width(n)? as i64;
    let at = |k: u64| &positions[k as usize * d..(k as usize + 1) * d];
    let event = (t..=end).all(|k| {
        let x = at(k);
        lo <= x[0] && x[0] <= hi && x[1..].iter().all(|c| c.abs() <= w)
    });
    let t_sum = (1..=end).map(|k| f.eval(at(k))).collect::<CompensatedSum>().value();
    let implication = event.then(|| {
        if n.is_multiple_of(2) {
            t_sum >= 2.0 * t as f64
        } else {
            t_sum <= t as f64
        }
    });
    Ok(EventCheck {
        n,
        t_n: t,
        event,
        t_sum,
        implication,
    })
}

/// Event frequencies over sampled paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventScanRow {
    pub n: u64,
    pub t_n: u64,
    pub trials: u64,
    pub events: u64,
    pub violations: u64,
}

/// Sample `trials` paths of length `3 t_n` for each n and count events and
/// violated implications.
pub fn ocean_event_scan(law: &StepLaw, f: &Observable, n_list: &[u64], trials: u64, seed: u64) -> Result<Vec<EventScanRow>> {
    if law.dim() != f.dim() {
        return Err(WalkError::DimensionMismatch {
            expected: law.dim(),
            got: f.dim(),
        });
    }
    let s = schedule_of(f)?;
    let d = law.dim();
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let t = s.t(n)?;
        let len = 3 * t;
        let checks: Vec<EventCheck> = (0..trials)
            .into_par_iter()
            .map(|trial| {
                let mut w = Walker::new(law, stream_rng(seed, trial, streams::STEPS));
                let mut pos = Vec::with_capacity((len as usize + 1) * d);
                pos.extend_from_slice(w.position());
                for _ in 0..len {
                    pos.extend_from_slice(w.step());
                }
                ocean_event_check(f, n, &pos)
            })
            .collect::<Result<_>>()?;
        rows.push(EventScanRow {
            n,
            t_n: t,
            trials,
            events: checks.iter().filter(|c| c.event).count() as u64,
            violations: checks.iter().filter(|c| c.implication == Some(false)).count() as u64,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice_walk::{make_step_law, LawPreset};
    use crate::observables::{make_heaviside, make_ocean, make_ocean_multidim, ARule};

    fn ocean() -> Observable {
        make_ocean(2.0, 16, ARule::Log2).unwrap()
    }

    /// Zero before `t_n`, then parked at the integer part of `c_n`.
    fn parked(f: &Observable, n: u64, d: usize) -> Vec<i64> {
        let s = f.ocean_schedule().unwrap();
        let t = s.t(n).unwrap();
        let c = (s.two_c(n).unwrap() / 2) as i64;
        let mut p = Vec::new();
        for k in 0..=3 * t {
            p.push(if k < t { 0 } else { c });
            p.extend(std::iter::repeat_n(0, d - 1));
        }
        p
    }

    #[test]
    fn parked_path_triggers_even_event() {
        let f = ocean();
        let c = ocean_event_check(&f, 2, &parked(&f, 2, 1)).unwrap();
        assert!(c.event);
        assert_eq!(c.implication, Some(true));
        assert_eq!(c.t_sum, (2 * c.t_n + 1) as f64);
    }

    #[test]
    fn parked_path_odd_event() {
        let f = ocean();
        let c = ocean_event_check(&f, 3, &parked(&f, 3, 1)).unwrap();
        assert!(c.event);
        assert_eq!(c.implication, Some(true));
        assert_eq!(c.t_sum, 0.0);
    }

    #[test]
    fn one_exit_breaks_event() {
        let f = ocean();
        let mut p = parked(&f, 2, 1);
        let t = f.ocean_schedule().unwrap().t(2).unwrap() as usize;
        p[2 * t] = 0;
        let c = ocean_event_check(&f, 2, &p).unwrap();
        assert!(!c.event);
        assert_eq!(c.implication, None);
    }

    #[test]
    fn multidim_parked_path() {
        let f = make_ocean_multidim(2, &ocean()).unwrap();
        for n in [2, 3, 4] {
            let c = ocean_event_check(&f, n, &parked(&f, n, 2)).unwrap();
            assert!(c.event && c.implication == Some(true), "n = {n}");
        }
    }

    #[test]
    fn short_segment_rejected() {
        let f = ocean();
        let p = vec![0i64; 10];
        assert!(matches!(
            ocean_event_check(&f, 2, &p),
            Err(WalkError::IncompleteSegment { .. })
        ));
        assert!(ocean_event_check(&make_heaviside(), 2, &p).is_err());
    }

    #[test]
    fn random_paths_never_violate() {
        let law = make_step_law(&LawPreset::LazySrw { d: 1, hold: 0.5 }).unwrap();
        let rows = ocean_event_scan(&law, &ocean(), &[1, 2], 50, 3).unwrap();
        assert!(rows.iter().all(|r| r.violations == 0 && r.trials == 50));
    }
}
