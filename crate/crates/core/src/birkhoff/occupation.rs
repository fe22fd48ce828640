//! Occupation times of one-dimensional walks with positive drift.
//!
//! `l_n(x)` counts the times `k < n` with `S_k = x`. The total time
//! `l_inf(x)` is approximated by running until the walk is `H` sites beyond
//! every site of interest, where `H` is certified from the empirical tail of
//! the running minimum.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WalkError};
use crate::lattice_walk::{min_tail_report, StepLaw, Walker};
use crate::numeric::{mean_var, CompensatedSum};
use crate::observables::Observable;
use crate::rng::{stream_rng, streams};

/// Visit counts on a window `[lo, lo + len)`, with overflow counters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationTally {
    pub lo: i64,
    pub counts: Vec<u64>,
    pub below: u64,
    pub above: u64,
    /// Number of recorded times.
    pub horizon: u64,
}

impl OccupationTally {
    pub fn new(lo: i64, hi: i64) -> Self {
        Self {
            lo,
            counts: vec![0; (hi - lo + 1).max(0) as usize],
            below: 0,
            above: 0,
            horizon: 0,
        }
    }

    #[inline]
    pub fn record(&mut self, x: i64) {
        self.horizon += 1;
        if x < self.lo {
            self.below += 1;
        } else {
            match self.counts.get_mut((x - self.lo) as usize) {
                Some(c) => *c += 1,
                None => self.above += 1,
            }
        }
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.counts.len() as i64 - 1
    }

    /// `l(x)`; zero outside the window.
    pub fn get(&self, x: i64) -> u64 {
        if x < self.lo {
            return 0;
        }
        self.counts.get((x - self.lo) as usize).copied().unwrap_or(0)
    }

    /// Sum of `l(x)` over the window part of `[a, b]`.
    pub fn sum_range(&self, a: i64, b: i64) -> u64 {
        let a = a.max(self.lo);
        let b = b.min(self.hi());
        if a > b {
            return 0;
        }
        self.counts[(a - self.lo) as usize..=(b - self.lo) as usize].iter().sum()
    }

    /// Total of all counters; equals `horizon`.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.below + self.above
    }
}

/// Parameters of [`run_occupation`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationPlan {
    /// Walk length N and the range `1..=N` of `T̃_N`, `L_N`.
    pub n: u64,
    /// Slack in `N v (1 +- eps)`.
    pub eps: f64,
    /// Lowest tallied site (`-W`).
    pub window_lo: i64,
    /// Exit margin H.
    pub horizon: u64,
    /// Hard cap on simulated steps.
    pub max_steps: u64,
}

/// Result of one occupation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationRun {
    pub n: u64,
    pub t_n: f64,
    /// `sum_{x=1}^N l(x) F(x)`.
    pub t_tilde: f64,
    /// `sum_{x=1}^N l(x)`.
    pub big_l: u64,
    /// Time spent at sites `<= 0`.
    pub l_minus: u64,
    pub m_minus: i64,
    pub m_plus: i64,
    pub t_tilde_m_minus: f64,
    pub big_l_m_minus: u64,
    pub big_l_m_plus: u64,
    /// `max_{k<=N} S_k <= m_plus` and `min_{k>N} S_k > m_minus`.
    pub preconditions: bool,
    /// `|T_N - T̃_{m_minus}|`.
    pub lhs: f64,
    /// `||F|| (L^- + L_{m_plus} - L_{m_minus})`.
    pub rhs: f64,
    pub steps: u64,
    /// The step cap was hit before the exit level.
    pub capped: bool,
    pub tally: OccupationTally,
}

impl OccupationRun {
    /// The comparison inequality, required only when its preconditions hold.
    pub fn decomposition_holds(&self) -> bool {
        !self.preconditions || self.lhs <= self.rhs + 1e-9 * (1.0 + self.rhs)
    }
}

fn positive_drift(law: &StepLaw) -> Result<f64> {
    if law.dim() != 1 {
        return Err(WalkError::Precondition("occupation times need a one-dimensional walk".into()));
    }
    let v = law.drift()[0];
    if !(v > 0.0) {
        return Err(WalkError::Precondition(format!("drift must be positive, got {v}")));
    }
    Ok(v)
}

/// Occupation tally, `T_N`, `T̃` and the comparison between them on one path.
pub fn run_occupation(law: &StepLaw, f: &Observable, seed: u64, trial: u64, plan: &OccupationPlan) -> Result<OccupationRun> {
    let v = positive_drift(law)?;
    if f.dim() != 1 {
        return Err(WalkError::DimensionMismatch { expected: 1, got: f.dim() });
    }
    if !(plan.eps > 0.0 && plan.eps < 1.0) || plan.window_lo > 0 {
        return Err(WalkError::InvalidParameter("need 0 < eps < 1 and window_lo <= 0".into()));
    }
    let nv = plan.n as f64 * v;
    let m_minus = (nv * (1.0 - plan.eps)).floor() as i64;
    let m_plus = (nv * (1.0 + plan.eps)).ceil() as i64;
    let x_hi = m_plus.max(plan.n as i64);
    let exit = x_hi + plan.horizon as i64;

    let mut tally = OccupationTally::new(plan.window_lo, x_hi);
    let mut l_minus = 0u64;
    let mut walker = Walker::new(law, stream_rng(seed, trial, streams::STEPS));
    let mut t_n = CompensatedSum::new();
    let mut max_before = 0i64;
    let mut min_after = i64::MAX;
    let mut x = 0i64;
    let mut capped = false;
    loop {
        if walker.time() >= plan.n && x > exit {
            break;
        }
        if walker.time() >= plan.max_steps {
            capped = true;
            break;
        }
        tally.record(x);
        if x <= 0 {
            l_minus += 1;
        }
        x = walker.step_1d();
        if walker.time() <= plan.n {
            t_n.add(f.eval_1d(x));
            max_before = max_before.max(x);
        } else {
            min_after = min_after.min(x);
        }
    }
    let steps = walker.time();

    let n = plan.n as i64;
    let weighted = |hi: i64| -> f64 {
        (1..=hi.min(x_hi))
            .map(|y| tally.get(y) as f64 * f.eval_1d(y))
            .collect::<CompensatedSum>()
            .value()
    };
    let t_tilde = weighted(n);
    let t_tilde_m_minus = weighted(m_minus);
    let big_l = tally.sum_range(1, n);
    let big_l_m_minus = tally.sum_range(1, m_minus);
    let big_l_m_plus = tally.sum_range(1, m_plus);
    let t_n = t_n.value();
    let lhs = (t_n - t_tilde_m_minus).abs();
    let rhs = f.bound() * (l_minus + big_l_m_plus - big_l_m_minus) as f64;
    Ok(OccupationRun {
        n: plan.n,
        t_n,
        t_tilde,
        big_l,
        l_minus,
        m_minus,
        m_plus,
        t_tilde_m_minus,
        big_l_m_minus,
        big_l_m_plus,
        preconditions: !capped && max_before <= m_plus && min_after > m_minus,
        lhs,
        rhs,
        steps,
        capped,
        tally,
    })
}

/// Smallest margin `H` from `candidates` whose empirical return probability
/// `P(min_n S_n <= -H)` is below `target`. Returns `(H, probability)`.
pub fn certify_horizon(law: &StepLaw, candidates: &[u64], target: f64, trials: u64, seed: u64) -> Result<(u64, f64)> {
    positive_drift(law)?;
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.is_empty() {
        return Err(WalkError::InvalidParameter("no candidate margins".into()));
    }
    let report = min_tail_report(law, &sorted, trials, seed, 0)?;
    report
        .rows
        .iter()
        .find(|r| r.probability < target)
        .map(|r| (r.m, r.probability))
        .ok_or_else(|| {
            WalkError::Precondition(format!(
                "no margin up to {} certifies return probability < {target}",
                sorted.last().unwrap()
            ))
        })
}

/// `l_inf(x)` at each of `sites` for each trial (outer index trial).
pub fn occupation_samples(law: &StepLaw, sites: &[i64], trials: u64, seed: u64, horizon: u64) -> Result<Vec<Vec<u64>>> {
    let v = positive_drift(law)?;
    let Some(&top) = sites.iter().max() else {
        return Err(WalkError::InvalidParameter("no sites".into()));
    };
    let exit = top.max(0) + horizon as i64;
    let cap = (100.0 * (exit as f64 + 1.0) / v) as u64 + 10_000;
    Ok((0..trials)
        .into_par_iter()
        .map(|t| {
            let mut w = Walker::new(law, stream_rng(seed, t, streams::STEPS));
            let mut counts = vec![0u64; sites.len()];
            let mut x = 0i64;
            while x <= exit && w.time() < cap {
                for (c, &s) in counts.iter_mut().zip(sites) {
                    *c += u64::from(s == x);
                }
                x = w.step_1d();
            }
            counts
        })
        .collect())
}

/// Per-site statistics of `l_inf(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteOccupation {
    pub x: i64,
    pub mean: f64,
    pub stderr: f64,
    pub p_zero: f64,
    pub p_zero_stderr: f64,
}

pub fn site_occupation(law: &StepLaw, sites: &[i64], trials: u64, seed: u64, horizon: u64) -> Result<Vec<SiteOccupation>> {
    if trials < 2 {
        return Err(WalkError::Precondition("need at least two trials".into()));
    }
    let samples = occupation_samples(law, sites, trials, seed, horizon)?;
    let m = trials as f64;
    Ok(sites
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            let col: Vec<f64> = samples.iter().map(|s| s[j] as f64).collect();
            let (mean, var) = mean_var(&col);
            let p0 = col.iter().filter(|&&c| c == 0.0).count() as f64 / m;
            SiteOccupation {
                x,
                mean,
                stderr: (var / m).sqrt(),
                p_zero: p0,
                p_zero_stderr: (p0 * (1.0 - p0) / m).sqrt(),
            }
        })
        .collect())
}

/// Empirical covariance of `l_inf(n1)` and `l_inf(n2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub n1: i64,
    pub n2: i64,
    pub trials: u64,
    pub mean1: f64,
    pub mean2: f64,
    pub cov: f64,
    /// Jackknife standard error of `cov`.
    pub stderr: f64,
    /// Covariance after randomly re-pairing the two columns.
    pub shuffled_cov: f64,
    pub shuffled_stderr: f64,
}

/// Plug-in covariance and its delete-one jackknife standard error.
fn jackknife_cov(a: &[f64], b: &[f64]) -> (f64, f64) {
    let m = a.len() as f64;
    let sa: f64 = a.iter().sum();
    let sb: f64 = b.iter().sum();
    let sab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let cov = sab / m - (sa / m) * (sb / m);
    let k = m - 1.0;
    let loo: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| (sab - x * y) / k - ((sa - x) / k) * ((sb - y) / k))
        .collect();
    let mean_loo = loo.iter().sum::<f64>() / m;
    let var = k / m * loo.iter().map(|c| (c - mean_loo) * (c - mean_loo)).sum::<f64>();
    (cov, var.sqrt())
}

pub fn occupation_covariance(law: &StepLaw, n1: i64, n2: i64, trials: u64, seed: u64, horizon: u64) -> Result<CovarianceReport> {
    if !(0 < n1 && n1 < n2) {
        return Err(WalkError::Precondition(format!("need 0 < n1 < n2, got ({n1}, {n2})")));
    }
    if trials < 1000 {
        return Err(WalkError::Precondition(format!("need at least 1000 trials, got {trials}")));
    }
    let samples = occupation_samples(law, &[n1, n2], trials, seed, horizon)?;
    let a: Vec<f64> = samples.iter().map(|s| s[0] as f64).collect();
    let b: Vec<f64> = samples.iter().map(|s| s[1] as f64).collect();
    let (cov, stderr) = jackknife_cov(&a, &b);
    let mut shuffled = b.clone();
    shuffled.shuffle(&mut stream_rng(seed, 0, streams::SHUFFLE));
    let (shuffled_cov, shuffled_stderr) = jackknife_cov(&a, &shuffled);
    let m = trials as f64;
    Ok(CovarianceReport {
        n1,
        n2,
        trials,
        mean1: a.iter().sum::<f64>() / m,
        mean2: b.iter().sum::<f64>() / m,
        cov,
        stderr,
        shuffled_cov,
        shuffled_stderr,
    })
}
