//! Occupation times of the absorbing chain on `{1, 2, 3}` with transition matrix
//!
//! ```text
//! p1 q1 η1
//! q2 p2 η2
//!  0  0  1
//! ```
//!
//! and the mapping from a drifting walk to such a chain on two sites.

mod walk;

pub use walk::{walk_to_chain, WalkChainEstimate};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WalkError};
use crate::lattice_walk::PROB_TOLERANCE;
use crate::rng::{stream_rng, streams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreeStateChain {
    /// Row of state 1: `(p1, q1, η1)`.
    pub row1: [f64; 3],
    /// Row of state 2: `(q2, p2, η2)`.
    pub row2: [f64; 3],
    pub pi: [f64; 3],
}

fn check_prob_vector(v: &[f64; 3], what: &str) -> Result<()> {
    let sum: f64 = v.iter().sum();
    if v.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > PROB_TOLERANCE {
        return Err(WalkError::InvalidParameter(format!(
            "{what} {v:?} is not a probability vector"
        )));
    }
    Ok(())
}

impl ThreeStateChain {
    pub fn new(row1: [f64; 3], row2: [f64; 3], pi: [f64; 3]) -> Result<Self> {
        check_prob_vector(&row1, "row 1")?;
        check_prob_vector(&row2, "row 2")?;
        check_prob_vector(&pi, "initial distribution")?;
        Ok(Self { row1, row2, pi })
    }

    pub fn p1(&self) -> f64 {
        self.row1[0]
    }
    pub fn q1(&self) -> f64 {
        self.row1[1]
    }
    pub fn eta1(&self) -> f64 {
        self.row1[2]
    }
    pub fn q2(&self) -> f64 {
        self.row2[0]
    }
    pub fn p2(&self) -> f64 {
        self.row2[1]
    }
    pub fn eta2(&self) -> f64 {
        self.row2[2]
    }

    /// Spectral radius of the transient block.
    pub fn spectral_radius(&self) -> f64 {
        let (a, b, c, d) = (self.p1(), self.q1(), self.q2(), self.p2());
        let tr = a + d;
        let disc = ((a - d) * (a - d) + 4.0 * b * c).max(0.0);
        (tr + disc.sqrt()) / 2.0
    }

    /// `(I - Q)^{-1}`.
    pub fn fundamental(&self) -> Result<[[f64; 2]; 2]> {
        let rho = self.spectral_radius();
        if rho >= 1.0 - 1e-14 {
            return Err(WalkError::NonTransient(rho));
        }
        let (a, b, c, d) = (1.0 - self.p1(), -self.q1(), -self.q2(), 1.0 - self.p2());
        let det = a * d - b * c;
        Ok([[d / det, -b / det], [-c / det, a / det]])
    }

    /// `q1 / (q1 + η1) (1 - π1) - π2 + q2`.
    pub fn bracket(&self) -> f64 {
        let s = self.q1() + self.eta1();
        let hit = if s > 0.0 { self.q1() / s } else { 0.0 };
        hit * (1.0 - self.pi[0]) - self.pi[1] + self.q2()
    }

    pub fn satisfies_ell(&self, delta: f64) -> bool {
        self.q1() > delta && self.eta2() > delta
    }

    /// One trajectory until absorption: `(l1, l2)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (u64, u64) {
        let pick = |rng: &mut R, p: &[f64; 3]| {
            let u: f64 = rng.random();
            if u < p[0] {
                0
            } else if u < p[0] + p[1] {
                1
            } else {
                2
            }
        };
        let mut l = [0u64; 2];
        let mut s = pick(rng, &self.pi);
        while s < 2 {
            l[s] += 1;
            s = pick(rng, if s == 0 { &self.row1 } else { &self.row2 });
        }
        (l[0], l[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OccupationMoments {
    pub mean1: f64,
    pub mean2: f64,
    pub mean12: f64,
    pub cov: f64,
}

/// Exact first moments and cross moment of the occupation times.
///
/// With `N = (I - Q)^{-1}`, `E_i l_j = N_ij` and
/// `E_i(l_1 l_2) = N_i1 N_12 + N_i2 N_21`.
pub fn exact_occupation_moments(chain: &ThreeStateChain) -> Result<OccupationMoments> {
    let n = chain.fundamental()?;
    let pi = &chain.pi;
    let mean1 = pi[0] * n[0][0] + pi[1] * n[1][0];
    let mean2 = pi[0] * n[0][1] + pi[1] * n[1][1];
    let mean12 = (0..2)
        .map(|i| pi[i] * (n[i][0] * n[0][1] + n[i][1] * n[1][0]))
        .sum::<f64>();
    Ok(OccupationMoments {
        mean1,
        mean2,
        mean12,
        cov: mean12 - mean1 * mean2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloMoments {
    pub trials: u64,
    pub moments: OccupationMoments,
    pub se_mean1: f64,
    pub se_mean2: f64,
    pub se_mean12: f64,
    pub se_cov: f64,
}

impl MonteCarloMoments {
    /// Largest deviation from `exact` in units of standard error.
    pub fn max_z(&self, exact: &OccupationMoments) -> f64 {
        let z = |mc: f64, ex: f64, se: f64| {
            if se > 0.0 {
                (mc - ex).abs() / se
            } else if (mc - ex).abs() <= 1e-12 * ex.abs().max(1.0) {
                0.0
            } else {
                f64::INFINITY
            }
        };
        let m = &self.moments;
        z(m.mean1, exact.mean1, self.se_mean1)
            .max(z(m.mean2, exact.mean2, self.se_mean2))
            .max(z(m.mean12, exact.mean12, self.se_mean12))
            .max(z(m.cov, exact.cov, self.se_cov))
    }
}

/// Sample moments with standard errors; trial `t` uses its own stream.
pub fn monte_carlo_moments(chain: &ThreeStateChain, trials: u64, seed: u64) -> Result<MonteCarloMoments> {
    if trials < 2 {
        return Err(WalkError::Precondition("need at least two trials".into()));
    }
    chain.fundamental()?;
    let samples: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let (a, b) = chain.sample(&mut stream_rng(seed, t, streams::CHAIN));
            (a as f64, b as f64)
        })
        .collect();
    Ok(sample_moments(&samples))
}

pub(crate) fn sample_moments(samples: &[(f64, f64)]) -> MonteCarloMoments {
    let m = samples.len() as f64;
    let mean = |f: &dyn Fn(&(f64, f64)) -> f64| samples.iter().map(f).sum::<f64>() / m;
    let mean1 = mean(&|s| s.0);
    let mean2 = mean(&|s| s.1);
    let mean12 = mean(&|s| s.0 * s.1);
    let cov = mean(&|s| (s.0 - mean1) * (s.1 - mean2));
    let se = |f: &dyn Fn(&(f64, f64)) -> f64, mu: f64| {
        let v = samples.iter().map(|s| (f(s) - mu).powi(2)).sum::<f64>() / (m - 1.0);
        (v / m).sqrt()
    };
    MonteCarloMoments {
        trials: samples.len() as u64,
        moments: OccupationMoments {
            mean1,
            mean2,
            mean12,
            cov,
        },
        se_mean1: se(&|s| s.0, mean1),
        se_mean2: se(&|s| s.1, mean2),
        se_mean12: se(&|s| s.0 * s.1, mean12),
        se_cov: se(&|s| (s.0 - mean1) * (s.1 - mean2), cov),
    }
}

/// Comparison of `|Cov(l1, l2)|` with `C * bracket`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub cov_abs: f64,
    pub bracket: f64,
    pub bound: f64,
    /// `|Cov| / bracket`; `None` when the bracket is not positive.
    pub ratio: Option<f64>,
    /// Bracket not positive while the covariance is not zero.
    pub flagged: bool,
}

const ZERO_COV: f64 = 1e-12;

pub fn lemma_bound_check(chain: &ThreeStateChain, c_hat: f64, delta: f64) -> Result<BoundCheck> {
    if !chain.satisfies_ell(delta) {
        return Err(WalkError::Precondition(format!(
            "need q1 > {delta} and eta2 > {delta}, got q1 = {}, eta2 = {}",
            chain.q1(),
            chain.eta2()
        )));
    }
    let m = exact_occupation_moments(chain)?;
    let cov_abs = m.cov.abs();
    let cov_zero = cov_abs <= ZERO_COV * (m.mean1 * m.mean2).max(1.0);
    let bracket = chain.bracket();
    let ratio = if bracket > 0.0 {
        Some(cov_abs / bracket)
    } else if cov_zero {
        Some(0.0)
    } else {
        None
    };
    Ok(BoundCheck {
        cov_abs,
        bracket,
        bound: c_hat * bracket,
        ratio,
        flagged: bracket <= 0.0 && !cov_zero,
    })
}

/// Grid over `q1`, `η2` and `s = q2 / (1 - η2)`, each taking `points` values
/// in `(δ, 1)`, `(δ, 1)` and `(0, 1)`; `p1 = η1 = (1 - q1) / 2`, `p2 = 1 - η2 - q2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub delta: f64,
    pub points: usize,
    pub pi: [f64; 3],
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            delta: 0.1,
            points: 10,
            pi: [1.0, 0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p1: f64,
    pub q1: f64,
    pub eta1: f64,
    pub q2: f64,
    pub p2: f64,
    pub eta2: f64,
    pub pi1: f64,
    pub pi2: f64,
    pub cov: f64,
    pub bracket: f64,
    pub ratio: Option<f64>,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub spec: SweepSpec,
    pub rows: Vec<SweepRow>,
    /// Empirical `C(δ)`: largest ratio over unflagged rows.
    pub max_ratio: f64,
    pub flagged: usize,
}

fn axis(lo: f64, points: usize) -> impl Iterator<Item = f64> {
    (0..points).map(move |i| lo + (1.0 - lo) * (i as f64 + 0.5) / points as f64)
}

pub fn chain_sweep(spec: &SweepSpec) -> Result<SweepReport> {
    if !(0.0..1.0).contains(&spec.delta) || spec.points == 0 {
        return Err(WalkError::InvalidParameter("need 0 <= delta < 1 and points >= 1".into()));
    }
    check_prob_vector(&spec.pi, "initial distribution")?;
    let mut chains = Vec::with_capacity(spec.points.pow(3));
    for q1 in axis(spec.delta, spec.points) {
        for eta2 in axis(spec.delta, spec.points) {
            for s in axis(0.0, spec.points) {
                let q2 = s * (1.0 - eta2);
                let side = (1.0 - q1) / 2.0;
                chains.push(ThreeStateChain::new(
                    [side, q1, side],
                    [q2, 1.0 - eta2 - q2, eta2],
                    spec.pi,
                )?);
            }
        }
    }
    let rows: Vec<SweepRow> = chains
        .par_iter()
        .map(|c| {
            let m = exact_occupation_moments(c)?;
            let b = lemma_bound_check(c, 1.0, spec.delta)?;
            Ok(SweepRow {
                p1: c.p1(),
                q1: c.q1(),
                eta1: c.eta1(),
                q2: c.q2(),
                p2: c.p2(),
                eta2: c.eta2(),
                pi1: c.pi[0],
                pi2: c.pi[1],
                cov: m.cov,
                bracket: b.bracket,
                ratio: b.ratio,
                flagged: b.flagged,
            })
        })
        .collect::<Result<_>>()?;
    let max_ratio = rows
        .iter()
        .filter(|r| !r.flagged)
        .filter_map(|r| r.ratio)
        .fold(0.0, f64::max);
    let flagged = rows.iter().filter(|r| r.flagged).count();
    Ok(SweepReport {
        spec: spec.clone(),
        rows,
        max_ratio,
        flagged,
    })
}

/// 27 chains used to check the exact moments against sampling.
pub fn oracle_grid() -> Vec<ThreeStateChain> {
    let mut out = Vec::with_capacity(27);
    for q1 in [0.15, 0.4, 0.7] {
        for eta2 in [0.15, 0.4, 0.7] {
            for pi in [[1.0, 0.0, 0.0], [0.3, 0.5, 0.2], [0.0, 1.0, 0.0]] {
                let side = (1.0 - q1) / 2.0;
                let rest = 1.0 - eta2;
                out.push(
                    ThreeStateChain::new([side, q1, side], [0.3 * rest, 0.7 * rest, eta2], pi)
                        .expect("grid rows are probability vectors"),
                );
            }
        }
    }
    out
}
