use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{exact_occupation_moments, sample_moments, ThreeStateChain};
use crate::error::{Result, WalkError};
use crate::lattice_walk::{StepLaw, Walker};
use crate::rng::{stream_rng, streams};

/// Chain parameters estimated from walk paths, with a covariance cross-check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkChainEstimate {
    pub n1: i64,
    pub n2: i64,
    pub trials: u64,
    pub chain: ThreeStateChain,
    /// Standard errors of `row1`, `row2` and `pi`, entry by entry.
    pub se_row1: [f64; 3],
    pub se_row2: [f64; 3],
    pub se_pi: [f64; 3],
    /// Number of departures observed from states 1 and 2.
    pub departures: [u64; 2],
    /// Covariance of the exact chain moments at the estimated parameters.
    pub chain_cov: f64,
    pub chain_cov_se: f64,
    /// Sample covariance of the walk's occupation times at `n1`, `n2`.
    pub direct_cov: f64,
    pub direct_cov_se: f64,
    pub capped: u64,
    pub flags: Vec<String>,
}

impl WalkChainEstimate {
    /// `|chain_cov - direct_cov|` in units of the combined standard error.
    pub fn agreement_z(&self) -> f64 {
        let se = self.chain_cov_se.hypot(self.direct_cov_se);
        let diff = (self.chain_cov - self.direct_cov).abs();
        if se > 0.0 {
            diff / se
        } else if diff < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Transition frequencies with standard errors.
struct Estimate {
    rows: [[f64; 3]; 2],
    se_rows: [[f64; 3]; 2],
    pi: [f64; 3],
    se_pi: [f64; 3],
    departures: [u64; 2],
}

#[derive(Default, Clone, Copy)]
struct Tally {
    first: [u64; 3],
    trans: [[u64; 3]; 2],
}

impl Tally {
    fn add(&mut self, o: &Tally) {
        for i in 0..3 {
            self.first[i] += o.first[i];
            for r in 0..2 {
                self.trans[r][i] += o.trans[r][i];
            }
        }
    }

    fn estimate(&self, flags: &mut Vec<String>) -> Result<Estimate> {
        let trials: u64 = self.first.iter().sum();
        let freq = |c: &[u64; 3], n: u64| -> ([f64; 3], [f64; 3]) {
            let nf = n as f64;
            let p = c.map(|x| x as f64 / nf);
            (p, p.map(|x| (x * (1.0 - x) / nf).sqrt()))
        };
        let (pi, se_pi) = freq(&self.first, trials);
        let mut rows = [[0.0, 0.0, 1.0]; 2];
        let mut ses = [[0.0; 3]; 2];
        let mut departures = [0; 2];
        for s in 0..2 {
            let n: u64 = self.trans[s].iter().sum();
            departures[s] = n;
            if n < 30 {
                flags.push(format!("only {n} departures observed from state {}", s + 1));
            }
            if n > 0 {
                (rows[s], ses[s]) = freq(&self.trans[s], n);
            }
        }
        Ok(Estimate {
            rows,
            se_rows: ses,
            pi,
            se_pi,
            departures,
        })
    }
}

fn chain_from(rows: [[f64; 3]; 2], pi: [f64; 3]) -> Result<ThreeStateChain> {
    let norm = |v: [f64; 3]| {
        let s: f64 = v.iter().sum();
        v.map(|x| x / s)
    };
    ThreeStateChain::new(norm(rows[0]), norm(rows[1]), norm(pi))
}

const BATCHES: u64 = 10;

/// Map walk paths to the chain on `(n1, n2, never)`.
///
/// Every visit to `n1` or `n2` is a step of the chain in state 1 or 2; the
/// path is followed until it is `horizon` sites above `n2`, after which a
/// return is treated as impossible.
pub fn walk_to_chain(law: &StepLaw, n1: i64, n2: i64, trials: u64, seed: u64, horizon: u64) -> Result<WalkChainEstimate> {
    if law.dim() != 1 || !(law.drift()[0] > 0.0) {
        return Err(WalkError::Precondition("need a one-dimensional walk with positive drift".into()));
    }
    if !(0 < n1 && n1 < n2) {
        return Err(WalkError::Precondition(format!("need 0 < n1 < n2, got ({n1}, {n2})")));
    }
    if trials < 2 * BATCHES {
        return Err(WalkError::Precondition(format!("need at least {} trials", 2 * BATCHES)));
    }
    let v = law.drift()[0];
    let exit = n2 + horizon as i64;
    let cap = (100.0 * (exit as f64 + 1.0) / v) as u64 + 10_000;
    let paths: Vec<(Tally, (f64, f64), bool)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut w = Walker::new(law, stream_rng(seed, t, streams::STEPS));
            let mut tally = Tally::default();
            let mut l = [0u64; 2];
            let mut state: Option<usize> = None;
            let mut x = 0i64;
            while x <= exit && w.time() < cap {
                let hit = if x == n1 {
                    Some(0)
                } else if x == n2 {
                    Some(1)
                } else {
                    None
                };
                if let Some(s) = hit {
                    l[s] += 1;
                    match state {
                        None => tally.first[s] += 1,
                        Some(p) => tally.trans[p][s] += 1,
                    }
                    state = Some(s);
                }
                x = w.step_1d();
            }
            match state {
                None => tally.first[2] += 1,
                Some(p) => tally.trans[p][2] += 1,
            }
            (tally, (l[0] as f64, l[1] as f64), x <= exit)
        })
        .collect();

    let mut flags = Vec::new();
    let mut total = Tally::default();
    for (t, _, _) in &paths {
        total.add(t);
    }
    let Estimate { rows, se_rows, pi, se_pi, departures } = total.estimate(&mut flags)?;
    let chain = chain_from(rows, pi)?;
    let chain_cov = exact_occupation_moments(&chain)?.cov;

    let per = trials / BATCHES;
    let mut batch_covs = Vec::with_capacity(BATCHES as usize);
    for b in 0..BATCHES {
        let mut t = Tally::default();
        for (x, _, _) in &paths[(b * per) as usize..((b + 1) * per) as usize] {
            t.add(x);
        }
        let Estimate { rows: r, pi: p, .. } = t.estimate(&mut Vec::new())?;
        batch_covs.push(exact_occupation_moments(&chain_from(r, p)?)?.cov);
    }
    let bm = batch_covs.iter().sum::<f64>() / BATCHES as f64;
    let bv = batch_covs.iter().map(|c| (c - bm).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;

    let occ: Vec<(f64, f64)> = paths.iter().map(|p| p.1).collect();
    let direct = sample_moments(&occ);
    let capped = paths.iter().filter(|p| p.2).count() as u64;
    if capped > 0 {
        flags.push(format!("{capped} paths hit the step cap"));
    }
    Ok(WalkChainEstimate {
        n1,
        n2,
        trials,
        chain,
        se_row1: se_rows[0],
        se_row2: se_rows[1],
        se_pi,
        departures,
        chain_cov,
        chain_cov_se: (bv / BATCHES as f64).sqrt(),
        direct_cov: direct.moments.cov,
        direct_cov_se: direct.se_cov,
        capped,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice_walk::{make_step_law, LawPreset};

    #[test]
    fn shift_walk_is_degenerate() {
        let law = make_step_law(&LawPreset::Shift).unwrap();
        let e = walk_to_chain(&law, 3, 7, 100, 1, 5).unwrap();
        assert_eq!(e.chain.pi, [1.0, 0.0, 0.0]);
        assert_eq!(e.chain.row1, [0.0, 1.0, 0.0]);
        assert_eq!(e.chain.row2, [0.0, 0.0, 1.0]);
        assert_eq!(e.chain_cov, 0.0);
        assert_eq!(e.direct_cov, 0.0);
        assert_eq!(e.agreement_z(), 0.0);
    }

    #[test]
    fn rejects_bad_sites() {
        let law = make_step_law(&LawPreset::Shift).unwrap();
        assert!(walk_to_chain(&law, 7, 3, 100, 1, 5).is_err());
        assert!(walk_to_chain(&law, 0, 3, 100, 1, 5).is_err());
    }
}
