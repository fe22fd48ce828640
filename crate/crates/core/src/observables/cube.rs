//! Averages over dilated, translated boxes and the decay fit built on them.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Observable, Repr};
use crate::error::{Result, WalkError};
use crate::numeric::{fit_line, CompensatedSum, LineFit};
use crate::rng::{stream_rng, streams};

/// The box `V(a_1 L, b_1 L, ..., a_d L, b_d L) + z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubeSpec {
    pub corners: Vec<(i64, i64)>,
    pub scale: i64,
    pub offset: Vec<i64>,
}

impl CubeSpec {
    pub fn new(corners: Vec<(i64, i64)>, scale: i64, offset: Vec<i64>) -> Result<Self> {
        let c = Self {
            corners,
            scale,
            offset,
        };
        c.ranges()?;
        Ok(c)
    }

    /// The box `[lo_1, hi_1] x ... x [lo_d, hi_d]` itself.
    pub fn from_ranges(ranges: &[(i64, i64)]) -> Result<Self> {
        Self::new(ranges.to_vec(), 1, vec![0; ranges.len()])
    }

    pub fn dim(&self) -> usize {
        self.corners.len()
    }

    /// Inclusive coordinate ranges.
    pub fn ranges(&self) -> Result<Vec<(i64, i64)>> {
        if self.corners.is_empty() || self.offset.len() != self.corners.len() {
            return Err(WalkError::DimensionMismatch {
                expected: self.corners.len(),
                got: self.offset.len(),
            });
        }
        if self.scale < 1 {
            return Err(WalkError::InvalidParameter(format!("scale L = {} < 1", self.scale)));
        }
        let over = || WalkError::Overflow("box coordinates exceed i64".into());
        self.corners
            .iter()
            .zip(&self.offset)
            .map(|(&(a, b), &z)| {
                if a > b {
                    return Err(WalkError::InvalidParameter(format!("corner pair ({a}, {b}) is reversed")));
                }
                let lo = a.checked_mul(self.scale).and_then(|v| v.checked_add(z)).ok_or_else(over)?;
                let hi = b.checked_mul(self.scale).and_then(|v| v.checked_add(z)).ok_or_else(over)?;
                Ok((lo, hi))
            })
            .collect()
    }

    /// Number of sites |V|.
    pub fn size(&self) -> Result<u128> {
        let r = self.ranges()?;
        r.iter()
            .try_fold(1u128, |acc, &(lo, hi)| acc.checked_mul((hi as i128 - lo as i128 + 1) as u128))
            .ok_or_else(|| WalkError::Overflow("box size exceeds u128".into()))
    }
}

/// Exact mean of F over the box, using closed forms where available.
///
/// Periodic, heaviside, ocean and table observables (and affine maps of
/// them) cost time proportional to the number of periods, blocks or table
/// sites; other kinds are summed directly, subject to `budget` sites.
pub fn cube_average(f: &Observable, cube: &CubeSpec, budget: u128) -> Result<f64> {
    check_dim(f, cube)?;
    let ranges = cube.ranges()?;
    match closed_form(f, &ranges)? {
        Some(v) => Ok(v),
        None => direct(f, &ranges, budget),
    }
}

/// Mean of F over the box by summing every site.
pub fn cube_average_direct(f: &Observable, cube: &CubeSpec, budget: u128) -> Result<f64> {
    check_dim(f, cube)?;
    direct(f, &cube.ranges()?, budget)
}

fn check_dim(f: &Observable, cube: &CubeSpec) -> Result<()> {
    if f.dim() != cube.dim() {
        return Err(WalkError::DimensionMismatch {
            expected: f.dim(),
            got: cube.dim(),
        });
    }
    Ok(())
}

fn size_of(ranges: &[(i64, i64)]) -> f64 {
    ranges.iter().map(|&(lo, hi)| (hi as f64 - lo as f64) + 1.0).product()
}

/// Count of z in [lo, hi] with z = r mod p.
fn residue_count(lo: i64, hi: i64, r: i64, p: i64) -> i64 {
    (hi - r).div_euclid(p) - (lo - 1 - r).div_euclid(p)
}

fn closed_form(f: &Observable, ranges: &[(i64, i64)]) -> Result<Option<f64>> {
    let v = match f.repr() {
        Repr::Periodic { period, values } => {
            let counts: Vec<Vec<f64>> = ranges
                .iter()
                .zip(period)
                .map(|(&(lo, hi), &p)| {
                    (0..p as i64).map(|r| residue_count(lo, hi, r, p as i64) as f64).collect()
                })
                .collect();
            let mut acc = CompensatedSum::new();
            for (idx, &val) in values.iter().enumerate() {
                let mut rem = idx;
                let mut w = 1.0;
                for (j, &p) in period.iter().enumerate().rev() {
                    w *= counts[j][rem % p as usize];
                    rem /= p as usize;
                }
                acc.add(val * w);
            }
            acc.value() / size_of(ranges)
        }
        Repr::Heaviside => {
            let (lo, hi) = ranges[0];
            let pos = (hi - lo.max(1) + 1).max(0);
            pos as f64 / size_of(ranges)
        }
        Repr::Ocean(s) => {
            let (lo, hi) = ranges[0];
            s.ones_in(lo, hi) as f64 / size_of(ranges)
        }
        Repr::Table { values, default } => {
            let mut acc = CompensatedSum::new();
            for (site, &val) in values {
                if site.iter().zip(ranges).all(|(&x, &(lo, hi))| lo <= x && x <= hi) {
                    acc.add(val - default);
                }
            }
            default + acc.value() / size_of(ranges)
        }
        Repr::Affine { inner, scale, shift } => match closed_form(inner, ranges)? {
            Some(m) => scale * m + shift,
            None => return Ok(None),
        },
        Repr::Quasi(_) | Repr::Scenery { .. } | Repr::OceanMultidim(_) => return Ok(None),
    };
    Ok(Some(v))
}

fn direct(f: &Observable, ranges: &[(i64, i64)], budget: u128) -> Result<f64> {
    let size = ranges
        .iter()
        .try_fold(1u128, |acc, &(lo, hi)| acc.checked_mul((hi as i128 - lo as i128 + 1) as u128))
        .ok_or_else(|| WalkError::Overflow("box size exceeds u128".into()))?;
    if size > budget {
        return Err(WalkError::BudgetExceeded {
            what: "cube average sites",
            required: size,
            budget,
        });
    }
    let (lo0, hi0) = ranges[0];
    let rest = &ranges[1..];
    let slab = |x0: i64| -> f64 {
        let mut acc = CompensatedSum::new();
        let mut x: Vec<i64> = std::iter::once(x0).chain(rest.iter().map(|r| r.0)).collect();
        loop {
            acc.add(f.eval(&x));
            let mut i = x.len();
            loop {
                if i == 1 {
                    return acc.value();
                }
                i -= 1;
                if x[i] < ranges[i].1 {
                    x[i] += 1;
                    break;
                }
                x[i] = ranges[i].0;
            }
        }
    };
    let total: CompensatedSum = if ranges.len() == 1 {
        // Chunk one-dimensional boxes so large ones still parallelize.
        const CHUNK: i64 = 1 << 14;
        let chunks = (hi0 - lo0) / CHUNK + 1;
        let partial: Vec<f64> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let a = lo0 + c * CHUNK;
                let b = (a + CHUNK - 1).min(hi0);
                (a..=b).map(|x| f.eval_1d(x)).collect::<CompensatedSum>().value()
            })
            .collect();
        partial.into_iter().collect()
    } else {
        let partial: Vec<f64> = (lo0..=hi0).into_par_iter().map(slab).collect();
        partial.into_iter().collect()
    };
    Ok(total.value() / size as f64)
}

/// Worst deviation found at one scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaRow {
    pub scale: i64,
    pub max_error: f64,
    pub worst_offset: Vec<i64>,
}

/// Fit of `max_z |F̄_{z+V(aL,bL)} - F̄| ~ C L^{d(beta-1)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaFit {
    /// `-inf` when every error vanished or fewer than two were positive.
    pub beta_hat: f64,
    pub c_hat: f64,
    pub degenerate: bool,
    pub rows: Vec<BetaRow>,
    pub fit: Option<LineFit>,
}

/// Parameters of [`beta_fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaFitPlan {
    pub mean: f64,
    pub gamma: f64,
    pub scales: Vec<i64>,
    pub samples: usize,
    pub corners: Vec<(i64, i64)>,
    pub seed: u64,
    pub budget: u128,
}

/// Offset uniform on the lattice points of the open ball `|z| < radius`.
fn sample_offset<R: Rng>(rng: &mut R, d: usize, radius: f64) -> Vec<i64> {
    let r = radius.ceil() as i64 - 1;
    loop {
        let z: Vec<i64> = (0..d).map(|_| rng.random_range(-r..=r)).collect();
        let n2: f64 = z.iter().map(|&c| (c as f64) * (c as f64)).sum();
        if n2.sqrt() < radius {
            return z;
        }
    }
}

/// Sampled decay exponent of cube averages.
///
/// For each scale L the offset z = 0 and `samples - 1` offsets drawn
/// uniformly from the ball `|z| < L^gamma` are tried; the largest deviation
/// enters a least-squares fit of `log err` against `log L`.
pub fn beta_fit(f: &Observable, plan: &BetaFitPlan) -> Result<BetaFit> {
    let d = f.dim();
    if plan.corners.len() != d {
        return Err(WalkError::DimensionMismatch {
            expected: d,
            got: plan.corners.len(),
        });
    }
    if plan.scales.windows(2).any(|w| w[0] >= w[1]) || plan.scales.first().is_some_and(|&l| l < 1) {
        return Err(WalkError::InvalidParameter("scales must be positive and increasing".into()));
    }
    if plan.samples == 0 || !(plan.gamma >= 0.0) {
        return Err(WalkError::InvalidParameter("need samples >= 1 and gamma >= 0".into()));
    }
    let mut rows = Vec::with_capacity(plan.scales.len());
    for &l in &plan.scales {
        let radius = (l as f64).powf(plan.gamma);
        if radius > 2f64.powi(60) {
            return Err(WalkError::Overflow(format!("offset radius L^gamma = {radius:e}")));
        }
        let mut rng = stream_rng(plan.seed, l as u64, streams::SAMPLING);
        let mut offsets = vec![vec![0; d]];
        offsets.extend((1..plan.samples).map(|_| sample_offset(&mut rng, d, radius.max(1.0))));
        let mut best = (-1.0f64, vec![0; d]);
        for z in offsets {
            let cube = CubeSpec::new(plan.corners.clone(), l, z.clone())?;
            let err = (cube_average(f, &cube, plan.budget)? - plan.mean).abs();
            if err > best.0 {
                best = (err, z);
            }
        }
        rows.push(BetaRow {
            scale: l,
            max_error: best.0,
            worst_offset: best.1,
        });
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.max_error > 0.0)
        .map(|r| ((r.scale as f64).ln(), r.max_error.ln()))
        .collect();
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    let fit = fit_line(&x, &y, None);
    Ok(match fit {
        Some(fit) => BetaFit {
            beta_hat: 1.0 + fit.slope / d as f64,
            c_hat: fit.intercept.exp(),
            degenerate: false,
            rows,
            fit: Some(fit),
        },
        None => BetaFit {
            beta_hat: f64::NEG_INFINITY,
            c_hat: 0.0,
            degenerate: true,
            rows,
            fit: None,
        },
    })
}
