//! Lattice step distributions, trajectory sampling and exact n-step kernels.
//!
//! A [`StepLaw`] is a finitely supported distribution on Z^d. Light-tailed
//! presets are small explicit tables; heavy-tailed presets carry power-law
//! tables truncated at `k_max` and renormalized. Every law is validated on
//! construction: probabilities sum to one, the support generates Z^d, and
//! the walk is aperiodic (return times have gcd 1).

mod diagnostics;
mod kernel;
mod path;

pub use diagnostics::{
    kernel_derivatives, llt_report, min_tail_report, tail_report, DerivativeRow, LltRow,
    MinTailReport, MinTailRow, TailReport,
};
pub use kernel::{KernelPolicy, LatticeKernel};
pub use path::{sample_path, Trajectory, Walker};

use std::collections::{BTreeMap, HashSet};

use rand::Rng;
use rand_distr::{weighted::WeightedAliasIndex, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Result, WalkError};
use crate::numeric::{compensated_sum, gcd, generates_full_lattice};

/// Probability tolerance for explicit tables.
pub const PROB_TOLERANCE: f64 = 1e-12;

/// Default truncation point for power-law tails.
pub const DEFAULT_K_MAX: u64 = 1_000_000;

fn default_hold() -> f64 {
    0.5
}

fn default_k_max() -> u64 {
    DEFAULT_K_MAX
}

fn default_alpha() -> f64 {
    2.0
}

/// One row of an explicit step table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableEntry {
    pub site: Vec<i64>,
    pub p: f64,
}

impl TableEntry {
    pub fn new(site: impl Into<Vec<i64>>, p: f64) -> Self {
        Self {
            site: site.into(),
            p,
        }
    }
}

/// Named step-law constructions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawPreset {
    /// Hold with probability `hold`, otherwise move to one of the 2d
    /// nearest neighbours uniformly.
    LazySrw {
        d: usize,
        #[serde(default = "default_hold")]
        hold: f64,
    },
    /// Independent lazy walks in each coordinate.
    ProductLazy {
        d: usize,
        #[serde(default = "default_hold")]
        hold: f64,
    },
    /// Explicit table that must have zero mean; alpha = 2.
    ZeroMeanFiniteVar { table: Vec<TableEntry> },
    /// Explicit table with arbitrary mean and declared alpha.
    Table {
        table: Vec<TableEntry>,
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
    /// d = 1 walk with positive drift `v`: steps of -1, or k >= 1 with
    /// weight k^(-1-beta) up to `k_max`.
    DriftPareto {
        v: f64,
        beta: f64,
        #[serde(default = "default_k_max")]
        k_max: u64,
    },
    /// d = 1 symmetric power law: P(+-k) proportional to k^(-1-alpha).
    SymStableLattice {
        alpha: f64,
        #[serde(default = "default_k_max")]
        k_max: u64,
    },
    /// Deterministic +1 step in d = 1. A test fixture: it never returns to
    /// the origin, so the aperiodicity check is skipped.
    Shift,
}

impl LawPreset {
    pub fn build(&self) -> Result<StepLaw> {
        make_step_law(self)
    }
}

/// A finitely supported step distribution on Z^d.
#[derive(Debug, Clone)]
pub struct StepLaw {
    name: String,
    dim: usize,
    coords: Vec<i64>,
    probs: Vec<f64>,
    alpha: f64,
    drift: Vec<f64>,
    tail_cutoff: Option<u64>,
    heavy_tail: bool,
    alias: WeightedAliasIndex<f64>,
}

/// Validation switches for [`StepLaw::from_table`].
#[derive(Debug, Clone, Copy)]
struct Checks {
    aperiodic: bool,
}

/// Build a step law from a preset.
pub fn make_step_law(preset: &LawPreset) -> Result<StepLaw> {
    match preset {
        LawPreset::LazySrw { d, hold } => {
            check_dim(*d)?;
            check_hold(*hold)?;
            let mut table = vec![(vec![0; *d], *hold)];
            let mv = (1.0 - hold) / (2 * d) as f64;
            for i in 0..*d {
                for s in [-1, 1] {
                    let mut site = vec![0; *d];
                    site[i] = s;
                    table.push((site, mv));
                }
            }
            StepLaw::from_table(format!("lazy_srw(d={d},hold={hold})"), *d, table, 2.0, None, false, Checks { aperiodic: true })
        }
        LawPreset::ProductLazy { d, hold } => {
            check_dim(*d)?;
            check_hold(*hold)?;
            let one = [(-1i64, (1.0 - hold) / 2.0), (0, *hold), (1, (1.0 - hold) / 2.0)];
            let mut table: Vec<(Vec<i64>, f64)> = vec![(vec![], 1.0)];
            for _ in 0..*d {
                table = table
                    .into_iter()
                    .flat_map(|(site, p)| {
                        one.iter().map(move |&(s, q)| {
                            let mut next = site.clone();
                            next.push(s);
                            (next, p * q)
                        })
                    })
                    .collect();
            }
            StepLaw::from_table(format!("product_lazy(d={d},hold={hold})"), *d, table, 2.0, None, false, Checks { aperiodic: true })
        }
        LawPreset::ZeroMeanFiniteVar { table } => {
            let (dim, rows) = explicit_rows(table)?;
            let law = StepLaw::from_table("zero_mean_finite_var".into(), dim, rows, 2.0, None, false, Checks { aperiodic: true })?;
            if law.drift.iter().any(|m| m.abs() > PROB_TOLERANCE) {
                return Err(WalkError::InvalidLaw {
                    hypothesis: "zero mean",
                    detail: format!("table mean is {:?}", law.drift),
                });
            }
            Ok(law)
        }
        LawPreset::Table { table, alpha } => {
            let (dim, rows) = explicit_rows(table)?;
            StepLaw::from_table("table".into(), dim, rows, *alpha, None, false, Checks { aperiodic: true })
        }
        LawPreset::DriftPareto { v, beta, k_max } => drift_pareto(*v, *beta, *k_max),
        LawPreset::SymStableLattice { alpha, k_max } => sym_stable_lattice(*alpha, *k_max),
        LawPreset::Shift => {
            StepLaw::from_table("shift".into(), 1, vec![(vec![1], 1.0)], 2.0, None, false, Checks { aperiodic: false })
        }
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        return Err(WalkError::InvalidParameter("dimension must be positive".into()));
    }
    Ok(())
}

fn check_hold(hold: f64) -> Result<()> {
    if !(0.0..1.0).contains(&hold) {
        return Err(WalkError::InvalidParameter(format!("hold probability {hold} not in [0, 1)")));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha == 1.0 {
        return Err(WalkError::AlphaOne);
    }
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(WalkError::InvalidParameter(format!("stability index {alpha} not in (0, 2]")));
    }
    Ok(())
}

type Rows = Vec<(Vec<i64>, f64)>;

fn explicit_rows(table: &[TableEntry]) -> Result<(usize, Rows)> {
    let dim = table
        .first()
        .map(|e| e.site.len())
        .ok_or_else(|| WalkError::InvalidParameter("empty step table".into()))?;
    check_dim(dim)?;
    let total = compensated_sum(table.iter().map(|e| e.p));
    if (total - 1.0).abs() > PROB_TOLERANCE {
        return Err(WalkError::InvalidLaw {
            hypothesis: "normalization",
            detail: format!("probabilities sum to {total}"),
        });
    }
    Ok((dim, table.iter().map(|e| (e.site.clone(), e.p)).collect()))
}

/// Unnormalized power weights k^(-1-exponent) for k = 1..=k_max.
fn power_weights(exponent: f64, k_max: u64) -> Vec<f64> {
    (1..=k_max).map(|k| (k as f64).powf(-1.0 - exponent)).collect()
}

fn drift_pareto(v: f64, beta: f64, k_max: u64) -> Result<StepLaw> {
    if !(v > 0.0) {
        return Err(WalkError::InvalidParameter(format!("drift target v = {v} must be positive")));
    }
    if !(beta > 1.0) {
        return Err(WalkError::InvalidParameter(format!("tail exponent beta = {beta} must exceed 1")));
    }
    if k_max < 2 {
        return Err(WalkError::InvalidParameter("k_max must be at least 2".into()));
    }
    let alpha = beta.min(2.0);
    check_alpha(alpha)?;
    let w = power_weights(beta, k_max);
    // Sum from the small end up for accuracy.
    let z = compensated_sum(w.iter().rev().copied());
    let m_plus = compensated_sum(w.iter().enumerate().rev().map(|(i, wk)| (i + 1) as f64 * wk)) / z;
    if v >= m_plus {
        return Err(WalkError::InvalidParameter(format!(
            "drift target {v} not below the positive-part mean {m_plus}"
        )));
    }
    let p_neg = (m_plus - v) / (m_plus + 1.0);
    let mut table = Vec::with_capacity(k_max as usize + 1);
    table.push((vec![-1], p_neg));
    table.extend(w.iter().enumerate().map(|(i, wk)| (vec![i as i64 + 1], (1.0 - p_neg) * wk / z)));
    StepLaw::from_table(
        format!("drift_pareto(v={v},beta={beta},k_max={k_max})"),
        1,
        table,
        alpha,
        Some(k_max),
        true,
        Checks { aperiodic: true },
    )
}

fn sym_stable_lattice(alpha: f64, k_max: u64) -> Result<StepLaw> {
    check_alpha(alpha)?;
    if !(alpha < 2.0) {
        return Err(WalkError::InvalidParameter(format!(
            "sym_stable_lattice needs alpha in (0,1) or (1,2), got {alpha}"
        )));
    }
    if k_max < 2 {
        return Err(WalkError::InvalidParameter("k_max must be at least 2".into()));
    }
    let w = power_weights(alpha, k_max);
    let z = 2.0 * compensated_sum(w.iter().rev().copied());
    let mut table = Vec::with_capacity(2 * k_max as usize);
    for (i, wk) in w.iter().enumerate() {
        let k = i as i64 + 1;
        table.push((vec![k], wk / z));
        table.push((vec![-k], wk / z));
    }
    StepLaw::from_table(
        format!("sym_stable_lattice(alpha={alpha},k_max={k_max})"),
        1,
        table,
        alpha,
        Some(k_max),
        true,
        Checks { aperiodic: true },
    )
}

impl StepLaw {
    fn from_table(
        name: String,
        dim: usize,
        table: Vec<(Vec<i64>, f64)>,
        alpha: f64,
        tail_cutoff: Option<u64>,
        heavy_tail: bool,
        checks: Checks,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        let mut merged: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
        for (site, p) in table {
            if site.len() != dim {
                return Err(WalkError::DimensionMismatch {
                    expected: dim,
                    got: site.len(),
                });
            }
            if !(p >= 0.0) || !p.is_finite() {
                return Err(WalkError::InvalidLaw {
                    hypothesis: "nonnegative probabilities",
                    detail: format!("p({site:?}) = {p}"),
                });
            }
            if p > 0.0 {
                *merged.entry(site).or_insert(0.0) += p;
            }
        }
        let total = compensated_sum(merged.values().copied());
        if (total - 1.0).abs() > PROB_TOLERANCE {
            return Err(WalkError::InvalidLaw {
                hypothesis: "normalization",
                detail: format!("probabilities sum to {total}"),
            });
        }
        let sites: Vec<Vec<i64>> = merged.keys().cloned().collect();
        let probs: Vec<f64> = merged.values().copied().collect();

        if !support_generates(&sites, dim) {
            return Err(WalkError::InvalidLaw {
                hypothesis: "non-degeneracy (support must generate Z^d)",
                detail: format!("support of {name} generates a proper subgroup"),
            });
        }
        if checks.aperiodic && !is_aperiodic(&sites, dim) {
            return Err(WalkError::InvalidLaw {
                hypothesis: "aperiodicity (gcd of return times must be 1)",
                detail: format!("{name} is periodic or never returns to the origin"),
            });
        }

        let symmetric = merged
            .iter()
            .all(|(s, p)| merged.get(&s.iter().map(|c| -c).collect::<Vec<_>>()) == Some(p));
        let drift = if symmetric {
            vec![0.0; dim]
        } else {
            (0..dim)
                .map(|i| compensated_sum(sites.iter().zip(&probs).map(|(s, p)| s[i] as f64 * p)))
                .collect()
        };

        let alias = WeightedAliasIndex::new(probs.clone())
            .map_err(|e| WalkError::InvalidParameter(format!("alias table: {e}")))?;
        Ok(Self {
            name,
            dim,
            coords: sites.into_iter().flatten().collect(),
            probs,
            alpha,
            drift,
            tail_cutoff,
            heavy_tail,
            alias,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Exact mean of the (possibly truncated) table.
    pub fn drift(&self) -> &[f64] {
        &self.drift
    }

    pub fn tail_cutoff(&self) -> Option<u64> {
        self.tail_cutoff
    }

    /// Heavy-tailed presets support sampling only, no kernels.
    pub fn is_heavy_tailed(&self) -> bool {
        self.heavy_tail
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn site(&self, i: usize) -> &[i64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn prob(&self, i: usize) -> f64 {
        self.probs[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[i64], f64)> + '_ {
        self.coords.chunks_exact(self.dim).zip(self.probs.iter().copied())
    }

    /// Per-coordinate minimum and maximum of the support.
    pub fn support_bounds(&self) -> (Vec<i64>, Vec<i64>) {
        let mut lo = vec![i64::MAX; self.dim];
        let mut hi = vec![i64::MIN; self.dim];
        for (s, _) in self.iter() {
            for i in 0..self.dim {
                lo[i] = lo[i].min(s[i]);
                hi[i] = hi[i].max(s[i]);
            }
        }
        (lo, hi)
    }

    /// Largest Euclidean norm in the support.
    pub fn support_radius(&self) -> f64 {
        self.iter()
            .map(|(s, _)| s.iter().map(|&c| (c as f64).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Exact covariance matrix (row-major d x d).
    pub fn covariance(&self) -> Vec<f64> {
        let d = self.dim;
        let mut cov = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] = compensated_sum(self.iter().map(|(s, p)| {
                    p * (s[i] as f64 - self.drift[i]) * (s[j] as f64 - self.drift[j])
                }));
            }
        }
        cov
    }

    /// Whether p(x) = p(-x) for every site.
    pub fn is_symmetric(&self) -> bool {
        let map: BTreeMap<&[i64], f64> = self.iter().collect();
        self.iter().all(|(s, p)| {
            let neg: Vec<i64> = s.iter().map(|c| -c).collect();
            map.get(neg.as_slice()) == Some(&p)
        })
    }

    /// Draw the index of one step.
    #[inline]
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.alias.sample(rng)
    }

    /// Draw one step of a one-dimensional law.
    #[inline]
    pub fn sample_1d<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        debug_assert_eq!(self.dim, 1);
        self.coords[self.alias.sample(rng)]
    }
}

fn support_generates(sites: &[Vec<i64>], dim: usize) -> bool {
    if dim == 1 {
        return sites.iter().fold(0, |g, s| gcd(g, s[0])) == 1;
    }
    generates_full_lattice(sites, dim)
}

/// gcd{n > 0 : P(S_n = 0) > 0} == 1.
///
/// The period equals the index of the lattice spanned by differences of
/// support points, provided the walk can return at all. Returns are
/// possible in d = 1 iff both signs occur; in higher dimension a bounded
/// search for a return is run.
fn is_aperiodic(sites: &[Vec<i64>], dim: usize) -> bool {
    if sites.iter().any(|s| s.iter().all(|&c| c == 0)) {
        return true;
    }
    let base = &sites[0];
    let diffs: Vec<Vec<i64>> = sites
        .iter()
        .map(|s| s.iter().zip(base).map(|(a, b)| a - b).collect())
        .collect();
    if dim == 1 {
        let has_pos = sites.iter().any(|s| s[0] > 0);
        let has_neg = sites.iter().any(|s| s[0] < 0);
        return has_pos && has_neg && diffs.iter().fold(0, |g, s| gcd(g, s[0])) == 1;
    }
    generates_full_lattice(&diffs, dim) && returns_within(sites, 4 * dim + 8)
}

/// Whether some path of at most `max_steps` steps returns to the origin.
fn returns_within(sites: &[Vec<i64>], max_steps: usize) -> bool {
    let mut frontier: HashSet<Vec<i64>> = sites.iter().cloned().collect();
    for _ in 1..max_steps {
        let mut next = HashSet::with_capacity(frontier.len() * sites.len());
        for x in &frontier {
            for s in sites {
                let y: Vec<i64> = x.iter().zip(s).map(|(a, b)| a + b).collect();
                if y.iter().all(|&c| c == 0) {
                    return true;
                }
                next.insert(y);
            }
        }
        if next.len() > 2_000_000 {
            return false;
        }
        frontier = next;
    }
    false
}
