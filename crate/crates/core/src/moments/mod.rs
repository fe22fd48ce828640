//! Exact first and second moments of Birkhoff sums.
//!
//! Three routes, all without sampling:
//!
//! - the mean `E T_N = sum_n sum_x H(n, x) F(x0 + x)` from successive kernels;
//! - pair moments `E_{n1,n2}(x0) = E F(S_{n1}) F(S_{n2})` as a nested
//!   convolution `sum_x H(n1, x) F(x0 + x) g_{n2-n1}(x0 + x)` with
//!   `g_m(y) = sum_z H(m, z) F(y + z)` cached per lag m;
//! - a backward recursion over the starting point,
//!   `M_j = P[F + M_{j-1}]`, `V_j = P[F^2 + 2 F M_{j-1} + V_{j-1}]`,
//!   which yields `E_{x0} T_j` and `E_{x0} T_j^2` for every `j <= N` in one
//!   pass over shrinking boxes.
//!
//! The second moment also equals `sum_{n1<=n2} c E_{n1,n2}` with `c = 1` on
//! the diagonal and 2 off it; [`second_moment_by_pairs`] evaluates that sum.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WalkError};
use crate::lattice_walk::{KernelPolicy, LatticeKernel, StepLaw};
use crate::numeric::{fit_line, CompensatedSum, LineFit};
use crate::observables::Observable;

/// Default cap on the work (site-step updates) of the backward recursion.
pub const DEFAULT_BUDGET: u128 = 20_000_000_000;

/// What to compute and from where.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentPlan {
    pub x0: Vec<i64>,
    pub horizon: u64,
    pub policy: KernelPolicy,
    pub budget: u128,
}

impl MomentPlan {
    pub fn new(x0: Vec<i64>, horizon: u64) -> Self {
        Self {
            x0,
            horizon,
            policy: KernelPolicy::default(),
            budget: DEFAULT_BUDGET,
        }
    }
}

fn check(law: &StepLaw, f: &Observable, plan: &MomentPlan) -> Result<()> {
    if law.is_heavy_tailed() {
        return Err(WalkError::HeavyTailKernel(law.name().to_string()));
    }
    for got in [f.dim(), plan.x0.len()] {
        if got != law.dim() {
            return Err(WalkError::DimensionMismatch {
                expected: law.dim(),
                got,
            });
        }
    }
    Ok(())
}

fn shifted(x0: &[i64], x: &[i64]) -> Vec<i64> {
    x0.iter().zip(x).map(|(a, b)| a + b).collect()
}

/// `sum_x H(x) F(x0 + x)` over a kernel window.
fn kernel_average(k: &LatticeKernel, f: &Observable, x0: &[i64]) -> f64 {
    k.iter().map(|(x, h)| h * f.eval(&shifted(x0, &x))).collect::<CompensatedSum>().value()
}

/// `E_{x0} T_N` with the per-step terms `E F(S_n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanReport {
    /// `E F(S_n)` for `n = 1..=N` (index `n - 1`).
    pub per_step: Vec<f64>,
    /// `E T_n` for `n = 0..=N`.
    pub cumulative: Vec<f64>,
    pub mean: f64,
    /// Kernel mass dropped by window trimming at time N.
    pub truncated_mass: f64,
}

pub fn exact_mean_t(law: &StepLaw, f: &Observable, plan: &MomentPlan) -> Result<MeanReport> {
    check(law, f, plan)?;
    let mut k = LatticeKernel::delta(law.dim());
    let mut per_step = Vec::with_capacity(plan.horizon as usize);
    let mut cumulative = vec![0.0];
    let mut acc = CompensatedSum::new();
    for _ in 0..plan.horizon {
        k = k.advance(law, &plan.policy)?;
        let e = kernel_average(&k, f, &plan.x0);
        per_step.push(e);
        acc.add(e);
        cumulative.push(acc.value());
    }
    Ok(MeanReport {
        per_step,
        mean: acc.value(),
        cumulative,
        truncated_mass: k.truncated_mass(),
    })
}

/// `g_m` on a box, row-major.
#[derive(Debug)]
struct GTable {
    values: Vec<f64>,
}

/// Kernels up to a horizon plus lazily built `g_m` tables.
///
/// Tables are created at most once per lag and are safe to request from
/// several threads.
pub struct PairMoments<'a> {
    f: &'a Observable,
    x0: Vec<i64>,
    kernels: Vec<LatticeKernel>,
    /// Box (absolute sites) covering `x0 + window(n)` for every n.
    lo: Vec<i64>,
    shape: Vec<usize>,
    g: Vec<OnceLock<GTable>>,
}

/// One cell of a pair table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCell {
    pub n1: u64,
    pub n2: u64,
    pub value: f64,
    /// `||F||^2` times the kernel mass dropped at n1 and at the lag.
    pub error_bound: f64,
}

impl<'a> PairMoments<'a> {
    pub fn new(law: &StepLaw, f: &'a Observable, plan: &MomentPlan) -> Result<Self> {
        check(law, f, plan)?;
        let d = law.dim();
        let mut kernels = vec![LatticeKernel::delta(d)];
        for _ in 0..plan.horizon {
            let next = kernels.last().unwrap().advance(law, &plan.policy)?;
            kernels.push(next);
        }
        let mut lo = plan.x0.clone();
        let mut hi = plan.x0.clone();
        for k in &kernels {
            let (klo, khi) = k.window();
            for i in 0..d {
                lo[i] = lo[i].min(plan.x0[i] + klo[i]);
                hi[i] = hi[i].max(plan.x0[i] + khi[i]);
            }
        }
        let shape: Vec<usize> = (0..d).map(|i| (hi[i] - lo[i] + 1) as usize).collect();
        let g = (0..=plan.horizon).map(|_| OnceLock::new()).collect();
        Ok(Self {
            f,
            x0: plan.x0.clone(),
            kernels,
            lo,
            shape,
            g,
        })
    }

    pub fn horizon(&self) -> u64 {
        self.kernels.len() as u64 - 1
    }

    pub fn kernel(&self, n: u64) -> &LatticeKernel {
        &self.kernels[n as usize]
    }

    fn box_index(&self, y: &[i64]) -> usize {
        y.iter()
            .zip(&self.lo)
            .zip(&self.shape)
            .fold(0, |idx, ((&c, &lo), &len)| idx * len + (c - lo) as usize)
    }

    fn g_table(&self, m: u64) -> &GTable {
        self.g[m as usize].get_or_init(|| {
            let k = &self.kernels[m as usize];
            let total: usize = self.shape.iter().product();
            let entries: Vec<(Vec<i64>, f64)> = k.iter().collect();
            let values = (0..total)
                .into_par_iter()
                .map(|idx| {
                    let mut y = vec![0i64; self.shape.len()];
                    let mut r = idx;
                    for i in (0..y.len()).rev() {
                        y[i] = self.lo[i] + (r % self.shape[i]) as i64;
                        r /= self.shape[i];
                    }
                    entries
                        .iter()
                        .map(|(z, h)| h * self.f.eval(&shifted(&y, z)))
                        .collect::<CompensatedSum>()
                        .value()
                })
                .collect();
            GTable { values }
        })
    }

    /// `g_m(y) = E_y F(S_m)` for a site in the cached box.
    pub fn g(&self, m: u64, y: &[i64]) -> f64 {
        self.g_table(m).values[self.box_index(y)]
    }

    /// `E_{n1,n2}(x0)` for `n1 <= n2 <= horizon`.
    pub fn pair(&self, n1: u64, n2: u64) -> Result<PairCell> {
        if n1 > n2 || n2 > self.horizon() {
            return Err(WalkError::InvalidParameter(format!(
                "need n1 <= n2 <= {}, got ({n1}, {n2})",
                self.horizon()
            )));
        }
        let m = n2 - n1;
        let g = self.g_table(m);
        let k = &self.kernels[n1 as usize];
        let value = k
            .iter()
            .map(|(x, h)| {
                let y = shifted(&self.x0, &x);
                h * self.f.eval(&y) * g.values[self.box_index(&y)]
            })
            .collect::<CompensatedSum>()
            .value();
        let b = self.f.bound();
        Ok(PairCell {
            n1,
            n2,
            value,
            error_bound: b * b * (k.truncated_mass() + self.kernels[m as usize].truncated_mass()),
        })
    }

    /// All cells with `1 <= n1 <= n2 <= horizon`, computed in parallel.
    pub fn table(&self) -> Result<Vec<PairCell>> {
        let n = self.horizon();
        let cells: Vec<(u64, u64)> = (1..=n).flat_map(|a| (a..=n).map(move |b| (a, b))).collect();
        cells.into_par_iter().map(|(a, b)| self.pair(a, b)).collect()
    }
}

/// `E_{n1,n2}(x0)` for a single pair.
pub fn exact_pair_moment(law: &StepLaw, f: &Observable, plan: &MomentPlan, n1: u64, n2: u64) -> Result<f64> {
    let plan = MomentPlan {
        horizon: n2,
        ..plan.clone()
    };
    Ok(PairMoments::new(law, f, &plan)?.pair(n1, n2)?.value)
}

/// `sum_{1<=n1<=n2<=N} c_{n1,n2} E_{n1,n2}(x0)`.
pub fn second_moment_by_pairs(pm: &PairMoments<'_>, n: u64) -> Result<f64> {
    let mut acc = CompensatedSum::new();
    for a in 1..=n {
        for b in a..=n {
            let c = if a == b { 1.0 } else { 2.0 };
            acc.add(c * pm.pair(a, b)?.value);
        }
    }
    Ok(acc.value())
}

/// Mean, second moment and variance of `T_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub n: u64,
    pub mean: f64,
    pub second: f64,
    pub var: f64,
}

/// Work of the backward recursion, in site-support products.
pub fn second_moment_cost(law: &StepLaw, horizon: u64) -> u128 {
    let (smin, smax) = law.support_bounds();
    let support = law.len() as u128;
    (1..=horizon)
        .map(|j| {
            let r = u128::from(horizon - j);
            smin.iter()
                .zip(&smax)
                .map(|(&a, &b)| r * (b.max(0) - a.min(0)) as u128 + 1)
                .product::<u128>()
                * support
        })
        .sum()
}

/// `E_{x0} T_j`, `E_{x0} T_j^2` and `Var T_j` for `j = 0..=N` by the backward
/// recursion. Exact: no kernel truncation is involved.
pub fn exact_second_moment(law: &StepLaw, f: &Observable, plan: &MomentPlan) -> Result<Vec<MomentRow>> {
    check(law, f, plan)?;
    let cost = second_moment_cost(law, plan.horizon);
    if cost > plan.budget {
        return Err(WalkError::BudgetExceeded {
            what: "second moment recursion",
            required: cost,
            budget: plan.budget,
        });
    }
    let d = law.dim();
    let n_max = plan.horizon as i64;
    let (smin, smax) = law.support_bounds();
    let down: Vec<i64> = smin.iter().map(|&s| s.min(0)).collect();
    let up: Vec<i64> = smax.iter().map(|&s| s.max(0)).collect();
    let box_at = |j: i64| -> (Vec<i64>, Vec<usize>) {
        let r = n_max - j;
        let lo: Vec<i64> = (0..d).map(|i| plan.x0[i] + r * down[i]).collect();
        let shape: Vec<usize> = (0..d).map(|i| (r * (up[i] - down[i]) + 1) as usize).collect();
        (lo, shape)
    };
    let decode = |mut idx: usize, lo: &[i64], shape: &[usize]| -> Vec<i64> {
        let mut x = vec![0i64; d];
        for i in (0..d).rev() {
            x[i] = lo[i] + (idx % shape[i]) as i64;
            idx /= shape[i];
        }
        x
    };
    let encode = |x: &[i64], lo: &[i64], shape: &[usize]| -> usize {
        let mut idx = 0;
        for i in 0..d {
            idx = idx * shape[i] + (x[i] - lo[i]) as usize;
        }
        idx
    };

    // F on the largest box, and the row-restriction to smaller boxes.
    let (lo0, shape0) = box_at(0);
    let size0: usize = shape0.iter().product();
    let f0: Vec<f64> = (0..size0).into_par_iter().map(|i| f.eval(&decode(i, &lo0, &shape0))).collect();
    let restrict = |lo: &[i64], shape: &[usize]| -> Vec<f64> {
        let size: usize = shape.iter().product();
        (0..size).map(|i| f0[encode(&decode(i, lo, shape), &lo0, &shape0)]).collect()
    };

    // b = F + M_{j-1}, a = F^2 + 2 F M_{j-1} + V_{j-1}, on the box of step j - 1.
    let mut b: Vec<f64> = f0.clone();
    let mut a: Vec<f64> = f0.iter().map(|v| v * v).collect();
    let (mut lo_prev, mut shape_prev) = (lo0.clone(), shape0.clone());
    let support: Vec<(Vec<i64>, f64)> = law.iter().map(|(s, p)| (s.to_vec(), p)).collect();
    let mut rows = vec![MomentRow {
        n: 0,
        mean: 0.0,
        second: 0.0,
        var: 0.0,
    }];
    for j in 1..=n_max {
        let (lo, shape) = box_at(j);
        let size: usize = shape.iter().product();
        // Flat offsets of each step inside the previous box.
        let strides: Vec<usize> = (0..d).map(|i| shape_prev[i + 1..].iter().product()).collect();
        let offsets: Vec<(isize, f64)> = support
            .iter()
            .map(|(s, p)| {
                let off: isize = (0..d).map(|i| s[i] as isize * strides[i] as isize).sum();
                (off, *p)
            })
            .collect();
        let step = |idx: usize| -> (f64, f64) {
            let base = encode(&decode(idx, &lo, &shape), &lo_prev, &shape_prev) as isize;
            let (mut m, mut v) = (0.0, 0.0);
            for &(off, p) in &offsets {
                let k = (base + off) as usize;
                m += p * b[k];
                v += p * a[k];
            }
            (m, v)
        };
        let mv: Vec<(f64, f64)> = if size >= 1 << 14 {
            (0..size).into_par_iter().map(step).collect()
        } else {
            (0..size).map(step).collect()
        };
        let center = encode(&plan.x0, &lo, &shape);
        let (mean, second) = mv[center];
        rows.push(MomentRow {
            n: j as u64,
            mean,
            second,
            var: (second - mean * mean).max(0.0),
        });
        if j < n_max {
            let fj = restrict(&lo, &shape);
            b = fj.iter().zip(&mv).map(|(fv, (m, _))| fv + m).collect();
            a = fj.iter().zip(&mv).map(|(fv, (m, v))| fv * fv + 2.0 * fv * m + v).collect();
        }
        lo_prev = lo;
        shape_prev = shape;
    }
    Ok(rows)
}

/// Log-log slope of `Var T_N` against N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceScan {
    pub rows: Vec<MomentRow>,
    /// `-inf` when some variance vanished.
    pub slope: f64,
    pub degenerate: bool,
    pub fit: Option<LineFit>,
}

pub fn variance_exponent_scan(law: &StepLaw, f: &Observable, x0: &[i64], n_list: &[u64], budget: u128) -> Result<VarianceScan> {
    if n_list.len() < 3 {
        return Err(WalkError::TooFewPoints {
            got: n_list.len(),
            need: 3,
        });
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) || n_list[0] == 0 {
        return Err(WalkError::InvalidParameter("N list must be positive and increasing".into()));
    }
    let plan = MomentPlan {
        budget,
        ..MomentPlan::new(x0.to_vec(), *n_list.last().unwrap())
    };
    let all = exact_second_moment(law, f, &plan)?;
    let rows: Vec<MomentRow> = n_list.iter().map(|&n| all[n as usize].clone()).collect();
    // Variances below rounding level of the second moment count as zero.
    let vanishing = rows.iter().any(|r| r.var <= 1e-12 * (1.0 + r.second.abs()));
    if vanishing {
        return Ok(VarianceScan {
            rows,
            slope: f64::NEG_INFINITY,
            degenerate: true,
            fit: None,
        });
    }
    let x: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.var.ln()).collect();
    let fit = fit_line(&x, &y, None);
    Ok(VarianceScan {
        slope: fit.as_ref().map_or(f64::NAN, |f| f.slope),
        degenerate: false,
        rows,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice_walk::{make_step_law, LawPreset};
    use crate::observables::{make_constant, make_heaviside, make_periodic, make_scenery};

    fn lazy(d: usize) -> StepLaw {
        make_step_law(&LawPreset::LazySrw { d, hold: 0.5 }).unwrap()
    }

    #[test]
    fn constant_mean_and_variance() {
        let law = lazy(1);
        let f = make_constant(1, 2.5).unwrap();
        let plan = MomentPlan::new(vec![3], 20);
        let m = exact_mean_t(&law, &f, &plan).unwrap();
        assert!((m.mean - 50.0).abs() < 1e-12);
        let rows = exact_second_moment(&law, &f, &plan).unwrap();
        for r in &rows {
            assert!((r.mean - 2.5 * r.n as f64).abs() < 1e-10);
            assert!(r.var.abs() < 1e-8);
        }
        let pm = PairMoments::new(&law, &f, &plan).unwrap();
        assert!((pm.pair(3, 9).unwrap().value - 6.25).abs() < 1e-12);
    }

    #[test]
    fn parity_variance_is_n() {
        // E (-1)^X = 0 for the lazy step, so increments are uncorrelated.
        let law = lazy(1);
        let f = make_periodic(&[2], vec![1.0, -1.0]).unwrap();
        let rows = exact_second_moment(&law, &f, &MomentPlan::new(vec![0], 50)).unwrap();
        for r in &rows {
            assert!((r.var - r.n as f64).abs() < 1e-9, "{r:?}");
        }
    }

    #[test]
    fn pairs_match_recursion() {
        let law = lazy(1);
        let f = make_scenery(1, 3).unwrap();
        let plan = MomentPlan {
            policy: KernelPolicy::exact(),
            ..MomentPlan::new(vec![2], 12)
        };
        let rows = exact_second_moment(&law, &f, &plan).unwrap();
        let pm = PairMoments::new(&law, &f, &plan).unwrap();
        let mean = exact_mean_t(&law, &f, &plan).unwrap();
        for n in [1, 5, 12] {
            let by_pairs = second_moment_by_pairs(&pm, n).unwrap();
            assert!((by_pairs - rows[n as usize].second).abs() < 1e-12);
            assert!((mean.cumulative[n as usize] - rows[n as usize].mean).abs() < 1e-12);
        }
    }

    #[test]
    fn two_dimensional_recursion_matches_pairs() {
        let law = lazy(2);
        let f = make_scenery(2, 8).unwrap();
        let plan = MomentPlan {
            policy: KernelPolicy::exact(),
            ..MomentPlan::new(vec![1, -1], 6)
        };
        let rows = exact_second_moment(&law, &f, &plan).unwrap();
        let pm = PairMoments::new(&law, &f, &plan).unwrap();
        assert!((second_moment_by_pairs(&pm, 6).unwrap() - rows[6].second).abs() < 1e-12);
    }

    #[test]
    fn heaviside_mixing_toward_half() {
        let law = lazy(1);
        let m = exact_mean_t(&law, &make_heaviside(), &MomentPlan::new(vec![0], 10_000)).unwrap();
        assert!((m.per_step.last().unwrap() - 0.5).abs() < 0.02);
    }

    #[test]
    fn budget_exceeded() {
        let law = lazy(1);
        let f = make_heaviside();
        let plan = MomentPlan {
            budget: 10,
            ..MomentPlan::new(vec![0], 100)
        };
        let err = exact_second_moment(&law, &f, &plan).unwrap_err();
        assert!(err.is_budget());
    }

    #[test]
    fn zero_observable_is_degenerate() {
        let f = make_constant(1, 0.0).unwrap();
        let scan = variance_exponent_scan(&lazy(1), &f, &[0], &[4, 8, 16], DEFAULT_BUDGET).unwrap();
        assert!(scan.degenerate);
        assert!(variance_exponent_scan(&lazy(1), &f, &[0], &[4, 8], DEFAULT_BUDGET).is_err());
    }

    #[test]
    fn heavy_tails_rejected() {
        let law = make_step_law(&LawPreset::SymStableLattice { alpha: 1.5, k_max: 50 }).unwrap();
        let f = make_heaviside();
        assert!(matches!(
            exact_mean_t(&law, &f, &MomentPlan::new(vec![0], 3)),
            Err(WalkError::HeavyTailKernel(_))
        ));
    }
}
