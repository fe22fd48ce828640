//! Kernel- and sample-based diagnostics: local limit theorem error, moderate
//! deviation tails, discrete derivatives of H(n, .), and the tail of the
//! running minimum of drifting walks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{KernelPolicy, LatticeKernel, StepLaw, Walker};
use crate::error::{Result, WalkError};
use crate::numeric::{compensated_sum, fit_line, LineFit};
use crate::rng::{stream_rng, streams};

/// Centered Gaussian density with a given covariance matrix.
#[derive(Debug, Clone)]
pub(crate) struct Gaussian {
    dim: usize,
    inv: Vec<f64>,
    norm: f64,
}

impl Gaussian {
    pub(crate) fn new(cov: &[f64], dim: usize) -> Result<Self> {
        let (inv, det) = invert(cov, dim)
            .ok_or_else(|| WalkError::InvalidParameter("singular step covariance".into()))?;
        let norm = 1.0 / ((2.0 * std::f64::consts::PI).powi(dim as i32) * det).sqrt();
        Ok(Self { dim, inv, norm })
    }

    pub(crate) fn density(&self, u: &[f64]) -> f64 {
        let d = self.dim;
        let mut q = 0.0;
        for i in 0..d {
            for j in 0..d {
                q += u[i] * self.inv[i * d + j] * u[j];
            }
        }
        self.norm * (-0.5 * q).exp()
    }
}

/// Gauss-Jordan inverse and determinant of a small dense matrix.
fn invert(m: &[f64], d: usize) -> Option<(Vec<f64>, f64)> {
    let mut a = m.to_vec();
    let mut inv = vec![0.0; d * d];
    for i in 0..d {
        inv[i * d + i] = 1.0;
    }
    let mut det = 1.0;
    for col in 0..d {
        let piv = (col..d).max_by(|&x, &y| a[x * d + col].abs().total_cmp(&a[y * d + col].abs()))?;
        if a[piv * d + col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for k in 0..d {
                a.swap(piv * d + k, col * d + k);
                inv.swap(piv * d + k, col * d + k);
            }
            det = -det;
        }
        let p = a[col * d + col];
        det *= p;
        for k in 0..d {
            a[col * d + k] /= p;
            inv[col * d + k] /= p;
        }
        for r in 0..d {
            if r != col {
                let f = a[r * d + col];
                for k in 0..d {
                    a[r * d + k] -= f * a[col * d + k];
                    inv[r * d + k] -= f * inv[col * d + k];
                }
            }
        }
    }
    Some((inv, det))
}

/// One row of [`llt_report`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LltRow {
    pub n: u64,
    /// sup over the kernel window of |n^(d/2) H(n,l) - g((l - n v)/sqrt n)|.
    pub sup_error: f64,
    pub truncated_mass: f64,
}

fn require_kernel_law(law: &StepLaw) -> Result<()> {
    if law.is_heavy_tailed() {
        return Err(WalkError::HeavyTailKernel(law.name().to_string()));
    }
    if law.alpha() != 2.0 {
        return Err(WalkError::UnsupportedAlpha(law.alpha()));
    }
    Ok(())
}

/// Local limit theorem error table for an alpha = 2 law. The Gaussian uses
/// the exact covariance of the step table.
pub fn llt_report(law: &StepLaw, n_list: &[u64], policy: &KernelPolicy) -> Result<Vec<LltRow>> {
    require_kernel_law(law)?;
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(WalkError::Precondition("n_list must be strictly increasing".into()));
    }
    let d = law.dim();
    let gauss = Gaussian::new(&law.covariance(), d)?;
    let drift = law.drift().to_vec();
    let mut kernel = LatticeKernel::delta(d);
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        while kernel.time() < n {
            kernel = kernel.advance(law, policy)?;
        }
        let nf = n as f64;
        let scale = nf.powf(d as f64 / 2.0);
        let root = nf.sqrt();
        let sup = kernel
            .iter()
            .map(|(site, h)| {
                let u: Vec<f64> = site.iter().zip(&drift).map(|(&x, v)| (x as f64 - nf * v) / root).collect();
                (scale * h - gauss.density(&u)).abs()
            })
            .fold(0.0, f64::max);
        rows.push(LltRow {
            n,
            sup_error: sup,
            truncated_mass: kernel.truncated_mass(),
        });
    }
    Ok(rows)
}

/// Output of [`tail_report`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub n: u64,
    pub eta: f64,
    pub radius: f64,
    /// Sum of H(n, x) over |x| > radius inside the window.
    pub mass_outside: f64,
    /// Mass dropped from the window; the true tail lies within
    /// [mass_outside, mass_outside + truncated_mass].
    pub truncated_mass: f64,
}

/// Mass of H(n, .) strictly outside the Euclidean ball of radius n^(1/2+eta).
pub fn tail_report(law: &StepLaw, n: u64, eta: f64, policy: &KernelPolicy) -> Result<TailReport> {
    require_kernel_law(law)?;
    let kernel = LatticeKernel::at_time(law, n, policy)?;
    Ok(tail_of(&kernel, eta))
}

/// Same as [`tail_report`] for an already computed kernel.
pub fn tail_of(kernel: &LatticeKernel, eta: f64) -> TailReport {
    let n = kernel.time();
    let radius = (n as f64).powf(0.5 + eta);
    let r2 = radius * radius;
    let mass_outside = compensated_sum(kernel.iter().filter_map(|(site, h)| {
        let norm2: f64 = site.iter().map(|&c| (c as f64) * (c as f64)).sum();
        (norm2 > r2).then_some(h)
    }));
    TailReport {
        n,
        eta,
        radius,
        mass_outside,
        truncated_mass: kernel.truncated_mass(),
    }
}

/// One row of [`kernel_derivatives`]: sup over sites and over all index
/// tuples of |nabla_{i1}..nabla_{ik} H(n, x)| for k = 0, 1, 2, where
/// nabla_i h(x) = h(x) - h(x - e_i).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeRow {
    pub n: u64,
    pub sup: [f64; 3],
}

pub fn kernel_derivatives(law: &StepLaw, n_list: &[u64], policy: &KernelPolicy) -> Result<Vec<DerivativeRow>> {
    require_kernel_law(law)?;
    let d = law.dim();
    let mut kernel = LatticeKernel::delta(d);
    let mut rows = Vec::new();
    for &n in n_list {
        while kernel.time() < n {
            kernel = kernel.advance(law, policy)?;
        }
        let h = |x: &[i64]| kernel.get(x);
        let (lo, hi) = kernel.window();
        // derivatives can be nonzero on the window grown by 2 on the upper side
        let ext_shape: Vec<usize> = lo.iter().zip(&hi).map(|(l, h)| (h - l + 3) as usize).collect();
        let total: usize = ext_shape.iter().product();
        let back = |x: &[i64], i: usize| {
            let mut y = x.to_vec();
            y[i] -= 1;
            y
        };
        let mut sup = [0.0f64; 3];
        let mut x = vec![0i64; d];
        for flat in 0..total {
            let mut r = flat;
            for k in (0..d).rev() {
                x[k] = lo[k] + (r % ext_shape[k]) as i64;
                r /= ext_shape[k];
            }
            sup[0] = sup[0].max(h(&x).abs());
            for i in 0..d {
                let xi = back(&x, i);
                let d1 = h(&x) - h(&xi);
                sup[1] = sup[1].max(d1.abs());
                for j in i..d {
                    let xj = back(&x, j);
                    let d2 = d1 - (h(&xj) - h(&back(&xj, i)));
                    sup[2] = sup[2].max(d2.abs());
                }
            }
        }
        rows.push(DerivativeRow { n, sup });
    }
    Ok(rows)
}

/// One row of [`min_tail_report`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinTailRow {
    pub m: u64,
    pub probability: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinTailReport {
    pub rows: Vec<MinTailRow>,
    /// log P against log m over rows with m >= 1 and P > 0.
    pub loglog_fit: Option<LineFit>,
    /// Trials that hit the step cap before the minimum was certified.
    pub capped_trials: u64,
}

/// Empirical P(min_n S_n <= -m) for a one-dimensional walk with positive
/// drift. A trial stops once S exceeds max(m_list) + `horizon`, once the
/// deepest level is reached, or at a step cap proportional to the expected
/// exit time.
pub fn min_tail_report(law: &StepLaw, m_list: &[u64], trials: u64, seed: u64, horizon: u64) -> Result<MinTailReport> {
    if law.dim() != 1 {
        return Err(WalkError::Precondition("minimum tail needs a one-dimensional walk".into()));
    }
    let v = law.drift()[0];
    if !(v > 0.0) {
        return Err(WalkError::Precondition(format!("drift must be positive, got {v}")));
    }
    if trials == 0 {
        return Err(WalkError::Precondition("trials must be positive".into()));
    }
    let m_max = m_list.iter().copied().max().unwrap_or(0) as i64;
    let exit_level = m_max + horizon as i64;
    let cap = (100.0 * (exit_level as f64 + 1.0) / v) as u64 + 10_000;
    let minima: Vec<(i64, bool)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut w = Walker::new(law, stream_rng(seed, t, streams::STEPS));
            let mut min = 0i64;
            while w.time() < cap {
                let x = w.step_1d();
                min = min.min(x);
                if x > exit_level || min <= -m_max {
                    return (min, false);
                }
            }
            (min, true)
        })
        .collect();
    let capped_trials = minima.iter().filter(|(_, c)| *c).count() as u64;
    let n = trials as f64;
    let rows: Vec<MinTailRow> = m_list
        .iter()
        .map(|&m| {
            let hits = minima.iter().filter(|(mn, _)| *mn <= -(m as i64)).count() as f64;
            let p = hits / n;
            MinTailRow {
                m,
                probability: p,
                stderr: (p * (1.0 - p) / n).sqrt(),
            }
        })
        .collect();
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.m >= 1 && r.probability > 0.0)
        .map(|r| ((r.m as f64).ln(), r.probability.ln()))
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    Ok(MinTailReport {
        rows,
        loglog_fit: fit_line(&xs, &ys, None),
        capped_trials,
    })
}
